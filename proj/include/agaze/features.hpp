#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "agaze/image.hpp"
#include "agaze/image_io.hpp"
#include "agaze/maps.hpp"
#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

// Feature channels for the per-group saliency learner: orientation energy on
// a Gaussian pyramid, center-surround intensity/color contrast, plus the
// scale-free center prior, horizon band, and depth near/far channels. All
// channels are computed at a reduced working resolution, upsampled back to
// the stimulus size, and max-normalized.

namespace agaze {

inline constexpr int kWorkingLongSide = 320;
inline constexpr int kPyramidLevels = 3;
inline constexpr std::array<int, 4> kOrientationDegrees = {0, 45, 90, 135};
inline constexpr std::array<double, 3> kContrastCenterSigma = {2.0, 4.0, 8.0};
inline constexpr double kContrastSurroundFactor = 4.0;
inline constexpr double kGaborSigma = 2.0;
inline constexpr double kGaborWavelength = 5.0;

// ---------------------------------------------------------------------------
// Resampling.
// ---------------------------------------------------------------------------

inline ScalarMap resize_bilinear(const ScalarMap& src, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) throw ArgumentError("resize_bilinear: bad target size");
    if (new_w == src.width && new_h == src.height) return src;
    ScalarMap out(new_w, new_h, src.kind);
    out.degenerate = src.degenerate;
    const double sx = static_cast<double>(src.width) / new_w;
    const double sy = static_cast<double>(src.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < new_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            const double top = src.at(x0, y0) * (1.0 - wx) + src.at(x1, y0) * wx;
            const double bot = src.at(x0, y1) * (1.0 - wx) + src.at(x1, y1) * wx;
            out.at(x, y) = top * (1.0 - wy) + bot * wy;
        }
    }
    return out;
}

inline void working_size(int w, int h, int& out_w, int& out_h, int long_side = kWorkingLongSide) {
    const int longest = std::max(w, h);
    if (longest <= long_side) {
        out_w = w;
        out_h = h;
        return;
    }
    const double scale = static_cast<double>(long_side) / longest;
    out_w = std::max(1, static_cast<int>(std::lround(w * scale)));
    out_h = std::max(1, static_cast<int>(std::lround(h * scale)));
}

// ---------------------------------------------------------------------------
// Gaussian pyramid (level 0 = input resolution, each level halves).
// ---------------------------------------------------------------------------

inline std::vector<ScalarMap> gaussian_pyramid(const ScalarMap& base, int n_levels) {
    if (n_levels < 1) throw ArgumentError("gaussian_pyramid: n_levels must be >= 1");
    std::vector<ScalarMap> levels;
    levels.push_back(base);
    for (int l = 1; l < n_levels; ++l) {
        const ScalarMap& prev = levels.back();
        if (prev.width < 2 || prev.height < 2) break;
        const ScalarMap blurred = smooth_gaussian(prev, 1.0);
        levels.push_back(resize_bilinear(blurred, (prev.width + 1) / 2, (prev.height + 1) / 2));
    }
    return levels;
}

// ---------------------------------------------------------------------------
// Gabor quadrature pair.
// ---------------------------------------------------------------------------

struct GaborPair {
    int radius = 0;
    std::vector<double> even;  // (2r+1)^2, zero-sum
    std::vector<double> odd;   // zero-sum by antisymmetry
};

inline GaborPair make_gabor(double theta_deg, double sigma = kGaborSigma,
                            double wavelength = kGaborWavelength) {
    const double theta = theta_deg * std::acos(-1.0) / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    GaborPair g;
    g.radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int n = 2 * g.radius + 1;
    g.even.resize(static_cast<std::size_t>(n) * n);
    g.odd.resize(static_cast<std::size_t>(n) * n);
    std::vector<double> envelope(g.even.size());
    double even_sum = 0.0, env_sum = 0.0;
    for (int y = -g.radius; y <= g.radius; ++y) {
        for (int x = -g.radius; x <= g.radius; ++x) {
            const std::size_t i =
                static_cast<std::size_t>(y + g.radius) * n + (x + g.radius);
            const double env = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            const double phase = 2.0 * std::acos(-1.0) * (x * ct + y * st) / wavelength;
            envelope[i] = env;
            g.even[i] = env * std::cos(phase);
            g.odd[i] = env * std::sin(phase);
            even_sum += g.even[i];
            env_sum += env;
        }
    }
    // remove the DC component of the even kernel so flat regions respond 0
    const double correction = even_sum / env_sum;
    for (std::size_t i = 0; i < g.even.size(); ++i) g.even[i] -= correction * envelope[i];
    return g;
}

namespace detail {

inline ScalarMap convolve2d_replicate(const ScalarMap& src, const std::vector<double>& kernel,
                                      int radius) {
    ScalarMap out(src.width, src.height, ScalarMap::Kind::Counts);
    const int n = 2 * radius + 1;
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int ky = -radius; ky <= radius; ++ky) {
                const int sy = std::clamp(y + ky, 0, src.height - 1);
                const double* row = &src.values[static_cast<std::size_t>(sy) * src.width];
                const double* krow =
                    &kernel[static_cast<std::size_t>(ky + radius) * n + radius];
                for (int kx = -radius; kx <= radius; ++kx) {
                    const int sx = std::clamp(x + kx, 0, src.width - 1);
                    acc += row[sx] * krow[kx];
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

}  // namespace detail

// Quadrature energy (even^2 + odd^2), lightly smoothed.
inline ScalarMap orientation_energy(const ScalarMap& level, const GaborPair& gabor) {
    const ScalarMap even = detail::convolve2d_replicate(level, gabor.even, gabor.radius);
    const ScalarMap odd = detail::convolve2d_replicate(level, gabor.odd, gabor.radius);
    ScalarMap energy(level.width, level.height, ScalarMap::Kind::Counts);
    for (std::size_t i = 0; i < energy.size(); ++i)
        energy.values[i] = even.values[i] * even.values[i] + odd.values[i] * odd.values[i];
    return smooth_gaussian(energy, 1.0);
}

// ---------------------------------------------------------------------------
// Center-surround contrast (difference of Gaussians).
// ---------------------------------------------------------------------------

inline ScalarMap center_surround(const ScalarMap& channel, double sigma_center,
                                 double sigma_surround) {
    if (!(sigma_surround > sigma_center))
        throw ArgumentError("center_surround: surround sigma must exceed center sigma");
    const ScalarMap center = smooth_gaussian(channel, sigma_center);
    const ScalarMap surround = smooth_gaussian(channel, sigma_surround);
    ScalarMap out(channel.width, channel.height, ScalarMap::Kind::Counts);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = std::abs(center.values[i] - surround.values[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Scale-free channels.
// ---------------------------------------------------------------------------

// Unit-integral Gaussian profile over rows, centered on center_row.
inline std::vector<double> vertical_gaussian_band(int height, double center_row,
                                                  double sigma_rows) {
    if (height < 1) throw ArgumentError("vertical_gaussian_band: bad height");
    if (!(sigma_rows > 0.0)) throw ArgumentError("vertical_gaussian_band: sigma must be > 0");
    std::vector<double> profile(static_cast<std::size_t>(height));
    double sum = 0.0;
    for (int y = 0; y < height; ++y) {
        profile[y] = std::exp(-(y - center_row) * (y - center_row) /
                              (2.0 * sigma_rows * sigma_rows));
        sum += profile[y];
    }
    for (double& v : profile) v /= sum;
    return profile;
}

// Horizontal-edge band: the row with the strongest smoothed vertical
// derivative energy gets a Gaussian band (sigma = 5% of height). A flat
// image falls back to the middle row and marks the channel degenerate.
inline ScalarMap horizon_channel(const ScalarMap& intensity) {
    const int w = intensity.width, h = intensity.height;
    if (h < 2) throw ArgumentError("horizon_channel: image too short");
    std::vector<double> energy(static_cast<std::size_t>(h), 0.0);
    for (int y = 1; y < h; ++y) {
        double e = 0.0;
        for (int x = 0; x < w; ++x) {
            const double d = intensity.at(x, y) - intensity.at(x, y - 1);
            e += d * d;
        }
        energy[y] = e;
    }
    // smooth the row profile (renormalized truncated Gaussian)
    int radius = 0;
    const auto kernel = detail::gaussian_kernel(2.0, radius);
    std::vector<double> smoothed(energy.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        double acc = 0.0, mass = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            const int sy = y + k;
            if (sy < 0 || sy >= h) continue;
            acc += energy[sy] * kernel[k + radius];
            mass += kernel[k + radius];
        }
        smoothed[y] = acc / mass;
    }

    bool degenerate = true;
    double best = 0.0;
    int best_row = (h - 1) / 2;
    for (int y = 0; y < h; ++y) {
        if (smoothed[y] > best) {
            best = smoothed[y];
            best_row = y;
            degenerate = false;
        }
    }
    const auto profile = vertical_gaussian_band(h, best_row, 0.05 * h);
    ScalarMap out(w, h, ScalarMap::Kind::Counts);
    out.degenerate = degenerate;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = profile[y];
    return out;
}

// Isotropic Gaussian prior on the image center, peak 1.
inline ScalarMap center_prior_channel(int width, int height) {
    if (width < 1 || height < 1) throw ArgumentError("center_prior_channel: bad size");
    const double sigma = std::min(width, height) / 4.0;
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    ScalarMap out(width, height, ScalarMap::Kind::Normalized);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.at(x, y) = std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                                    (2.0 * sigma * sigma));
    return out;
}

// near-ness = 1 - d, far-ness = d (depth is normalized with 0 = nearest).
inline std::pair<ScalarMap, ScalarMap> depth_channels(const ScalarMap& depth,
                                                      double smooth_sigma = 2.0) {
    ScalarMap near_map(depth.width, depth.height, ScalarMap::Kind::Counts);
    ScalarMap far_map(depth.width, depth.height, ScalarMap::Kind::Counts);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double d = depth.values[i];
        if (!(d >= 0.0 && d <= 1.0))
            throw ArgumentError("depth_channels: depth values must lie in [0,1]");
        near_map.values[i] = 1.0 - d;
        far_map.values[i] = d;
    }
    return {smooth_gaussian(near_map, smooth_sigma), smooth_gaussian(far_map, smooth_sigma)};
}

// ---------------------------------------------------------------------------
// Channel manifest and scale selection.
// ---------------------------------------------------------------------------

struct ChannelSpec {
    std::string name;
    int scale = 0;  // 0 = scale-free, otherwise 1 (finest) .. 3 (coarsest)

    bool operator==(const ChannelSpec&) const = default;
};

struct ScaleSelection {
    std::vector<int> scales;  // sorted, unique

    bool contains(int s) const {
        return std::find(scales.begin(), scales.end(), s) != scales.end();
    }

    static ScaleSelection all() { return {{1, 2, 3}}; }

    static ScaleSelection for_group(AgeGroup g) {
        switch (g) {
            case AgeGroup::Children: return {{3}};
            case AgeGroup::Adults: return {{1, 2, 3}};
            case AgeGroup::Elderly: return {{2, 3}};
        }
        throw ArgumentError("for_group: bad age group");
    }
};

struct ChannelManifest {
    std::vector<ChannelSpec> channels;

    // Scale-free channels always pass; scale-tagged ones need their scale selected.
    ChannelManifest filtered(const ScaleSelection& sel) const {
        ChannelManifest out;
        for (const auto& c : channels)
            if (c.scale == 0 || sel.contains(c.scale)) out.channels.push_back(c);
        return out;
    }

    std::uint64_t hash() const {
        std::string blob;
        for (const auto& c : channels) {
            blob += c.name;
            blob += '\x1f';
            blob += std::to_string(c.scale);
            blob += '\x1e';
        }
        return hash_str(blob);
    }
};

struct ManifestOptions {
    bool orientation = true;
    bool contrast = true;  // intensity + color center-surround
    bool center_prior = true;
    bool horizon = true;
    bool depth = false;
};

inline ChannelManifest default_manifest(const ManifestOptions& opt = {}) {
    ChannelManifest m;
    if (opt.orientation)
        for (int s = 1; s <= kPyramidLevels; ++s)
            for (int deg : kOrientationDegrees)
                m.channels.push_back(
                    {"ori_s" + std::to_string(s) + "_o" + std::to_string(deg), s});
    if (opt.contrast)
        for (const char* base : {"ics", "rg", "by"})
            for (int s = 1; s <= 3; ++s)
                m.channels.push_back({std::string(base) + "_s" + std::to_string(s), s});
    if (opt.center_prior) m.channels.push_back({"center_prior", 0});
    if (opt.horizon) m.channels.push_back({"horizon", 0});
    if (opt.depth) {
        m.channels.push_back({"depth_near", 0});
        m.channels.push_back({"depth_far", 0});
    }
    return m;
}

inline nlohmann::json manifest_to_json(const ChannelManifest& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : m.channels) arr.push_back({{"name", c.name}, {"scale", c.scale}});
    return arr;
}

inline ChannelManifest manifest_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw ParseError("channel manifest: expected an array");
    ChannelManifest m;
    for (const auto& e : arr)
        m.channels.push_back({e.at("name").get<std::string>(), e.at("scale").get<int>()});
    return m;
}

// ---------------------------------------------------------------------------
// Assembly.
// ---------------------------------------------------------------------------

struct FeatureTensor {
    int width = 0;
    int height = 0;
    std::vector<std::string> channel_names;
    std::vector<std::uint8_t> channel_degenerate;
    std::vector<double> values;  // channel-major, each plane max-normalized

    std::size_t n_channels() const { return channel_names.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }

    double at(std::size_t c, int x, int y) const {
        return values[c * plane_size() + static_cast<std::size_t>(y) * width + x];
    }

    const double* plane(std::size_t c) const { return values.data() + c * plane_size(); }

    // feature vector of one pixel across channels
    std::vector<double> feature_at(int x, int y) const {
        std::vector<double> f(n_channels());
        for (std::size_t c = 0; c < f.size(); ++c) f[c] = at(c, x, y);
        return f;
    }

    ScalarMap channel_map(std::size_t c) const {
        ScalarMap m(width, height, ScalarMap::Kind::Normalized);
        std::copy(plane(c), plane(c) + plane_size(), m.values.begin());
        m.degenerate = channel_degenerate[c] != 0;
        return m;
    }

    std::optional<std::size_t> channel_index(const std::string& name) const {
        const auto it = std::find(channel_names.begin(), channel_names.end(), name);
        if (it == channel_names.end()) return std::nullopt;
        return static_cast<std::size_t>(it - channel_names.begin());
    }

    // tensor restricted to the named channels, in the given order
    FeatureTensor subset(const std::vector<std::string>& names) const {
        FeatureTensor out;
        out.width = width;
        out.height = height;
        out.values.reserve(names.size() * plane_size());
        for (const auto& name : names) {
            const auto c = channel_index(name);
            if (!c) throw ArgumentError("subset: tensor lacks channel '" + name + "'");
            out.channel_names.push_back(name);
            out.channel_degenerate.push_back(channel_degenerate[*c]);
            out.values.insert(out.values.end(), plane(*c), plane(*c) + plane_size());
        }
        return out;
    }
};

struct FeatureOptions {
    ScaleSelection selection = ScaleSelection::all();
    int working_long_side = kWorkingLongSide;
    std::optional<std::string> external_dir;  // holds <image_id>.<channel>.png files
    std::string image_id;                     // required for external channels
};

namespace detail {

inline bool parse_orientation_name(const std::string& name, int& scale, int& degrees) {
    // ori_s<scale>_o<degrees>
    if (name.rfind("ori_s", 0) != 0) return false;
    const auto o_pos = name.find("_o", 5);
    if (o_pos == std::string::npos) return false;
    try {
        scale = std::stoi(name.substr(5, o_pos - 5));
        degrees = std::stoi(name.substr(o_pos + 2));
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

inline bool parse_contrast_name(const std::string& name, std::string& base, int& scale) {
    for (const char* b : {"ics", "rg", "by"}) {
        const std::string prefix = std::string(b) + "_s";
        if (name.rfind(prefix, 0) == 0) {
            try {
                scale = std::stoi(name.substr(prefix.size()));
            } catch (const std::exception&) {
                return false;
            }
            base = b;
            return true;
        }
    }
    return false;
}

}  // namespace detail

// Computes every channel the (scale-filtered) manifest requests, upsamples
// each to the stimulus resolution, and max-normalizes it. Depth channels
// require the depth argument; unknown names resolve against external_dir.
inline FeatureTensor assemble_features(const ImageRgb8& image, const ScalarMap* depth,
                                       const ChannelManifest& manifest,
                                       const FeatureOptions& opt = {}) {
    const ChannelManifest active = manifest.filtered(opt.selection);
    if (active.channels.empty())
        throw ArgumentError("assemble_features: no channels after scale selection");

    int ww = 0, wh = 0;
    working_size(image.width, image.height, ww, wh, opt.working_long_side);

    // base channels at working resolution
    const ScalarMap intensity = [&] {
        ScalarMap full = intensity_of(image);
        return resize_bilinear(full, ww, wh);
    }();
    auto color_channel = [&](int a, int b, double b_factor) {
        const ScalarMap ca = channel_of(image, a);
        const ScalarMap cb = channel_of(image, b);
        ScalarMap out(image.width, image.height, ScalarMap::Kind::Counts);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.values[i] = ca.values[i] - b_factor * cb.values[i];
        return resize_bilinear(out, ww, wh);
    };

    // lazily built inputs
    std::vector<ScalarMap> pyramid;
    std::optional<ScalarMap> rg, by, depth_working;
    auto ensure_pyramid = [&] {
        if (pyramid.empty()) pyramid = gaussian_pyramid(intensity, kPyramidLevels);
    };
    auto contrast_input = [&](const std::string& base) -> const ScalarMap& {
        if (base == "ics") return intensity;
        if (base == "rg") {
            if (!rg) rg = color_channel(0, 1, 1.0);  // R - G
            return *rg;
        }
        // B - (R + G)/2
        if (!by) {
            const ScalarMap r = resize_bilinear(channel_of(image, 0), ww, wh);
            const ScalarMap g = resize_bilinear(channel_of(image, 1), ww, wh);
            const ScalarMap b = resize_bilinear(channel_of(image, 2), ww, wh);
            ScalarMap out(ww, wh, ScalarMap::Kind::Counts);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.values[i] = b.values[i] - 0.5 * (r.values[i] + g.values[i]);
            by = std::move(out);
        }
        return *by;
    };

    FeatureTensor tensor;
    tensor.width = image.width;
    tensor.height = image.height;
    tensor.values.reserve(active.channels.size() * static_cast<std::size_t>(image.width) *
                          image.height);

    std::pair<std::optional<ScalarMap>, std::optional<ScalarMap>> depth_pair;

    for (const auto& spec : active.channels) {
        ScalarMap working(ww, wh, ScalarMap::Kind::Counts);
        int scale = 0, degrees = 0;
        std::string base;
        if (detail::parse_orientation_name(spec.name, scale, degrees)) {
            if (scale < 1 || scale > kPyramidLevels)
                throw ArgumentError("assemble_features: bad scale in '" + spec.name + "'");
            ensure_pyramid();
            const std::size_t level =
                std::min<std::size_t>(scale - 1, pyramid.size() - 1);
            const ScalarMap energy = orientation_energy(
                pyramid[level], make_gabor(static_cast<double>(degrees)));
            working = resize_bilinear(energy, ww, wh);
        } else if (detail::parse_contrast_name(spec.name, base, scale)) {
            if (scale < 1 || scale > 3)
                throw ArgumentError("assemble_features: bad scale in '" + spec.name + "'");
            const double sc = kContrastCenterSigma[scale - 1];
            working = center_surround(contrast_input(base), sc, kContrastSurroundFactor * sc);
        } else if (spec.name == "center_prior") {
            working = center_prior_channel(ww, wh);
        } else if (spec.name == "horizon") {
            working = horizon_channel(intensity);
        } else if (spec.name == "depth_near" || spec.name == "depth_far") {
            if (depth == nullptr)
                throw ArgumentError("assemble_features: manifest needs depth but none given");
            if (!depth_pair.first) {
                if (!depth_working) depth_working = resize_bilinear(*depth, ww, wh);
                auto [near_map, far_map] = depth_channels(*depth_working);
                depth_pair = {std::move(near_map), std::move(far_map)};
            }
            working = spec.name == "depth_near" ? *depth_pair.first : *depth_pair.second;
        } else {
            if (!opt.external_dir)
                throw ArgumentError("assemble_features: unknown channel '" + spec.name +
                                    "' and no external directory configured");
            if (opt.image_id.empty())
                throw ArgumentError("assemble_features: external channels need an image id");
            const std::string path =
                *opt.external_dir + "/" + opt.image_id + "." + spec.name + ".png";
            working = resize_bilinear(read_map_png(path), ww, wh);
        }

        ScalarMap full = max_normalized(resize_bilinear(working, image.width, image.height));
        tensor.channel_names.push_back(spec.name);
        tensor.channel_degenerate.push_back(
            static_cast<std::uint8_t>(full.degenerate || working.degenerate));
        tensor.values.insert(tensor.values.end(), full.values.begin(), full.values.end());
    }
    return tensor;
}

}  // namespace agaze
