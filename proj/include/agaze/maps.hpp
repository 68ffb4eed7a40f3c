#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "agaze/gaze_data.hpp"
#include "agaze/image.hpp"
#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

// Human fixation maps, Gaussian-smoothed human saliency maps, combined group
// maps, center maps, and heat-map overlays.

namespace agaze {

// Default smoothing width: ~1 degree of visual angle for the recording
// geometry (65 cm viewing distance, 40 cm wide 1280 px display).
inline constexpr double kDefaultSigmaPx = 37.0;

// Accumulates fixation landings into a Counts map. With duration weighting
// enabled each landing adds its duration_ms instead of 1.
inline ScalarMap build_fixation_map(const std::vector<FixationRecord>& fixations, int width,
                                    int height, bool weight_by_duration = false) {
    ScalarMap map(width, height, ScalarMap::Kind::Counts);
    for (const auto& f : fixations) {
        if (!map.in_bounds(f.x, f.y))
            throw ArgumentError("fixation (" + std::to_string(f.x) + "," + std::to_string(f.y) +
                                ") outside " + std::to_string(width) + "x" +
                                std::to_string(height) + " map");
        map.at(f.x, f.y) += weight_by_duration ? f.duration_ms : 1.0;
    }
    return map;
}

namespace detail {

// Truncated Gaussian taps, normalized to unit sum.
inline std::vector<double> gaussian_kernel(double sigma, int& radius) {
    radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        const double v = std::exp(-0.5 * (d * d) / (sigma * sigma));
        k[d + radius] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

// 1-D convolution along a strided line. Mass-preserving border handling:
// each source sample distributes its weight through the portion of the
// kernel that stays in bounds, rescaled to unit sum, so the line's total is
// conserved exactly. `support[j]` is that in-bounds kernel mass for a source
// at position j.
inline void convolve_line_mass_preserving(const double* in, double* out, int n, long stride,
                                          const std::vector<double>& kernel, int radius,
                                          const std::vector<double>& support) {
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const int lo = std::max(0, i - radius);
        const int hi = std::min(n - 1, i + radius);
        for (int j = lo; j <= hi; ++j) {
            acc += in[j * stride] * kernel[(i - j) + radius] / support[j];
        }
        out[i * stride] = acc;
    }
}

inline std::vector<double> kernel_support(int n, const std::vector<double>& kernel, int radius) {
    std::vector<double> support(n, 1.0);
    // Only positions within `radius` of a border lose kernel mass.
    for (int j = 0; j < n; ++j) {
        if (j >= radius && j < n - radius) continue;
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d) {
            const int t = j + d;
            if (t >= 0 && t < n) s += kernel[d + radius];
        }
        support[j] = s;
    }
    return support;
}

}  // namespace detail

// Separable 2-D Gaussian smoothing with border-renormalized kernels. Total
// mass is conserved (each pass conserves its line sums), interior impulses
// blur translation-equivariantly, and the argmax of an isolated impulse
// stays put.
inline ScalarMap smooth_gaussian(const ScalarMap& in, double sigma_px) {
    if (!(sigma_px > 0.0)) throw ArgumentError("smooth_gaussian: sigma_px must be > 0");
    int radius = 0;
    const auto kernel = detail::gaussian_kernel(sigma_px, radius);

    ScalarMap tmp(in.width, in.height, in.kind);
    ScalarMap out(in.width, in.height, in.kind);

    const auto support_x = detail::kernel_support(in.width, kernel, radius);
    for (int y = 0; y < in.height; ++y) {
        detail::convolve_line_mass_preserving(&in.values[static_cast<std::size_t>(y) * in.width],
                                              &tmp.values[static_cast<std::size_t>(y) * in.width],
                                              in.width, 1, kernel, radius, support_x);
    }
    const auto support_y = detail::kernel_support(in.height, kernel, radius);
    for (int x = 0; x < in.width; ++x) {
        detail::convolve_line_mass_preserving(&tmp.values[x], &out.values[x], in.height, in.width,
                                              kernel, radius, support_y);
    }
    out.degenerate = in.degenerate;
    return out;
}

// Fixation map -> max-normalized human saliency map. An all-zero input maps
// to an all-zero output with the degenerate flag set.
inline ScalarMap build_saliency_map(const ScalarMap& fixmap, double sigma_px) {
    if (!(sigma_px > 0.0)) throw ArgumentError("build_saliency_map: sigma_px must be > 0");
    return max_normalized(smooth_gaussian(fixmap, sigma_px));
}

// Equal-weight pixelwise mean of the three group maps, max-normalized.
inline ScalarMap combine_group_maps(const ScalarMap& children, const ScalarMap& adults,
                                    const ScalarMap& elderly) {
    if (!children.same_shape(adults) || !children.same_shape(elderly))
        throw ArgumentError("combine_group_maps: dimension mismatch");
    return max_normalized(mean_of({&children, &adults, &elderly}));
}

// Pixelwise mean over one group's per-image saliency maps, max-normalized.
inline ScalarMap build_center_map(const std::vector<const ScalarMap*>& group_saliency_maps) {
    if (group_saliency_maps.empty()) throw ArgumentError("build_center_map: empty map list");
    return max_normalized(mean_of(group_saliency_maps));
}

inline ScalarMap build_center_map(const std::vector<ScalarMap>& maps) {
    std::vector<const ScalarMap*> ptrs;
    ptrs.reserve(maps.size());
    for (const auto& m : maps) ptrs.push_back(&m);
    return build_center_map(ptrs);
}

// Per-image group maps plus their combined map.
struct GroupMapSet {
    std::array<ScalarMap, 3> group;  // indexed by AgeGroup
    ScalarMap combined;
};

inline GroupMapSet build_group_map_set(const GazeDataset& dataset, const std::string& image_id,
                                       double sigma_px, bool weight_by_duration = false) {
    const ImageInfo& im = dataset.image(image_id);
    const auto parts = partition_by_group(dataset, image_id);
    GroupMapSet set;
    for (int g = 0; g < 3; ++g) {
        const auto fixmap = build_fixation_map(parts[g], im.width, im.height, weight_by_duration);
        set.group[g] = build_saliency_map(fixmap, sigma_px);
    }
    set.combined = combine_group_maps(set.group[0], set.group[1], set.group[2]);
    return set;
}

// ---------------------------------------------------------------------------
// Heat-map overlay.
// ---------------------------------------------------------------------------

inline constexpr double kOverlayAlpha = 0.5;

// Piecewise-linear jet ramp.
inline void jet_color(double v, double& r, double& g, double& b) {
    auto clamp01 = [](double t) { return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t); };
    r = clamp01(1.5 - std::abs(4.0 * v - 3.0));
    g = clamp01(1.5 - std::abs(4.0 * v - 2.0));
    b = clamp01(1.5 - std::abs(4.0 * v - 1.0));
}

// Per pixel, with map value v and blend weight w = alpha * v:
//   out = (1 - w) * image + w * jet(v)
// A zero map therefore returns the input image unchanged.
inline ImageRgb8 render_heat_overlay(const ImageRgb8& image, const ScalarMap& map,
                                     double alpha = kOverlayAlpha) {
    if (image.width != map.width || image.height != map.height)
        throw ArgumentError("render_heat_overlay: dimension mismatch");
    ImageRgb8 out(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double v = map.at(x, y);
            if (v < 0.0) v = 0.0;
            if (v > 1.0) v = 1.0;
            const double w = alpha * v;
            double jr, jg, jb;
            jet_color(v, jr, jg, jb);
            const std::uint8_t* src = image.px(x, y);
            std::uint8_t* dst = out.px(x, y);
            const double rgb[3] = {jr, jg, jb};
            for (int c = 0; c < 3; ++c) {
                const double blended = (1.0 - w) * (src[c] / 255.0) + w * rgb[c];
                dst[c] = static_cast<std::uint8_t>(std::lround(blended * 255.0));
            }
        }
    }
    return out;
}

}  // namespace agaze
