#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "agaze/gaze_data.hpp"
#include "agaze/image.hpp"
#include "agaze/image_io.hpp"
#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

// Synthetic cohorts with known ground truth: blob stimuli on near/far depth
// planes, per-group attention surfaces, and observers parameterized by center
// pull, depth preference, and explorativeness. Everything is a pure function
// of the seeds.

namespace agaze {

inline constexpr double kCenterExponent = 4.0;  // amplifies an observer's center pull
inline constexpr double kDepthFloor = 0.15;     // keeps depth weighting off exact zero

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double normal01(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::acos(-1.0) * u2);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stimuli.
// ---------------------------------------------------------------------------

struct SynthBlob {
    double cx = 0.0, cy = 0.0;
    double sigma = 0.0;
    bool near_plane = false;
    int home_group = 0;  // the group this blob mainly attracts
    std::array<double, 3> color = {0.0, 0.0, 0.0};
};

struct SynthStimulus {
    ImageRgb8 image;
    ScalarMap depth;                     // [0,1], 0 = nearest
    std::vector<std::uint8_t> mask;      // 0 unlabeled, 1 foreground, 2 background
    std::array<ScalarMap, 3> surfaces;   // per-group attention surface, sums to 1
    std::vector<SynthBlob> blobs;
};

struct StimulusOptions {
    int width = 320;
    int height = 240;
    int n_blobs = 6;
    double blob_sigma_frac = 0.055;   // blob sigma as a fraction of min(w, h)
    double ring_inner_frac = 0.28;    // blob centers live on an outer ring so the
    double ring_outer_frac = 0.42;    // image center carries no intrinsic attraction
    double group_distinctness = 1.0;  // 0 = identical surfaces, 1 = home blobs only
    double blob_amplitude = 0.35;
    double noise_amplitude = 0.04;    // background texture, keeps filters non-degenerate
    double near_depth = 0.1;
    double far_depth = 0.75;
    StimulusCategory category = StimulusCategory::Naturals;
};

// Blobs alternate between the near and far plane and cycle their home group.
// Near and far blobs are drawn from the same visual distribution, so only the
// depth data separates the planes.
inline SynthStimulus generate_stimulus(std::uint64_t seed, const StimulusOptions& opt = {}) {
    if (opt.width < 16 || opt.height < 16) throw ArgumentError("generate_stimulus: image too small");
    if (opt.n_blobs < 1) throw ArgumentError("generate_stimulus: need at least one blob");
    if (!(opt.ring_inner_frac > 0.0 && opt.ring_outer_frac > opt.ring_inner_frac &&
          opt.ring_outer_frac < 0.5))
        throw ArgumentError("generate_stimulus: bad ring fractions");
    if (!(opt.group_distinctness >= 0.0 && opt.group_distinctness <= 1.0))
        throw ArgumentError("generate_stimulus: distinctness must lie in [0,1]");

    std::mt19937_64 rng(derive_seed(seed, "stimulus"));
    const double m = std::min(opt.width, opt.height);
    const double ccx = (opt.width - 1) / 2.0, ccy = (opt.height - 1) / 2.0;
    const double two_pi = 2.0 * std::acos(-1.0);

    SynthStimulus s;
    s.blobs.reserve(opt.n_blobs);
    const double angle0 = detail::uniform01(rng) * two_pi;
    for (int k = 0; k < opt.n_blobs; ++k) {
        SynthBlob b;
        // evenly spread angles with jitter keep blobs from piling up
        const double angle = angle0 + two_pi * (k + 0.3 * (detail::uniform01(rng) - 0.5)) /
                                          opt.n_blobs;
        const double radius =
            m * (opt.ring_inner_frac +
                 (opt.ring_outer_frac - opt.ring_inner_frac) * detail::uniform01(rng));
        b.cx = ccx + radius * std::cos(angle);
        b.cy = ccy + radius * std::sin(angle);
        b.sigma = m * opt.blob_sigma_frac * (0.8 + 0.4 * detail::uniform01(rng));
        b.near_plane = (k % 2) == 0;
        b.home_group = k % 3;
        for (double& c : b.color) c = 0.3 + 0.7 * detail::uniform01(rng);
        s.blobs.push_back(b);
    }

    // image: gray background with light texture plus the blob bumps
    s.image.width = opt.width;
    s.image.height = opt.height;
    s.image.pixels.assign(static_cast<std::size_t>(opt.width) * opt.height * 3, 0);
    s.depth = ScalarMap(opt.width, opt.height, ScalarMap::Kind::Normalized);
    std::fill(s.depth.values.begin(), s.depth.values.end(), 1.0);
    s.mask.assign(static_cast<std::size_t>(opt.width) * opt.height, 0);

    std::mt19937_64 noise_rng(derive_seed(seed, "texture"));
    for (int y = 0; y < opt.height; ++y) {
        for (int x = 0; x < opt.width; ++x) {
            std::array<double, 3> v;
            const double n = opt.noise_amplitude * (detail::uniform01(noise_rng) - 0.5);
            v.fill(0.5 + n);
            for (const auto& b : s.blobs) {
                const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
                const double g = std::exp(-d2 / (2.0 * b.sigma * b.sigma));
                for (int c = 0; c < 3; ++c) v[c] += opt.blob_amplitude * b.color[c] * g;
            }
            unsigned char* px = s.image.px(x, y);
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<unsigned char>(
                    std::lround(std::clamp(v[c], 0.0, 1.0) * 255.0));
        }
    }

    // depth and mask: hard disks of radius 2 sigma per blob, later blobs win
    for (const auto& b : s.blobs) {
        const double r = 2.0 * b.sigma;
        const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - r)));
        const int x1 = std::min(opt.width - 1, static_cast<int>(std::ceil(b.cx + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - r)));
        const int y1 = std::min(opt.height - 1, static_cast<int>(std::ceil(b.cy + r)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
                if (d2 > r * r) continue;
                s.depth.at(x, y) = b.near_plane ? opt.near_depth : opt.far_depth;
                s.mask[static_cast<std::size_t>(y) * opt.width + x] = b.near_plane ? 1 : 2;
            }
    }

    // attention surfaces: each group weights its home blobs up as
    // distinctness grows; a uniform floor keeps every pixel reachable
    for (int g = 0; g < 3; ++g) {
        ScalarMap surf(opt.width, opt.height, ScalarMap::Kind::Counts);
        double peak = 0.0;
        for (int y = 0; y < opt.height; ++y)
            for (int x = 0; x < opt.width; ++x) {
                double v = 0.0;
                for (const auto& b : s.blobs) {
                    const double w =
                        b.home_group == g ? 1.0 : 1.0 - 0.95 * opt.group_distinctness;
                    const double d2 =
                        (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
                    v += w * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
                }
                surf.at(x, y) = v;
                peak = std::max(peak, v);
            }
        const double floor = 0.02 * peak;
        double total = 0.0;
        for (double& v : surf.values) {
            v += floor;
            total += v;
        }
        for (double& v : surf.values) v /= total;
        s.surfaces[g] = std::move(surf);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Observers and fixation sampling.
// ---------------------------------------------------------------------------

struct ObserverProfile {
    std::string id;
    AgeGroup group = AgeGroup::Adults;
    double center_strength = 0.0;   // alpha in [0,1]: pull toward the image center
    double foreground_pref = 0.0;   // beta: positive favors near, negative far
    double explorativeness = 1.0;   // tau > 0: higher flattens the density
    int n_fixations = 20;
    std::uint64_t seed = 0;
};

// Fixation density: surface^(1/tau) * center^(kappa*alpha) * near^max(beta,0)
// * far^max(-beta,0), sampled by inverse CDF over the flattened grid.
inline std::vector<FixationRecord> sample_fixations(const SynthStimulus& stimulus,
                                                    const ObserverProfile& profile,
                                                    const std::string& image_id) {
    if (!(profile.explorativeness > 0.0))
        throw ArgumentError("sample_fixations: explorativeness must be > 0");
    if (!(profile.center_strength >= 0.0 && profile.center_strength <= 1.0))
        throw ArgumentError("sample_fixations: center strength must lie in [0,1]");
    if (profile.n_fixations < 1)
        throw ArgumentError("sample_fixations: need at least one fixation");

    const int w = stimulus.image.width, h = stimulus.image.height;
    const ScalarMap& surface = stimulus.surfaces[index_of(profile.group)];
    const double ccx = (w - 1) / 2.0, ccy = (h - 1) / 2.0;
    const double center_sigma = std::min(w, h) / 4.0;
    const double center_exp = kCenterExponent * profile.center_strength;
    const double near_exp = std::max(profile.foreground_pref, 0.0);
    const double far_exp = std::max(-profile.foreground_pref, 0.0);
    const double inv_tau = 1.0 / profile.explorativeness;

    std::vector<double> cdf(static_cast<std::size_t>(w) * h);
    double total = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            double d = std::pow(surface.values[i], inv_tau);
            if (center_exp > 0.0) {
                const double c = std::exp(-((x - ccx) * (x - ccx) + (y - ccy) * (y - ccy)) /
                                          (2.0 * center_sigma * center_sigma));
                d *= std::pow(c, center_exp);
            }
            const double depth = stimulus.depth.values[i];
            const double nearness = kDepthFloor + (1.0 - kDepthFloor) * (1.0 - depth);
            const double farness = kDepthFloor + (1.0 - kDepthFloor) * depth;
            if (near_exp > 0.0) d *= std::pow(nearness, near_exp);
            if (far_exp > 0.0) d *= std::pow(farness, far_exp);
            total += d;
            cdf[i] = total;
        }
    if (!(total > 0.0)) throw ArgumentError("sample_fixations: density vanished");

    std::mt19937_64 rng(derive_seed(derive_seed(profile.seed, image_id), "fixations"));
    std::vector<FixationRecord> out;
    out.reserve(profile.n_fixations);
    for (int i = 0; i < profile.n_fixations; ++i) {
        const double u = detail::uniform01(rng) * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t idx =
            std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        FixationRecord f;
        f.observer_id = profile.id;
        f.group = profile.group;
        f.image_id = image_id;
        f.index = i;
        f.x = static_cast<int>(idx % w);
        f.y = static_cast<int>(idx / w);
        f.duration_ms = 120.0 + 280.0 * detail::uniform01(rng);
        out.push_back(std::move(f));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cohorts.
// ---------------------------------------------------------------------------

struct CohortOptions {
    std::array<int, 3> n_observers = {18, 23, 17};  // children, adults, elderly
    int n_images = 8;
    int n_fixations = 20;
    StimulusOptions stimulus;
    // group-level behavior (children, adults, elderly)
    std::array<double, 3> center_strength = {0.6, 0.1, 0.3};
    std::array<double, 3> foreground_pref = {0.7, 0.0, -0.3};
    std::array<double, 3> explorativeness = {0.6, 2.0, 1.1};
    double jitter = 0.1;  // per-observer spread around the group values
    std::uint64_t seed = 0;
};

struct SynthCohort {
    GazeDataset dataset;                  // paths are relative until written
    std::vector<SynthStimulus> stimuli;   // parallel to dataset.images
};

inline SynthCohort generate_cohort(const CohortOptions& opt = {}) {
    if (opt.n_images < 1) throw ArgumentError("generate_cohort: need at least one image");
    for (int n : opt.n_observers)
        if (n < 1) throw ArgumentError("generate_cohort: each group needs observers");

    SynthCohort cohort;
    for (int i = 0; i < opt.n_images; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "img_%03d", i);
        StimulusOptions sopt = opt.stimulus;
        sopt.category = kCategories[i % kCategories.size()];
        cohort.stimuli.push_back(generate_stimulus(derive_seed(opt.seed, id), sopt));

        ImageInfo info;
        info.id = id;
        info.raster_path = std::string("stimuli/") + id + ".png";
        info.width = sopt.width;
        info.height = sopt.height;
        info.category = sopt.category;
        info.depth_path = std::string("depth/") + id + ".png";
        info.mask_path = std::string("masks/") + id + ".pgm";
        cohort.dataset.images.push_back(std::move(info));
    }

    const std::array<char, 3> prefix = {'c', 'a', 'e'};
    for (int g = 0; g < 3; ++g) {
        for (int k = 0; k < opt.n_observers[g]; ++k) {
            char oid[16];
            std::snprintf(oid, sizeof oid, "%c%03d", prefix[g], k);
            std::mt19937_64 jrng(derive_seed(derive_seed(opt.seed, oid), "profile"));
            ObserverProfile p;
            p.id = oid;
            p.group = static_cast<AgeGroup>(g);
            p.center_strength = std::clamp(
                opt.center_strength[g] * std::exp(opt.jitter * detail::normal01(jrng)), 0.0,
                1.0);
            p.foreground_pref = opt.foreground_pref[g] + opt.jitter * detail::normal01(jrng);
            p.explorativeness =
                opt.explorativeness[g] * std::exp(opt.jitter * detail::normal01(jrng));
            p.n_fixations = opt.n_fixations;
            p.seed = derive_seed(opt.seed, oid);

            cohort.dataset.observers.push_back({p.id, p.group});
            for (std::size_t i = 0; i < cohort.stimuli.size(); ++i) {
                auto fix = sample_fixations(cohort.stimuli[i], p,
                                            cohort.dataset.images[i].id);
                cohort.dataset.fixations.insert(cohort.dataset.fixations.end(), fix.begin(),
                                                fix.end());
            }
        }
    }
    return cohort;
}

// Writes stimuli, depth maps, masks, the fixation table, and the manifest so
// the cohort round-trips through the normal loading path.
inline void write_cohort(const SynthCohort& cohort, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "stimuli");
    fs::create_directories(fs::path(dir) / "depth");
    fs::create_directories(fs::path(dir) / "masks");

    for (std::size_t i = 0; i < cohort.stimuli.size(); ++i) {
        const auto& info = cohort.dataset.images[i];
        const auto& s = cohort.stimuli[i];
        write_png_rgb8(fs::path(dir) / info.raster_path, s.image);
        write_map_png(fs::path(dir) / *info.depth_path, s.depth);
        write_mask_pgm(fs::path(dir) / *info.mask_path, s.image.width, s.image.height,
                       s.mask);
    }
    write_fixation_csv(fs::path(dir) / "fixations.csv", cohort.dataset.fixations);
    save_manifest(fs::path(dir) / "manifest.json", cohort.dataset, "fixations.csv");
}

}  // namespace agaze
