#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "agaze/gaze_data.hpp"
#include "agaze/image_io.hpp"
#include "agaze/maps.hpp"
#include "agaze/roc.hpp"
#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

// Age-analysis measures: explorativeness entropy, depth bias over thresholded
// salient regions, inter-individual similarity, center bias, and the
// split-half upper performance limit.

namespace agaze {

// ---------------------------------------------------------------------------
// Explorativeness.
// ---------------------------------------------------------------------------

inline constexpr int kDefaultEntropyBins = 256;

// First-order entropy of a saliency map:
//   H = sum_l h(l) * log2(L / h(l))
// where h(l) counts pixels whose intensity quantizes to bin l and L is the
// total pixel count. Reported in bits. A constant map scores 0.
inline double explorativeness_entropy(const ScalarMap& map, int n_bins = kDefaultEntropyBins) {
    if (n_bins < 2) throw ArgumentError("explorativeness_entropy: n_bins must be >= 2");
    if (map.size() == 0) throw ArgumentError("explorativeness_entropy: empty map");

    std::vector<std::size_t> hist(static_cast<std::size_t>(n_bins), 0);
    for (double v : map.values) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ArgumentError("explorativeness_entropy: map values must lie in [0,1]");
        int bin = static_cast<int>(v * n_bins);
        if (bin >= n_bins) bin = n_bins - 1;
        ++hist[bin];
    }
    const double total = static_cast<double>(map.size());
    double H = 0.0;
    for (std::size_t h : hist) {
        if (h == 0) continue;
        H += static_cast<double>(h) * std::log2(total / static_cast<double>(h));
    }
    return H;
}

// ---------------------------------------------------------------------------
// Thresholded salient regions (foreground / background labeling).
// ---------------------------------------------------------------------------

enum class RegionLabel : int { Unlabeled = 0, Foreground = 1, Background = 2 };

struct SalientRegion {
    std::vector<std::size_t> pixels;  // indices into the map
    RegionLabel label = RegionLabel::Unlabeled;
};

struct SalientRegionSet {
    int width = 0;
    int height = 0;
    std::vector<SalientRegion> regions;
    // Per-pixel label: -1 below threshold, otherwise the region's label value.
    std::vector<std::int8_t> label_map;
    bool degenerate = false;  // constant map; selection fell back to scan order

    RegionLabel label_at(int x, int y) const {
        const std::int8_t v = label_map[static_cast<std::size_t>(y) * width + x];
        if (v < 0) throw ArgumentError("label_at: pixel below threshold");
        return static_cast<RegionLabel>(v);
    }

    bool selected(int x, int y) const {
        return label_map[static_cast<std::size_t>(y) * width + x] >= 0;
    }
};

// Selects the top t_pct percent of pixels by value (ties broken by scan
// order), forms 8-connected components, and assigns each component the
// majority label of the mask pixels it covers. Components whose mask pixels
// are all unlabeled (or tie exactly) stay Unlabeled.
inline SalientRegionSet threshold_salient_regions(const ScalarMap& combined, double t_pct,
                                                  const std::vector<std::uint8_t>& mask) {
    if (!(t_pct > 0.0 && t_pct < 100.0))
        throw ArgumentError("threshold_salient_regions: t_pct must be in (0,100)");
    if (mask.size() != combined.size())
        throw ArgumentError("threshold_salient_regions: mask dimensions do not match map");

    const std::size_t total = combined.size();
    std::size_t n_sel = static_cast<std::size_t>(std::llround(t_pct / 100.0 * total));
    if (n_sel < 1) n_sel = 1;
    if (n_sel > total) n_sel = total;

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return combined.values[a] > combined.values[b];
    });

    SalientRegionSet set;
    set.width = combined.width;
    set.height = combined.height;
    set.label_map.assign(total, -1);
    set.degenerate = combined.max_value() == combined.min_value();

    std::vector<char> selected(total, 0);
    for (std::size_t k = 0; k < n_sel; ++k) selected[order[k]] = 1;

    // 8-connected components over the selected set.
    std::vector<char> visited(total, 0);
    for (std::size_t start = 0; start < total; ++start) {
        if (!selected[start] || visited[start]) continue;
        SalientRegion region;
        std::deque<std::size_t> queue{start};
        visited[start] = 1;
        while (!queue.empty()) {
            const std::size_t i = queue.front();
            queue.pop_front();
            region.pixels.push_back(i);
            const int x = static_cast<int>(i % combined.width);
            const int y = static_cast<int>(i / combined.width);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (!combined.in_bounds(nx, ny)) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny) * combined.width + nx;
                    if (selected[ni] && !visited[ni]) {
                        visited[ni] = 1;
                        queue.push_back(ni);
                    }
                }
            }
        }
        std::size_t n_fg = 0, n_bg = 0;
        for (std::size_t i : region.pixels) {
            if (mask[i] == 1) ++n_fg;
            if (mask[i] == 2) ++n_bg;
        }
        if (n_fg > n_bg)
            region.label = RegionLabel::Foreground;
        else if (n_bg > n_fg)
            region.label = RegionLabel::Background;
        else
            region.label = RegionLabel::Unlabeled;
        for (std::size_t i : region.pixels)
            set.label_map[i] = static_cast<std::int8_t>(region.label);
        set.regions.push_back(std::move(region));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Depth bias.
// ---------------------------------------------------------------------------

// Percentage of one fixation list landing on foreground / background labeled
// salient regions.
inline std::pair<double, double> depth_bias_for_image(const SalientRegionSet& regions,
                                                      const std::vector<FixationRecord>& fixations) {
    if (fixations.empty()) throw ArgumentError("depth_bias_for_image: no fixations");
    std::size_t on_fg = 0, on_bg = 0;
    for (const auto& f : fixations) {
        const std::int8_t v = regions.label_map[static_cast<std::size_t>(f.y) * regions.width + f.x];
        if (v == static_cast<std::int8_t>(RegionLabel::Foreground)) ++on_fg;
        if (v == static_cast<std::int8_t>(RegionLabel::Background)) ++on_bg;
    }
    const double n = static_cast<double>(fixations.size());
    return {100.0 * on_fg / n, 100.0 * on_bg / n};
}

struct DepthBiasEntry {
    double foreground_pct = 0.0;
    double background_pct = 0.0;
    int n_images = 0;  // images contributing to the average
};

struct DepthBiasResult {
    // threshold (percent) -> per-group averages
    std::map<double, std::array<DepthBiasEntry, 3>> by_threshold;

    struct ImageRow {
        std::string image_id;
        double threshold = 0.0;
        AgeGroup group = AgeGroup::Children;
        double foreground_pct = 0.0;
        double background_pct = 0.0;
        std::size_t n_fixations = 0;
    };
    std::vector<ImageRow> rows;
    std::vector<std::string> skipped;  // "<image>/<group>" with zero fixations
};

inline constexpr double kDefaultThresholdT1 = 5.0;
inline constexpr double kDefaultThresholdT2 = 10.0;

// Full framework over a dataset: per image, a combined saliency map is
// thresholded at each t and its regions take labels from the image's mask;
// per group, the share of fixations landing on F and B regions is averaged
// over images. Images without a mask are skipped; an image with zero
// fixations for one group is excluded from that group's average only.
inline DepthBiasResult depth_bias(const GazeDataset& dataset,
                                  const std::vector<std::string>& image_ids,
                                  double sigma_px = kDefaultSigmaPx,
                                  std::vector<double> thresholds = {kDefaultThresholdT1,
                                                                    kDefaultThresholdT2}) {
    DepthBiasResult result;
    std::map<double, std::array<std::pair<double, double>, 3>> sums;
    std::map<double, std::array<int, 3>> counts;
    for (double t : thresholds) {
        sums[t] = {};
        counts[t] = {};
    }

    for (const auto& id : image_ids) {
        const ImageInfo& im = dataset.image(id);
        if (!im.mask_path) continue;
        int mw = 0, mh = 0;
        const auto mask = read_mask_pgm(*im.mask_path, mw, mh);
        if (mw != im.width || mh != im.height)
            throw ValidationError("mask for '" + id + "' has wrong dimensions");

        const auto set = build_group_map_set(dataset, id, sigma_px);
        const auto parts = partition_by_group(dataset, id);

        for (double t : thresholds) {
            const auto regions = threshold_salient_regions(set.combined, t, mask);
            for (int g = 0; g < 3; ++g) {
                if (parts[g].empty()) {
                    result.skipped.push_back(id + "/" + to_string(static_cast<AgeGroup>(g)));
                    continue;
                }
                const auto [fg, bg] = depth_bias_for_image(regions, parts[g]);
                sums[t][g].first += fg;
                sums[t][g].second += bg;
                counts[t][g] += 1;
                result.rows.push_back({id, t, static_cast<AgeGroup>(g), fg, bg, parts[g].size()});
            }
        }
    }

    for (double t : thresholds) {
        std::array<DepthBiasEntry, 3> entries;
        for (int g = 0; g < 3; ++g) {
            entries[g].n_images = counts[t][g];
            if (counts[t][g] > 0) {
                entries[g].foreground_pct = sums[t][g].first / counts[t][g];
                entries[g].background_pct = sums[t][g].second / counts[t][g];
            }
        }
        result.by_threshold[t] = entries;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Inter-individual similarity.
// ---------------------------------------------------------------------------

struct SimilarityOptions {
    double sigma_px = kDefaultSigmaPx;
    bool drop_first_fixation = false;
};

struct SimilarityEntry {
    double mean_auc = 0.0;
    int n_observers = 0;
    std::vector<std::pair<std::string, double>> per_observer;  // (observer_id, mean over images)
};

// source group x target group grid of mean AUC.
struct SimilarityMatrix {
    std::array<std::array<SimilarityEntry, 3>, 3> cell;  // [source][target]

    double value(AgeGroup source, AgeGroup target) const {
        return cell[index_of(source)][index_of(target)].mean_auc;
    }
};

namespace detail {

// Per-image pooled fixation bookkeeping for one group, supporting exclusion
// of a single observer (pixel counts, not sets, so shared pixels survive).
struct PooledFixations {
    std::unordered_map<std::size_t, int> pixel_counts;
    std::unordered_map<std::string, std::vector<std::size_t>> per_observer;

    void add(const std::string& observer_id, std::size_t pixel) {
        ++pixel_counts[pixel];
        per_observer[observer_id].push_back(pixel);
    }

    std::vector<std::size_t> pixels_excluding(const std::string& observer_id) const {
        std::unordered_map<std::size_t, int> counts = pixel_counts;
        const auto it = per_observer.find(observer_id);
        if (it != per_observer.end())
            for (std::size_t p : it->second) --counts[p];
        std::vector<std::size_t> out;
        out.reserve(counts.size());
        for (const auto& [pixel, count] : counts)
            if (count > 0) out.push_back(pixel);
        std::sort(out.begin(), out.end());
        return out;
    }
};

inline std::vector<PixelCoord> indices_to_pixels(const std::vector<std::size_t>& idx, int width) {
    std::vector<PixelCoord> out;
    out.reserve(idx.size());
    for (std::size_t i : idx)
        out.push_back({static_cast<int>(i % width), static_cast<int>(i / width)});
    return out;
}

}  // namespace detail

// Mean AUC of each source-group observer's individual saliency map predicting
// the pooled fixations of the target group (excluding the source observer
// when they belong to it), averaged first over images, then over observers.
// Images where the exclusion empties the target pool, or where the source
// observer has no fixations, do not contribute to that observer's average.
inline SimilarityEntry inter_individual_similarity(const GazeDataset& dataset,
                                                   AgeGroup source_group, AgeGroup target_group,
                                                   const std::vector<std::string>& image_ids,
                                                   const SimilarityOptions& opt = {}) {
    const auto source_ids = dataset.observer_ids_in_group(source_group);
    const auto target_ids = dataset.observer_ids_in_group(target_group);
    if (source_ids.empty() || target_ids.empty())
        throw ArgumentError("inter_individual_similarity: empty observer group");

    std::unordered_map<std::string, std::pair<double, int>> acc;  // observer -> (sum, n)
    for (const auto& id : image_ids) {
        const ImageInfo& im = dataset.image(id);
        detail::PooledFixations target_pool;
        std::unordered_map<std::string, std::vector<FixationRecord>> source_fix;
        for (const auto& f : dataset.fixations) {
            if (f.image_id != id) continue;
            if (opt.drop_first_fixation && f.index == 0) continue;
            if (f.group == target_group)
                target_pool.add(f.observer_id, static_cast<std::size_t>(f.y) * im.width + f.x);
            if (f.group == source_group) source_fix[f.observer_id].push_back(f);
        }
        for (const auto& sid : source_ids) {
            const auto it = source_fix.find(sid);
            if (it == source_fix.end()) continue;  // no source map for this image
            const auto pool = target_pool.pixels_excluding(sid);
            if (pool.empty()) continue;  // excluded-self pool empty: skip image
            const auto fixmap = build_fixation_map(it->second, im.width, im.height);
            const auto source_map = build_saliency_map(fixmap, opt.sigma_px);
            const auto score =
                auc_score(source_map, detail::indices_to_pixels(pool, im.width), AllNonFixated{});
            acc[sid].first += score.value;
            acc[sid].second += 1;
        }
    }

    SimilarityEntry entry;
    for (const auto& sid : source_ids) {
        const auto it = acc.find(sid);
        if (it == acc.end() || it->second.second == 0) continue;
        const double mean = it->second.first / it->second.second;
        entry.per_observer.emplace_back(sid, mean);
        entry.mean_auc += mean;
        entry.n_observers += 1;
    }
    if (entry.n_observers == 0)
        throw ArgumentError("inter_individual_similarity: no observer produced a defined score");
    entry.mean_auc /= entry.n_observers;
    return entry;
}

// Full 3x3 grid in one pass: each observer's individual map is built once per
// image and reused against all three target pools. Agrees with cell-by-cell
// inter_individual_similarity.
inline SimilarityMatrix similarity_matrix(const GazeDataset& dataset,
                                          const std::vector<std::string>& image_ids,
                                          const SimilarityOptions& opt = {}) {
    std::array<std::vector<std::string>, 3> group_ids;
    for (AgeGroup g : kAgeGroups) {
        group_ids[index_of(g)] = dataset.observer_ids_in_group(g);
        if (group_ids[index_of(g)].empty())
            throw ArgumentError("similarity_matrix: empty observer group");
    }

    // observer -> per-target (sum, n) accumulators
    std::array<std::unordered_map<std::string, std::pair<double, int>>, 3> acc;

    for (const auto& id : image_ids) {
        const ImageInfo& im = dataset.image(id);
        std::array<detail::PooledFixations, 3> pools;
        std::unordered_map<std::string, std::vector<FixationRecord>> by_observer;
        for (const auto& f : dataset.fixations) {
            if (f.image_id != id) continue;
            if (opt.drop_first_fixation && f.index == 0) continue;
            pools[index_of(f.group)].add(f.observer_id,
                                         static_cast<std::size_t>(f.y) * im.width + f.x);
            by_observer[f.observer_id].push_back(f);
        }
        for (const auto& [oid, records] : by_observer) {
            const auto source_map =
                build_saliency_map(build_fixation_map(records, im.width, im.height), opt.sigma_px);
            for (int t = 0; t < 3; ++t) {
                const auto pool = pools[t].pixels_excluding(oid);
                if (pool.empty()) continue;
                const auto score = auc_score(
                    source_map, detail::indices_to_pixels(pool, im.width), AllNonFixated{});
                auto& slot = acc[t][oid];
                slot.first += score.value;
                slot.second += 1;
            }
        }
    }

    SimilarityMatrix m;
    for (int s = 0; s < 3; ++s) {
        for (int t = 0; t < 3; ++t) {
            SimilarityEntry& entry = m.cell[s][t];
            for (const auto& oid : group_ids[s]) {
                const auto it = acc[t].find(oid);
                if (it == acc[t].end() || it->second.second == 0) continue;
                const double mean = it->second.first / it->second.second;
                entry.per_observer.emplace_back(oid, mean);
                entry.mean_auc += mean;
                entry.n_observers += 1;
            }
            if (entry.n_observers == 0)
                throw ArgumentError("similarity_matrix: a cell has no defined score");
            entry.mean_auc /= entry.n_observers;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Center bias.
// ---------------------------------------------------------------------------

struct CenterBiasResult {
    double centroid_distance_px = 0.0;
    AucScore center_auc;     // mean AUC of the leave-current-image-out center map
    int n_auc_images = 0;    // images contributing to center_auc
    ScalarMap center_map;    // the group's center map over the image set
};

// Center map centroid offset from the image center pixel, plus the mean AUC
// of the group's own center map predicting its fixations with the current
// image's map left out of the average. Requires uniform image dimensions.
inline CenterBiasResult center_bias(const GazeDataset& dataset, AgeGroup group,
                                    const std::vector<std::string>& image_ids,
                                    double sigma_px = kDefaultSigmaPx,
                                    bool drop_first_fixation = false) {
    if (image_ids.empty()) throw ArgumentError("center_bias: empty image set");
    const ImageInfo& first = dataset.image(image_ids.front());
    const int w = first.width, h = first.height;

    std::vector<ScalarMap> maps;
    std::vector<std::vector<FixationRecord>> group_fix;
    maps.reserve(image_ids.size());
    for (const auto& id : image_ids) {
        const ImageInfo& im = dataset.image(id);
        if (im.width != w || im.height != h)
            throw ArgumentError("center_bias: image dimensions differ across the set");
        auto parts = partition_by_group(dataset, id);
        auto& fix = parts[index_of(group)];
        maps.push_back(build_saliency_map(build_fixation_map(fix, w, h), sigma_px));
        group_fix.push_back(std::move(fix));
    }

    CenterBiasResult result;
    result.center_map = build_center_map(maps);
    if (result.center_map.degenerate)
        throw ArgumentError("center_bias: all-zero center map (group has no fixations)");

    double cx = 0.0, cy = 0.0;
    centroid(result.center_map, cx, cy);
    const double ccx = (w - 1) / 2.0, ccy = (h - 1) / 2.0;
    result.centroid_distance_px = std::hypot(cx - ccx, cy - ccy);

    // Leave-current-image-out AUC: sum of per-image maps minus the current one.
    ScalarMap sum_map(w, h, ScalarMap::Kind::Counts);
    for (const auto& m : maps)
        for (std::size_t i = 0; i < sum_map.size(); ++i) sum_map.values[i] += m.values[i];

    double auc_sum = 0.0;
    std::size_t pos_total = 0, neg_total = 0;
    for (std::size_t k = 0; k < maps.size(); ++k) {
        if (group_fix[k].empty()) continue;
        if (maps.size() < 2) continue;
        ScalarMap loo(w, h, ScalarMap::Kind::Counts);
        for (std::size_t i = 0; i < loo.size(); ++i)
            loo.values[i] = sum_map.values[i] - maps[k].values[i];
        const auto loo_norm = max_normalized(loo);
        if (loo_norm.degenerate) continue;
        const auto score = auc_score(
            loo_norm, fixation_pixels(group_fix[k], drop_first_fixation), AllNonFixated{});
        auc_sum += score.value;
        pos_total += score.n_positives;
        neg_total += score.n_negatives;
        result.n_auc_images += 1;
    }
    if (result.n_auc_images > 0) {
        result.center_auc.value = auc_sum / result.n_auc_images;
        result.center_auc.n_positives = pos_total;
        result.center_auc.n_negatives = neg_total;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Upper performance limit.
// ---------------------------------------------------------------------------

struct UplResult {
    struct ImageRow {
        std::string image_id;
        double mean_auc = 0.0;
        int n_valid_reps = 0;
    };
    std::vector<ImageRow> per_image;
    double mean_auc = 0.0;  // over images with at least one valid repetition
    int n_images = 0;
    int n_repetitions = 0;
};

inline constexpr int kDefaultUplRepetitions = 50;

// Split-half agreement: per repetition the group's observers (sorted by id,
// so dataset ordering is irrelevant) are shuffled and halved; a saliency map
// built from the first half's fixations scores the second half's pooled
// fixation pixels. Repetitions where the scoring half has no fixations on
// the image are skipped.
inline UplResult upper_performance_limit(const GazeDataset& dataset, AgeGroup group,
                                         const std::vector<std::string>& image_ids,
                                         int n_reps = kDefaultUplRepetitions,
                                         std::uint64_t seed = 0,
                                         double sigma_px = kDefaultSigmaPx,
                                         bool drop_first_fixation = false) {
    const auto observer_ids = dataset.observer_ids_in_group(group);
    if (observer_ids.size() < 2)
        throw ArgumentError("upper_performance_limit: group needs >= 2 observers");
    if (n_reps < 1) throw ArgumentError("upper_performance_limit: n_reps must be >= 1");

    UplResult result;
    result.n_repetitions = n_reps;

    for (const auto& id : image_ids) {
        const ImageInfo& im = dataset.image(id);
        std::unordered_map<std::string, std::vector<FixationRecord>> by_observer;
        for (const auto& f : dataset.fixations)
            if (f.image_id == id && f.group == group) by_observer[f.observer_id].push_back(f);

        double sum = 0.0;
        int valid = 0;
        for (int rep = 0; rep < n_reps; ++rep) {
            auto ids = observer_ids;
            std::mt19937_64 rng(
                derive_seed(derive_seed(seed, id), static_cast<std::uint64_t>(rep)));
            std::shuffle(ids.begin(), ids.end(), rng);
            const std::size_t half = (ids.size() + 1) / 2;

            std::vector<FixationRecord> first_half;
            std::vector<FixationRecord> second_half;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const auto it = by_observer.find(ids[i]);
                if (it == by_observer.end()) continue;
                auto& dst = (i < half) ? first_half : second_half;
                dst.insert(dst.end(), it->second.begin(), it->second.end());
            }
            const auto targets = fixation_pixels(second_half, drop_first_fixation);
            if (targets.empty()) continue;  // nothing to predict

            const auto predictor = build_saliency_map(
                build_fixation_map(first_half, im.width, im.height), sigma_px);
            sum += auc_score(predictor, targets, AllNonFixated{}).value;
            ++valid;
        }
        if (valid > 0) {
            result.per_image.push_back({id, sum / valid, valid});
            result.mean_auc += sum / valid;
            result.n_images += 1;
        }
    }
    if (result.n_images > 0) result.mean_auc /= result.n_images;
    return result;
}

}  // namespace agaze
