#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "agaze/gaze_data.hpp"
#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

// ROC-AUC scoring of a saliency map against fixation pixels, plus the exact
// pairwise oracle it is tested against.
//
// The score is the Mann-Whitney statistic
//   P(sal(pos) > sal(neg)) + 0.5 * P(sal(pos) == sal(neg)),
// so it is invariant under strictly increasing transforms of the map and a
// constant map scores exactly 0.5. Multiple fixations on one pixel count
// once (set semantics).

namespace agaze {

struct AucScore {
    double value = 0.0;
    std::size_t n_positives = 0;
    std::size_t n_negatives = 0;
};

// Negative-pixel sampling policies. AllNonFixated is the default evaluation
// variant; UniformSample exists for sensitivity analysis.
struct AllNonFixated {};
struct UniformSample {
    std::size_t count = 0;
    std::uint64_t seed = 0;
};
struct ExplicitNegatives {
    std::vector<PixelCoord> pixels;
};
using NegativePolicy = std::variant<AllNonFixated, UniformSample, ExplicitNegatives>;

namespace detail {

inline std::size_t pixel_index(const ScalarMap& map, const PixelCoord& p) {
    if (!map.in_bounds(p.x, p.y))
        throw ArgumentError("pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                            ") outside map");
    return static_cast<std::size_t>(p.y) * map.width + p.x;
}

// Deduplicated pixel indices.
inline std::vector<std::size_t> unique_pixel_indices(const ScalarMap& map,
                                                     const std::vector<PixelCoord>& pixels) {
    std::vector<std::size_t> idx;
    idx.reserve(pixels.size());
    for (const auto& p : pixels) idx.push_back(pixel_index(map, p));
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

// Sum over positives of (#neg below) + 0.5 * (#neg tied), with `neg_sorted`
// ascending. Counts are exact; the accumulator only ever adds half-integers.
inline double rank_pair_sum(const std::vector<double>& pos, const std::vector<double>& neg_sorted) {
    double sum = 0.0;
    for (double p : pos) {
        const auto lo = std::lower_bound(neg_sorted.begin(), neg_sorted.end(), p);
        const auto hi = std::upper_bound(lo, neg_sorted.end(), p);
        const auto below = static_cast<double>(lo - neg_sorted.begin());
        const auto tied = static_cast<double>(hi - lo);
        sum += below + 0.5 * tied;
    }
    return sum;
}

}  // namespace detail

// Exact pairwise AUC: (#{(p,n): s(p) > s(n)} + 0.5 * #ties) / (|P| * |N|).
// Test oracle; O(|P|*|N|).
inline AucScore auc_bruteforce(const ScalarMap& map, const std::vector<PixelCoord>& positives,
                               const std::vector<PixelCoord>& negatives) {
    if (positives.empty() || negatives.empty())
        throw ArgumentError("auc_bruteforce: positive and negative lists must be nonempty");
    const auto pos = detail::unique_pixel_indices(map, positives);
    std::vector<std::size_t> neg;
    neg.reserve(negatives.size());
    for (const auto& p : negatives) neg.push_back(detail::pixel_index(map, p));

    double sum = 0.0;
    for (std::size_t pi : pos) {
        const double pv = map.values[pi];
        for (std::size_t ni : neg) {
            const double nv = map.values[ni];
            if (pv > nv)
                sum += 1.0;
            else if (pv == nv)
                sum += 0.5;
        }
    }
    AucScore score;
    score.n_positives = pos.size();
    score.n_negatives = neg.size();
    score.value = sum / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    return score;
}

// Fast AUC via a sweep over sorted saliency values. Equals auc_bruteforce on
// the same positive/negative sets.
inline AucScore auc_score(const ScalarMap& map, const std::vector<PixelCoord>& positives,
                          const NegativePolicy& policy = AllNonFixated{}) {
    if (positives.empty()) throw ArgumentError("auc_score: no positive pixels (undefined score)");
    const auto pos_idx = detail::unique_pixel_indices(map, positives);

    std::vector<double> pos_vals;
    pos_vals.reserve(pos_idx.size());
    for (std::size_t i : pos_idx) pos_vals.push_back(map.values[i]);

    std::vector<double> neg_vals;
    if (std::holds_alternative<AllNonFixated>(policy) ||
        std::holds_alternative<UniformSample>(policy)) {
        std::vector<char> is_pos(map.size(), 0);
        for (std::size_t i : pos_idx) is_pos[i] = 1;
        std::vector<std::size_t> neg_idx;
        neg_idx.reserve(map.size() - pos_idx.size());
        for (std::size_t i = 0; i < map.size(); ++i)
            if (!is_pos[i]) neg_idx.push_back(i);
        if (const auto* us = std::get_if<UniformSample>(&policy)) {
            if (us->count == 0) throw ArgumentError("auc_score: UniformSample count must be >= 1");
            if (us->count < neg_idx.size()) {
                std::mt19937_64 rng(us->seed);
                std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
                neg_idx.resize(us->count);
            }
        }
        neg_vals.reserve(neg_idx.size());
        for (std::size_t i : neg_idx) neg_vals.push_back(map.values[i]);
    } else {
        const auto& ex = std::get<ExplicitNegatives>(policy);
        neg_vals.reserve(ex.pixels.size());
        for (const auto& p : ex.pixels) neg_vals.push_back(map.values[detail::pixel_index(map, p)]);
    }
    if (neg_vals.empty()) throw ArgumentError("auc_score: no negative pixels");

    std::sort(neg_vals.begin(), neg_vals.end());
    AucScore score;
    score.n_positives = pos_vals.size();
    score.n_negatives = neg_vals.size();
    score.value = detail::rank_pair_sum(pos_vals, neg_vals) /
                  (static_cast<double>(pos_vals.size()) * static_cast<double>(neg_vals.size()));
    return score;
}

// Fixation records -> scoring pixels. The optional flag drops each trial's
// first (index 0) fixation, which is anchored at the pre-trial marker in
// some recording protocols.
inline std::vector<PixelCoord> fixation_pixels(const std::vector<FixationRecord>& fixations,
                                               bool drop_first = false) {
    std::vector<PixelCoord> out;
    out.reserve(fixations.size());
    for (const auto& f : fixations) {
        if (drop_first && f.index == 0) continue;
        out.push_back({f.x, f.y});
    }
    return out;
}

}  // namespace agaze
