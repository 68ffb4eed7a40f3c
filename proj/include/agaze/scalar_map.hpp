#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "agaze/types.hpp"

namespace agaze {

// Single-channel float raster. Carrier of all fixation / saliency / feature
// maps. Counts maps hold nonnegative accumulators; Normalized maps hold
// values in [0,1] with max value 1 whenever any value is positive.
struct ScalarMap {
    enum class Kind { Counts, Normalized };

    int width = 0;
    int height = 0;
    Kind kind = Kind::Counts;
    // Set by operations whose output is structurally valid but carries no
    // usable signal (all-zero smoothing input, constant prediction, ...).
    bool degenerate = false;
    std::vector<double> values;  // row-major, y*width + x

    ScalarMap() = default;
    ScalarMap(int w, int h, Kind k = Kind::Counts)
        : width(w), height(h), kind(k), values(static_cast<std::size_t>(w) * h, 0.0) {
        if (w <= 0 || h <= 0) throw ArgumentError("ScalarMap dimensions must be positive");
    }

    std::size_t size() const { return values.size(); }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

    bool same_shape(const ScalarMap& o) const { return width == o.width && height == o.height; }

    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }

    double max_value() const {
        double m = 0.0;
        bool first = true;
        for (double v : values) {
            if (first || v > m) m = v, first = false;
        }
        return values.empty() ? 0.0 : m;
    }

    double min_value() const {
        double m = 0.0;
        bool first = true;
        for (double v : values) {
            if (first || v < m) m = v, first = false;
        }
        return values.empty() ? 0.0 : m;
    }

    std::size_t argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] > values[best]) best = i;
        return best;
    }
};

// Divides by the max value. All-zero input comes back all-zero with the
// degenerate flag set.
inline ScalarMap max_normalized(const ScalarMap& in) {
    ScalarMap out = in;
    out.kind = ScalarMap::Kind::Normalized;
    const double m = in.max_value();
    if (m <= 0.0) {
        std::fill(out.values.begin(), out.values.end(), 0.0);
        out.degenerate = true;
        return out;
    }
    for (double& v : out.values) v /= m;
    out.degenerate = false;
    return out;
}

// Min-max rescale to [0,1]. A constant input has no ordering to preserve;
// it is returned as all-zero and flagged.
inline ScalarMap minmax_normalized(const ScalarMap& in) {
    ScalarMap out = in;
    out.kind = ScalarMap::Kind::Normalized;
    const double lo = in.min_value();
    const double hi = in.max_value();
    if (!(hi > lo)) {
        std::fill(out.values.begin(), out.values.end(), 0.0);
        out.degenerate = true;
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (double& v : out.values) v = (v - lo) * inv;
    out.degenerate = false;
    return out;
}

// Pixelwise mean of equally shaped maps.
inline ScalarMap mean_of(const std::vector<const ScalarMap*>& maps) {
    if (maps.empty()) throw ArgumentError("mean_of: empty map list");
    const ScalarMap& first = *maps.front();
    ScalarMap out(first.width, first.height, ScalarMap::Kind::Counts);
    for (const ScalarMap* m : maps) {
        if (!m->same_shape(first)) throw ArgumentError("mean_of: dimension mismatch");
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += m->values[i];
    }
    const double inv = 1.0 / static_cast<double>(maps.size());
    for (double& v : out.values) v *= inv;
    return out;
}

// Intensity-weighted mean pixel position. Undefined for all-zero maps.
inline void centroid(const ScalarMap& m, double& cx, double& cy) {
    double sx = 0.0, sy = 0.0, mass = 0.0;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const double v = m.at(x, y);
            sx += v * x;
            sy += v * y;
            mass += v;
        }
    }
    if (mass <= 0.0) throw ArgumentError("centroid: map has no mass");
    cx = sx / mass;
    cy = sy / mass;
}

}  // namespace agaze
