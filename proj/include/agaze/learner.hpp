#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "agaze/features.hpp"
#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

// Per-group linear saliency model: strong positive/negative pixels sampled
// from human saliency maps, a hinge-loss linear classifier fit by full-batch
// subgradient descent with a monotone line search, and prediction as the
// min-max normalized linear response, optionally blended with a center prior.

namespace agaze {

inline constexpr double kDefaultLambda = 1e-3;
inline constexpr int kDefaultEpochs = 200;
inline constexpr int kDefaultSamplesPerImage = 10;
inline constexpr double kPositiveTopPct = 5.0;
inline constexpr double kNegativeBottomPct = 20.0;

// blend weight of the center prior per group (children, adults, elderly)
inline constexpr std::array<double, 3> kDefaultCenterAlpha = {0.3, 0.1, 0.2};

struct TrainingSample {
    std::vector<double> features;
    int label = 0;  // +1 or -1
};

// ---------------------------------------------------------------------------
// Pixel sampling.
// ---------------------------------------------------------------------------

struct SampleOptions {
    int n_positive = kDefaultSamplesPerImage;
    int n_negative = kDefaultSamplesPerImage;
    double top_pct = kPositiveTopPct;        // positives come from this top slice
    double bottom_pct = kNegativeBottomPct;  // negatives from this bottom slice
    std::uint64_t seed = 0;
};

// Draws strong positives from the top slice of the target map and strong
// negatives from the bottom slice, uniformly without replacement. When a
// slice holds fewer candidates than requested, all of them are taken and a
// note is appended to `log`.
inline std::vector<TrainingSample> sample_pixels(const FeatureTensor& tensor,
                                                 const ScalarMap& target,
                                                 const SampleOptions& opt = {},
                                                 std::vector<std::string>* log = nullptr) {
    if (target.width != tensor.width || target.height != tensor.height)
        throw ArgumentError("sample_pixels: target map does not match tensor");
    if (opt.n_positive < 1 || opt.n_negative < 1)
        throw ArgumentError("sample_pixels: sample counts must be >= 1");
    const std::size_t total = target.size();

    std::vector<double> sorted(target.values);
    std::sort(sorted.begin(), sorted.end());
    auto slice_count = [&](double pct) {
        auto n = static_cast<std::size_t>(std::llround(pct / 100.0 * total));
        return std::clamp<std::size_t>(n, 1, total);
    };
    const double pos_threshold = sorted[total - slice_count(opt.top_pct)];
    const double neg_threshold = sorted[slice_count(opt.bottom_pct) - 1];

    std::vector<std::size_t> pos_candidates, neg_candidates;
    for (std::size_t i = 0; i < total; ++i) {
        if (target.values[i] >= pos_threshold) pos_candidates.push_back(i);
        if (target.values[i] <= neg_threshold) neg_candidates.push_back(i);
    }

    std::mt19937_64 rng(derive_seed(opt.seed, "pixel-sampling"));
    auto draw = [&](std::vector<std::size_t>& candidates, std::size_t want, const char* which) {
        std::shuffle(candidates.begin(), candidates.end(), rng);
        if (candidates.size() < want) {
            if (log)
                log->push_back(std::string("short ") + which + " slice: " +
                               std::to_string(candidates.size()) + " of " +
                               std::to_string(want));
            want = candidates.size();
        }
        candidates.resize(want);
    };
    draw(pos_candidates, static_cast<std::size_t>(opt.n_positive), "positive");
    draw(neg_candidates, static_cast<std::size_t>(opt.n_negative), "negative");

    std::vector<TrainingSample> samples;
    samples.reserve(pos_candidates.size() + neg_candidates.size());
    auto emit = [&](const std::vector<std::size_t>& idx, int label) {
        for (std::size_t i : idx) {
            const int x = static_cast<int>(i % tensor.width);
            const int y = static_cast<int>(i / tensor.width);
            samples.push_back({tensor.feature_at(x, y), label});
        }
    };
    emit(pos_candidates, +1);
    emit(neg_candidates, -1);
    return samples;
}

// ---------------------------------------------------------------------------
// Model.
// ---------------------------------------------------------------------------

struct AgeModel {
    AgeGroup group = AgeGroup::Adults;
    ChannelManifest manifest;  // exactly the channels the model was fit on
    std::vector<std::string> channel_names;
    std::uint64_t manifest_hash = 0;
    std::vector<double> weights;  // in standardized feature space
    double bias = 0.0;
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
    double center_alpha = 0.0;

    // weights folded back into raw feature space
    std::vector<double> effective_weights() const {
        std::vector<double> w(weights.size());
        for (std::size_t c = 0; c < w.size(); ++c) w[c] = weights[c] / feature_std[c];
        return w;
    }

    double effective_bias() const {
        double b = bias;
        for (std::size_t c = 0; c < weights.size(); ++c)
            b -= weights[c] * feature_mean[c] / feature_std[c];
        return b;
    }
};

struct TrainDiagnostics {
    std::vector<double> epoch_losses;  // objective after each epoch's step
    double final_loss = 0.0;
    double train_accuracy = 0.0;
    int epochs_run = 0;
};

struct TrainOptions {
    double lambda = kDefaultLambda;
    int epochs = kDefaultEpochs;
};

namespace detail {

inline double hinge_objective(const std::vector<TrainingSample>& samples,
                              const std::vector<double>& w, double b, double lambda) {
    double hinge = 0.0;
    for (const auto& s : samples) {
        double margin = b;
        for (std::size_t c = 0; c < w.size(); ++c) margin += w[c] * s.features[c];
        hinge += std::max(0.0, 1.0 - s.label * margin);
    }
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return lambda * reg + hinge / static_cast<double>(samples.size());
}

}  // namespace detail

// Fits a linear classifier on standardized features by full-batch subgradient
// descent. Each epoch's step is halved until the objective does not increase,
// so the recorded loss sequence is non-increasing.
inline AgeModel train(const std::vector<TrainingSample>& samples,
                      const ChannelManifest& manifest, AgeGroup group,
                      const TrainOptions& opt = {}, TrainDiagnostics* diag = nullptr) {
    if (samples.size() < 2) throw ArgumentError("train: need at least two samples");
    const std::size_t dim = manifest.channels.size();
    bool has_pos = false, has_neg = false;
    for (const auto& s : samples) {
        if (s.features.size() != dim)
            throw ArgumentError("train: sample dimensionality does not match channel list");
        if (s.label == 1) has_pos = true;
        else if (s.label == -1) has_neg = true;
        else throw ArgumentError("train: labels must be +1 or -1");
        for (double v : s.features)
            if (!std::isfinite(v)) throw ArgumentError("train: non-finite feature value");
    }
    if (!has_pos || !has_neg)
        throw ArgumentError("train: both classes must be present");
    if (!(opt.lambda >= 0.0) || opt.epochs < 1)
        throw ArgumentError("train: bad lambda or epoch count");

    AgeModel model;
    model.group = group;
    model.manifest = manifest;
    for (const auto& c : manifest.channels) model.channel_names.push_back(c.name);
    model.manifest_hash = manifest.hash();
    model.center_alpha = kDefaultCenterAlpha[index_of(group)];
    model.feature_mean.assign(dim, 0.0);
    model.feature_std.assign(dim, 0.0);

    const double n = static_cast<double>(samples.size());
    for (const auto& s : samples)
        for (std::size_t c = 0; c < dim; ++c) model.feature_mean[c] += s.features[c];
    for (std::size_t c = 0; c < dim; ++c) model.feature_mean[c] /= n;
    for (const auto& s : samples)
        for (std::size_t c = 0; c < dim; ++c) {
            const double d = s.features[c] - model.feature_mean[c];
            model.feature_std[c] += d * d;
        }
    for (std::size_t c = 0; c < dim; ++c) {
        model.feature_std[c] = std::sqrt(model.feature_std[c] / n);
        if (model.feature_std[c] == 0.0) model.feature_std[c] = 1.0;  // constant channel
    }

    std::vector<TrainingSample> std_samples = samples;
    for (auto& s : std_samples)
        for (std::size_t c = 0; c < dim; ++c)
            s.features[c] = (s.features[c] - model.feature_mean[c]) / model.feature_std[c];

    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    double loss = detail::hinge_objective(std_samples, w, b, opt.lambda);
    double step = 1.0;
    TrainDiagnostics local;
    TrainDiagnostics& d = diag ? *diag : local;
    d = {};

    std::vector<double> grad(dim);
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (const auto& s : std_samples) {
            double margin = b;
            for (std::size_t c = 0; c < dim; ++c) margin += w[c] * s.features[c];
            if (s.label * margin < 1.0) {
                for (std::size_t c = 0; c < dim; ++c) grad[c] -= s.label * s.features[c];
                grad_b -= s.label;
            }
        }
        for (std::size_t c = 0; c < dim; ++c)
            grad[c] = grad[c] / n + 2.0 * opt.lambda * w[c];
        grad_b /= n;

        bool moved = false;
        double eta = step;
        std::vector<double> w_try(dim);
        while (eta > 1e-12) {
            for (std::size_t c = 0; c < dim; ++c) w_try[c] = w[c] - eta * grad[c];
            const double b_try = b - eta * grad_b;
            const double loss_try = detail::hinge_objective(std_samples, w_try, b_try, opt.lambda);
            if (loss_try <= loss) {
                w = w_try;
                b = b_try;
                loss = loss_try;
                step = std::min(1.0, eta * 2.0);
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        d.epoch_losses.push_back(loss);
        d.epochs_run = epoch + 1;
        if (!moved) break;  // no descent direction at any step size
    }

    d.final_loss = loss;
    std::size_t correct = 0;
    for (const auto& s : std_samples) {
        double margin = b;
        for (std::size_t c = 0; c < dim; ++c) margin += w[c] * s.features[c];
        if ((margin >= 0.0 ? 1 : -1) == s.label) ++correct;
    }
    d.train_accuracy = static_cast<double>(correct) / n;

    model.weights = std::move(w);
    model.bias = b;
    return model;
}

// ---------------------------------------------------------------------------
// Prediction.
// ---------------------------------------------------------------------------

inline void require_manifest(const AgeModel& model, const ChannelManifest& manifest) {
    if (manifest.hash() != model.manifest_hash)
        throw ValidationError("model was trained against a different channel manifest");
}

// Raw linear response w.f + b over the tensor.
inline ScalarMap predict_raw(const AgeModel& model, const FeatureTensor& tensor) {
    if (tensor.channel_names != model.channel_names)
        throw ValidationError("feature tensor channels do not match the model");
    const auto w = model.effective_weights();
    const double b = model.effective_bias();
    ScalarMap out(tensor.width, tensor.height, ScalarMap::Kind::Counts);
    for (std::size_t c = 0; c < w.size(); ++c) {
        const double* plane = tensor.plane(c);
        for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += w[c] * plane[i];
    }
    for (double& v : out.values) v += b;
    return out;
}

// Min-max normalized response; a constant response yields an all-zero map
// flagged degenerate.
inline ScalarMap predict(const AgeModel& model, const FeatureTensor& tensor) {
    return minmax_normalized(predict_raw(model, tensor));
}

// (1 - alpha) * prediction + alpha * center prior, max-normalized.
inline ScalarMap blend_center(const ScalarMap& prediction, const ScalarMap& center,
                              double alpha) {
    if (!prediction.same_shape(center))
        throw ArgumentError("blend_center: shape mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ArgumentError("blend_center: alpha must lie in [0,1]");
    ScalarMap out(prediction.width, prediction.height, ScalarMap::Kind::Counts);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = (1.0 - alpha) * prediction.values[i] + alpha * center.values[i];
    return max_normalized(out);
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

inline nlohmann::json model_to_json(const AgeModel& model) {
    nlohmann::json j;
    j["format"] = "agaze-model/1";
    j["group"] = to_string(model.group);
    j["manifest"] = manifest_to_json(model.manifest);
    j["manifest_hash"] = model.manifest_hash;
    j["weights"] = model.weights;
    j["bias"] = model.bias;
    j["feature_mean"] = model.feature_mean;
    j["feature_std"] = model.feature_std;
    j["center_alpha"] = model.center_alpha;
    return j;
}

inline AgeModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "agaze-model/1")
        throw ParseError("model file: unknown format tag");
    AgeModel m;
    m.group = parse_age_group(j.at("group").get<std::string>());
    m.manifest = manifest_from_json(j.at("manifest"));
    for (const auto& c : m.manifest.channels) m.channel_names.push_back(c.name);
    m.manifest_hash = j.at("manifest_hash").get<std::uint64_t>();
    if (m.manifest.hash() != m.manifest_hash)
        throw ValidationError("model file: manifest hash does not match its channel list");
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_std = j.at("feature_std").get<std::vector<double>>();
    m.center_alpha = j.at("center_alpha").get<double>();
    const std::size_t dim = m.channel_names.size();
    if (m.weights.size() != dim || m.feature_mean.size() != dim || m.feature_std.size() != dim)
        throw ValidationError("model file: inconsistent dimensions");
    return m;
}

inline void save_model(const std::string& path, const AgeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file '" + path + "'");
    out << model_to_json(model).dump(2) << '\n';
}

inline AgeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read model file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace agaze
