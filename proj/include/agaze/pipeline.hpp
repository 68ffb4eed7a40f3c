#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "agaze/features.hpp"
#include "agaze/gaze_data.hpp"
#include "agaze/learner.hpp"
#include "agaze/maps.hpp"
#include "agaze/metrics.hpp"
#include "agaze/parallel.hpp"
#include "agaze/roc.hpp"
#include "agaze/synth.hpp"
#include "agaze/types.hpp"

// Run configuration and the pipeline stages behind the CLI: ingest, synth,
// maps, metrics, train, predict, eval, report. Every stage is a pure function
// of (config, input files); outputs are deterministic given the seeds.

namespace agaze {

struct RunConfig {
    std::string manifest_path;
    std::string out_dir = "out";
    double sigma_px = kDefaultSigmaPx;
    int entropy_bins = kDefaultEntropyBins;
    double t1 = kDefaultThresholdT1;
    double t2 = kDefaultThresholdT2;
    int upl_repetitions = kDefaultUplRepetitions;
    double train_fraction = 0.625;
    std::uint64_t seed = 0;
    bool drop_first_fixation = false;
    bool weight_by_duration = false;
    bool use_depth = true;  // depth channels when every image carries depth data
    std::array<std::optional<ScaleSelection>, 3> scales;   // per-group override
    std::array<std::optional<double>, 3> center_alpha;     // per-group override
    std::optional<std::string> external_channels_dir;
    std::optional<AgeGroup> only_group;
    std::optional<StimulusCategory> only_category;
    CohortOptions synth;
};

// ---------------------------------------------------------------------------
// Config I/O.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T, std::size_t N>
std::array<T, N> json_array(const nlohmann::json& j, const char* key,
                            const std::array<T, N>& fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != N)
        throw ConfigError(std::string("config: '") + key + "' must be an array of " +
                          std::to_string(N));
    std::array<T, N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = a[i].get<T>();
    return out;
}

}  // namespace detail

inline void validate_config(const RunConfig& cfg) {
    if (!(cfg.sigma_px > 0.0)) throw ConfigError("config: sigma_px must be > 0");
    if (cfg.entropy_bins < 2) throw ConfigError("config: entropy_bins must be >= 2");
    if (!(cfg.t1 > 0.0 && cfg.t2 < 100.0 && cfg.t1 < cfg.t2))
        throw ConfigError("config: thresholds need 0 < t1 < t2 < 100");
    if (cfg.upl_repetitions < 1) throw ConfigError("config: upl_repetitions must be >= 1");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw ConfigError("config: train_fraction must lie in (0,1)");
    for (const auto& s : cfg.scales)
        if (s)
            for (int v : s->scales)
                if (v < 1 || v > kPyramidLevels)
                    throw ConfigError("config: scale selections must lie in 1..3");
    for (const auto& a : cfg.center_alpha)
        if (a && !(*a >= 0.0 && *a <= 1.0))
            throw ConfigError("config: center_alpha must lie in [0,1]");
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.manifest_path = j.value("manifest", cfg.manifest_path);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.sigma_px = j.value("sigma_px", cfg.sigma_px);
    cfg.entropy_bins = j.value("entropy_bins", cfg.entropy_bins);
    cfg.t1 = j.value("t1", cfg.t1);
    cfg.t2 = j.value("t2", cfg.t2);
    cfg.upl_repetitions = j.value("upl_repetitions", cfg.upl_repetitions);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.drop_first_fixation = j.value("drop_first_fixation", cfg.drop_first_fixation);
    cfg.weight_by_duration = j.value("weight_by_duration", cfg.weight_by_duration);
    cfg.use_depth = j.value("use_depth", cfg.use_depth);
    if (j.contains("external_channels_dir"))
        cfg.external_channels_dir = j.at("external_channels_dir").get<std::string>();
    if (j.contains("group")) cfg.only_group = parse_age_group(j.at("group").get<std::string>());
    if (j.contains("category"))
        cfg.only_category = parse_category(j.at("category").get<std::string>());
    if (j.contains("scales")) {
        for (const auto& [key, val] : j.at("scales").items()) {
            ScaleSelection sel;
            sel.scales = val.get<std::vector<int>>();
            std::sort(sel.scales.begin(), sel.scales.end());
            cfg.scales[index_of(parse_age_group(key))] = sel;
        }
    }
    if (j.contains("center_alpha"))
        for (const auto& [key, val] : j.at("center_alpha").items())
            cfg.center_alpha[index_of(parse_age_group(key))] = val.get<double>();
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        cfg.synth.n_observers =
            detail::json_array<int, 3>(s, "n_observers", cfg.synth.n_observers);
        cfg.synth.n_images = s.value("n_images", cfg.synth.n_images);
        cfg.synth.n_fixations = s.value("n_fixations", cfg.synth.n_fixations);
        cfg.synth.center_strength =
            detail::json_array<double, 3>(s, "center_strength", cfg.synth.center_strength);
        cfg.synth.foreground_pref =
            detail::json_array<double, 3>(s, "foreground_pref", cfg.synth.foreground_pref);
        cfg.synth.explorativeness =
            detail::json_array<double, 3>(s, "explorativeness", cfg.synth.explorativeness);
        cfg.synth.jitter = s.value("jitter", cfg.synth.jitter);
        if (s.contains("stimulus")) {
            const auto& st = s.at("stimulus");
            cfg.synth.stimulus.width = st.value("width", cfg.synth.stimulus.width);
            cfg.synth.stimulus.height = st.value("height", cfg.synth.stimulus.height);
            cfg.synth.stimulus.n_blobs = st.value("n_blobs", cfg.synth.stimulus.n_blobs);
            cfg.synth.stimulus.group_distinctness =
                st.value("group_distinctness", cfg.synth.stimulus.group_distinctness);
            cfg.synth.stimulus.noise_amplitude =
                st.value("noise_amplitude", cfg.synth.stimulus.noise_amplitude);
        }
    }
    validate_config(cfg);
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
    return run_config_from_json(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["manifest"] = cfg.manifest_path;
    j["out_dir"] = cfg.out_dir;
    j["sigma_px"] = cfg.sigma_px;
    j["entropy_bins"] = cfg.entropy_bins;
    j["t1"] = cfg.t1;
    j["t2"] = cfg.t2;
    j["upl_repetitions"] = cfg.upl_repetitions;
    j["train_fraction"] = cfg.train_fraction;
    j["seed"] = cfg.seed;
    j["drop_first_fixation"] = cfg.drop_first_fixation;
    j["weight_by_duration"] = cfg.weight_by_duration;
    j["use_depth"] = cfg.use_depth;
    if (cfg.external_channels_dir) j["external_channels_dir"] = *cfg.external_channels_dir;
    if (cfg.only_group) j["group"] = to_string(*cfg.only_group);
    if (cfg.only_category) j["category"] = to_string(*cfg.only_category);
    for (int g = 0; g < 3; ++g) {
        const std::string name = to_string(static_cast<AgeGroup>(g));
        if (cfg.scales[g]) j["scales"][name] = cfg.scales[g]->scales;
        if (cfg.center_alpha[g]) j["center_alpha"][name] = *cfg.center_alpha[g];
    }
    j["synth"] = {{"n_observers", cfg.synth.n_observers},
                  {"n_images", cfg.synth.n_images},
                  {"n_fixations", cfg.synth.n_fixations},
                  {"center_strength", cfg.synth.center_strength},
                  {"foreground_pref", cfg.synth.foreground_pref},
                  {"explorativeness", cfg.synth.explorativeness},
                  {"jitter", cfg.synth.jitter},
                  {"stimulus",
                   {{"width", cfg.synth.stimulus.width},
                    {"height", cfg.synth.stimulus.height},
                    {"n_blobs", cfg.synth.stimulus.n_blobs},
                    {"group_distinctness", cfg.synth.stimulus.group_distinctness},
                    {"noise_amplitude", cfg.synth.stimulus.noise_amplitude}}}};
    return j;
}

// ---------------------------------------------------------------------------
// Shared stage plumbing.
// ---------------------------------------------------------------------------

struct StageResult {
    std::vector<std::string> outputs;  // files this stage produced
};

namespace detail {

inline GazeDataset load_dataset(const RunConfig& cfg) {
    std::string path = cfg.manifest_path;
    if (path.empty()) {
        // a cohort generated by the synth stage in the same out dir just works
        const auto fallback = std::filesystem::path(cfg.out_dir) / "dataset/manifest.json";
        if (std::filesystem::exists(fallback)) path = fallback.string();
    }
    if (path.empty()) throw ConfigError("config: no dataset manifest set");
    if (!std::filesystem::exists(path))
        throw ConfigError("dataset manifest '" + path + "' does not exist");
    return load_manifest(path);
}

inline std::vector<std::string> selected_image_ids(const GazeDataset& ds, const RunConfig& cfg) {
    return ds.image_ids(cfg.only_category);
}

inline std::vector<StimulusCategory> selected_categories(const RunConfig& cfg) {
    if (cfg.only_category) return {*cfg.only_category};
    return {kCategories.begin(), kCategories.end()};
}

inline std::vector<AgeGroup> selected_groups(const RunConfig& cfg) {
    if (cfg.only_group) return {*cfg.only_group};
    return {kAgeGroups.begin(), kAgeGroups.end()};
}

inline std::filesystem::path out_file(const RunConfig& cfg, const std::string& rel) {
    const std::filesystem::path p = std::filesystem::path(cfg.out_dir) / rel;
    std::filesystem::create_directories(p.parent_path());
    return p;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    return out;
}

inline bool dataset_has_depth(const GazeDataset& ds) {
    return !ds.images.empty() &&
           std::all_of(ds.images.begin(), ds.images.end(),
                       [](const ImageInfo& im) { return im.depth_path.has_value(); });
}

inline ChannelManifest full_manifest(const RunConfig& cfg, const GazeDataset& ds) {
    ManifestOptions mo;
    mo.depth = cfg.use_depth && dataset_has_depth(ds);
    return default_manifest(mo);
}

inline ScaleSelection group_scales(const RunConfig& cfg, AgeGroup g) {
    if (cfg.scales[index_of(g)]) return *cfg.scales[index_of(g)];
    return ScaleSelection::for_group(g);
}

inline double group_alpha(const RunConfig& cfg, AgeGroup g) {
    if (cfg.center_alpha[index_of(g)]) return *cfg.center_alpha[index_of(g)];
    return kDefaultCenterAlpha[index_of(g)];
}

// full feature tensor for one image (all manifest channels, no scale filter)
inline FeatureTensor assemble_full(const RunConfig& cfg, const ImageInfo& info,
                                   const ChannelManifest& manifest) {
    const ImageRgb8 image = read_png_rgb8(info.raster_path);
    if (image.width != info.width || image.height != info.height)
        throw ValidationError("image '" + info.id + "' does not match its manifest dimensions");
    std::optional<ScalarMap> depth;
    const bool needs_depth =
        std::any_of(manifest.channels.begin(), manifest.channels.end(),
                    [](const ChannelSpec& c) { return c.name.rfind("depth_", 0) == 0; });
    if (needs_depth) {
        if (!info.depth_path)
            throw ValidationError("image '" + info.id + "' lacks the depth file needed");
        depth = read_depth_file(*info.depth_path);
        if (depth->width != info.width || depth->height != info.height)
            throw ValidationError("depth for '" + info.id + "' has wrong dimensions");
    }
    FeatureOptions fo;
    fo.selection = ScaleSelection::all();
    fo.external_dir = cfg.external_channels_dir;
    fo.image_id = info.id;
    return assemble_features(image, depth ? &*depth : nullptr, manifest, fo);
}

inline int train_count(const RunConfig& cfg, std::size_t n_images) {
    int n = static_cast<int>(std::llround(cfg.train_fraction * static_cast<double>(n_images)));
    return std::clamp(n, 1, static_cast<int>(n_images) - 1);
}

inline std::pair<GazeDataset, GazeDataset> split_for(const RunConfig& cfg,
                                                     const GazeDataset& ds) {
    if (ds.images.size() < 2)
        throw ConfigError("train/test split needs at least two images");
    return split_train_test(ds, train_count(cfg, ds.images.size()),
                            derive_seed(cfg.seed, "train-test-split"));
}

inline std::string model_rel_path(AgeGroup g) {
    return "models/" + std::string(to_string(g)) + ".json";
}

// group saliency map of one image from its fixations
inline ScalarMap group_target_map(const GazeDataset& ds, const std::string& image_id,
                                  AgeGroup g, const RunConfig& cfg) {
    const ImageInfo& im = ds.image(image_id);
    const auto parts = partition_by_group(ds, image_id);
    return build_saliency_map(
        build_fixation_map(parts[index_of(g)], im.width, im.height, cfg.weight_by_duration),
        cfg.sigma_px);
}

// mean of the intensity-contrast planes, max-normalized (conspicuity-sum baseline)
inline ScalarMap intensity_contrast_baseline(const FeatureTensor& tensor) {
    ScalarMap sum(tensor.width, tensor.height, ScalarMap::Kind::Counts);
    int n = 0;
    for (int s = 1; s <= 3; ++s) {
        const auto c = tensor.channel_index("ics_s" + std::to_string(s));
        if (!c) continue;
        const double* plane = tensor.plane(*c);
        for (std::size_t i = 0; i < sum.size(); ++i) sum.values[i] += plane[i];
        ++n;
    }
    if (n == 0) throw ArgumentError("intensity_contrast_baseline: tensor has no contrast planes");
    return max_normalized(sum);
}

inline ScalarMap blended_prediction(const AgeModel& model, const FeatureTensor& full_tensor) {
    const FeatureTensor sub = full_tensor.subset(model.channel_names);
    const ScalarMap raw = predict(model, sub);
    return blend_center(raw, center_prior_channel(sub.width, sub.height), model.center_alpha);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

// Validates the dataset and writes a summary of what was loaded.
inline StageResult run_ingest(const RunConfig& cfg) {
    const GazeDataset ds = detail::load_dataset(cfg);
    nlohmann::json j;
    j["n_images"] = ds.images.size();
    j["n_observers"] = ds.observers.size();
    j["n_fixations"] = ds.fixations.size();
    for (StimulusCategory c : kCategories)
        j["images_per_category"][to_string(c)] = ds.image_ids(c).size();
    for (AgeGroup g : kAgeGroups) {
        j["observers_per_group"][to_string(g)] = ds.observer_ids_in_group(g).size();
        std::size_t n = 0;
        for (const auto& f : ds.fixations)
            if (f.group == g) ++n;
        j["fixations_per_group"][to_string(g)] = n;
    }
    const auto path = detail::out_file(cfg, "ingest_summary.json");
    detail::open_output(path) << j.dump(2) << '\n';
    return {{path.string()}};
}

// Generates a synthetic cohort under <out>/dataset.
inline StageResult run_synth(const RunConfig& cfg) {
    CohortOptions opt = cfg.synth;
    opt.seed = cfg.seed;
    const SynthCohort cohort = generate_cohort(opt);
    const auto dir = std::filesystem::path(cfg.out_dir) / "dataset";
    std::filesystem::create_directories(dir);
    write_cohort(cohort, dir.string());
    StageResult r;
    r.outputs.push_back((dir / "manifest.json").string());
    r.outputs.push_back((dir / "fixations.csv").string());
    return r;
}

// Writes per-group and combined human saliency maps for every image.
inline StageResult run_maps(const RunConfig& cfg) {
    const GazeDataset ds = detail::load_dataset(cfg);
    const auto ids = detail::selected_image_ids(ds, cfg);
    if (ids.empty()) throw ConfigError("maps: no images selected");

    std::vector<GroupMapSet> sets(ids.size());
    parallel_for(ids.size(), [&](std::size_t i) {
        sets[i] = build_group_map_set(ds, ids[i], cfg.sigma_px, cfg.weight_by_duration);
    });

    StageResult r;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (AgeGroup g : kAgeGroups) {
            const auto p = detail::out_file(
                cfg, "maps/" + ids[i] + "." + std::string(to_string(g)) + ".png");
            write_map_png(p, sets[i].group[index_of(g)]);
            r.outputs.push_back(p.string());
        }
        const auto p = detail::out_file(cfg, "maps/" + ids[i] + ".combined.png");
        write_map_png(p, sets[i].combined);
        r.outputs.push_back(p.string());
    }
    return r;
}

// Depth bias, explorativeness, similarity, center bias, and UPL per category.
inline StageResult run_metrics(const RunConfig& cfg) {
    const GazeDataset ds = detail::load_dataset(cfg);
    StageResult r;

    const auto long_path = detail::out_file(cfg, "metrics/metrics_long.csv");
    auto long_csv = detail::open_output(long_path);
    long_csv << "metric,group,category,value\n";
    auto long_row = [&](const std::string& metric, AgeGroup g, StimulusCategory c, double v) {
        long_csv << metric << ',' << to_string(g) << ',' << to_string(c) << ','
                 << detail::format_double(v) << '\n';
    };

    const auto db_path = detail::out_file(cfg, "metrics/depth_bias_images.csv");
    auto db_csv = detail::open_output(db_path);
    db_csv << "image_id,category,threshold,group,foreground_pct,background_pct,n_fixations\n";

    for (StimulusCategory cat : detail::selected_categories(cfg)) {
        const auto ids = ds.image_ids(cat);
        if (ids.empty()) continue;

        // inter-individual similarity, source group by target group
        const SimilarityMatrix sim = similarity_matrix(
            ds, ids, {cfg.sigma_px, cfg.drop_first_fixation});
        const auto sim_path = detail::out_file(
            cfg, "metrics/similarity_" + std::string(to_string(cat)) + ".csv");
        auto sim_csv = detail::open_output(sim_path);
        sim_csv << "source";
        for (AgeGroup t : kAgeGroups) sim_csv << ',' << to_string(t);
        sim_csv << '\n';
        for (AgeGroup s : kAgeGroups) {
            sim_csv << to_string(s);
            for (AgeGroup t : kAgeGroups)
                sim_csv << ',' << detail::format_double(sim.value(s, t));
            sim_csv << '\n';
        }
        r.outputs.push_back(sim_path.string());

        // depth bias at both thresholds (images with masks only)
        std::vector<std::string> masked;
        for (const auto& id : ids)
            if (ds.image(id).mask_path) masked.push_back(id);
        if (!masked.empty()) {
            const DepthBiasResult db = depth_bias(ds, masked, cfg.sigma_px, {cfg.t1, cfg.t2});
            for (const auto& row : db.rows)
                db_csv << row.image_id << ',' << to_string(cat) << ','
                       << detail::format_double(row.threshold) << ',' << to_string(row.group)
                       << ',' << detail::format_double(row.foreground_pct) << ','
                       << detail::format_double(row.background_pct) << ',' << row.n_fixations
                       << '\n';
            for (const auto& [t, entries] : db.by_threshold) {
                const std::string suffix = "_t" + detail::format_double(t);
                for (AgeGroup g : kAgeGroups) {
                    const auto& e = entries[index_of(g)];
                    if (e.n_images == 0) continue;
                    long_row("depth_bias_fg" + suffix, g, cat, e.foreground_pct);
                    long_row("depth_bias_bg" + suffix, g, cat, e.background_pct);
                }
            }
        }

        // explorativeness: mean entropy of per-image group saliency maps
        for (AgeGroup g : kAgeGroups) {
            double sum = 0.0;
            int n = 0;
            for (const auto& id : ids) {
                const ScalarMap m = detail::group_target_map(ds, id, g, cfg);
                if (m.degenerate) continue;  // group never looked at this image
                sum += explorativeness_entropy(m, cfg.entropy_bins);
                ++n;
            }
            if (n > 0) long_row("explorativeness_entropy_bits", g, cat, sum / n);
        }

        // center bias and the upper performance limit
        for (AgeGroup g : kAgeGroups) {
            const CenterBiasResult cb =
                center_bias(ds, g, ids, cfg.sigma_px, cfg.drop_first_fixation);
            long_row("center_centroid_distance_px", g, cat, cb.centroid_distance_px);
            if (cb.n_auc_images > 0) long_row("center_map_auc", g, cat, cb.center_auc.value);

            const UplResult upl = upper_performance_limit(
                ds, g, ids, cfg.upl_repetitions, derive_seed(cfg.seed, "upl"), cfg.sigma_px,
                cfg.drop_first_fixation);
            if (upl.n_images > 0) long_row("upl_auc", g, cat, upl.mean_auc);
        }
    }

    r.outputs.push_back(long_path.string());
    r.outputs.push_back(db_path.string());
    return r;
}

// Trains one linear model per group on the train split and saves them.
inline StageResult run_train(const RunConfig& cfg) {
    const GazeDataset ds = detail::load_dataset(cfg);
    const auto [train_ds, test_ds] = detail::split_for(cfg, ds);
    if (train_ds.images.empty()) throw ConfigError("train: empty train split");

    const ChannelManifest manifest = detail::full_manifest(cfg, ds);
    const auto groups = detail::selected_groups(cfg);

    // per image: full tensor once, then per-group samples
    struct PerImage {
        std::array<std::vector<TrainingSample>, 3> samples;
    };
    std::vector<PerImage> collected(train_ds.images.size());
    parallel_for(train_ds.images.size(), [&](std::size_t i) {
        const ImageInfo& info = train_ds.images[i];
        const FeatureTensor full = detail::assemble_full(cfg, info, manifest);
        for (AgeGroup g : groups) {
            const ScalarMap target = detail::group_target_map(train_ds, info.id, g, cfg);
            if (target.degenerate) continue;
            const ChannelManifest sub = manifest.filtered(detail::group_scales(cfg, g));
            std::vector<std::string> names;
            for (const auto& c : sub.channels) names.push_back(c.name);
            const FeatureTensor tensor = full.subset(names);
            SampleOptions so;
            so.seed = derive_seed(derive_seed(cfg.seed, "sampling"),
                                  info.id + "/" + std::string(to_string(g)));
            collected[i].samples[index_of(g)] = sample_pixels(tensor, target, so);
        }
    });

    StageResult r;
    for (AgeGroup g : groups) {
        std::vector<TrainingSample> samples;
        for (const auto& per : collected) {
            const auto& s = per.samples[index_of(g)];
            samples.insert(samples.end(), s.begin(), s.end());
        }
        if (samples.empty())
            throw ConfigError(std::string("train: no samples for group '") + to_string(g) +
                              "' (no fixations in the train split)");
        const ChannelManifest sub = manifest.filtered(detail::group_scales(cfg, g));
        TrainDiagnostics diag;
        AgeModel model = train(samples, sub, g, TrainOptions{}, &diag);
        model.center_alpha = detail::group_alpha(cfg, g);

        const auto model_path = detail::out_file(cfg, detail::model_rel_path(g));
        save_model(model_path.string(), model);
        r.outputs.push_back(model_path.string());

        nlohmann::json dj;
        dj["final_loss"] = diag.final_loss;
        dj["train_accuracy"] = diag.train_accuracy;
        dj["epochs_run"] = diag.epochs_run;
        dj["n_samples"] = samples.size();
        const auto diag_path =
            detail::out_file(cfg, "models/" + std::string(to_string(g)) + ".diag.json");
        detail::open_output(diag_path) << dj.dump(2) << '\n';
        r.outputs.push_back(diag_path.string());
    }
    return r;
}

// Predicted (blended) saliency maps for the test split.
inline StageResult run_predict(const RunConfig& cfg) {
    const GazeDataset ds = detail::load_dataset(cfg);
    const auto [train_ds, test_ds] = detail::split_for(cfg, ds);
    if (test_ds.images.empty()) throw ConfigError("predict: empty test split");

    const ChannelManifest manifest = detail::full_manifest(cfg, ds);
    const auto groups = detail::selected_groups(cfg);
    std::array<std::optional<AgeModel>, 3> models;
    for (AgeGroup g : groups) {
        const auto p = detail::out_file(cfg, detail::model_rel_path(g));
        if (!std::filesystem::exists(p))
            throw ConfigError(std::string("predict: no trained model for group '") +
                              to_string(g) + "' at " + p.string());
        models[index_of(g)] = load_model(p.string());
    }

    std::vector<std::array<std::optional<ScalarMap>, 3>> preds(test_ds.images.size());
    parallel_for(test_ds.images.size(), [&](std::size_t i) {
        const FeatureTensor full = detail::assemble_full(cfg, test_ds.images[i], manifest);
        for (AgeGroup g : groups)
            preds[i][index_of(g)] = detail::blended_prediction(*models[index_of(g)], full);
    });

    StageResult r;
    for (std::size_t i = 0; i < test_ds.images.size(); ++i) {
        for (AgeGroup g : groups) {
            const auto p = detail::out_file(cfg, "pred/" + test_ds.images[i].id + "." +
                                                     std::string(to_string(g)) + ".png");
            write_map_png(p, *preds[i][index_of(g)]);
            r.outputs.push_back(p.string());
        }
    }
    return r;
}

// Scores the age models against baselines and the UPL on the test split.
inline StageResult run_eval(const RunConfig& cfg) {
    const GazeDataset ds = detail::load_dataset(cfg);
    const auto [train_ds, test_ds] = detail::split_for(cfg, ds);
    if (test_ds.images.empty()) throw ConfigError("eval: empty test split");

    const ChannelManifest manifest = detail::full_manifest(cfg, ds);
    const auto groups = detail::selected_groups(cfg);
    std::array<std::optional<AgeModel>, 3> models;
    for (AgeGroup g : groups) {
        const auto p = detail::out_file(cfg, detail::model_rel_path(g));
        if (!std::filesystem::exists(p))
            throw ConfigError(std::string("eval: no trained model for group '") + to_string(g) +
                              "' at " + p.string());
        models[index_of(g)] = load_model(p.string());
    }

    struct Row {
        std::string image_id;
        StimulusCategory category;
        AgeGroup group;
        double model_auc, contrast_auc, center_auc;
        std::size_t n_fixations;
    };
    std::vector<std::vector<Row>> rows(test_ds.images.size());
    parallel_for(test_ds.images.size(), [&](std::size_t i) {
        const ImageInfo& info = test_ds.images[i];
        if (cfg.only_category && info.category != *cfg.only_category) return;
        const FeatureTensor full = detail::assemble_full(cfg, info, manifest);
        const ScalarMap contrast = detail::intensity_contrast_baseline(full);
        const ScalarMap center = center_prior_channel(info.width, info.height);
        const auto parts = partition_by_group(test_ds, info.id);
        for (AgeGroup g : groups) {
            const auto pixels =
                fixation_pixels(parts[index_of(g)], cfg.drop_first_fixation);
            if (pixels.empty()) continue;
            const ScalarMap pred = detail::blended_prediction(*models[index_of(g)], full);
            rows[i].push_back({info.id, info.category, g,
                               auc_score(pred, pixels, AllNonFixated{}).value,
                               auc_score(contrast, pixels, AllNonFixated{}).value,
                               auc_score(center, pixels, AllNonFixated{}).value,
                               pixels.size()});
        }
    });

    const auto per_image_path = detail::out_file(cfg, "eval/eval_per_image.csv");
    auto per_image = detail::open_output(per_image_path);
    per_image << "image_id,category,group,model_auc,intensity_contrast_auc,center_prior_auc,"
                 "n_fixation_pixels\n";
    // (category, group) -> accumulators
    std::map<std::pair<int, int>, std::array<double, 3>> sums;
    std::map<std::pair<int, int>, int> counts;
    for (const auto& image_rows : rows)
        for (const auto& row : image_rows) {
            per_image << row.image_id << ',' << to_string(row.category) << ','
                      << to_string(row.group) << ',' << detail::format_double(row.model_auc)
                      << ',' << detail::format_double(row.contrast_auc) << ','
                      << detail::format_double(row.center_auc) << ',' << row.n_fixations
                      << '\n';
            const auto key = std::make_pair(static_cast<int>(index_of(row.category)),
                                            static_cast<int>(index_of(row.group)));
            auto& s = sums[key];
            s[0] += row.model_auc;
            s[1] += row.contrast_auc;
            s[2] += row.center_auc;
            counts[key] += 1;
        }

    const auto eval_path = detail::out_file(cfg, "eval/eval.csv");
    auto eval_csv = detail::open_output(eval_path);
    eval_csv << "category,group,model_auc,intensity_contrast_auc,center_prior_auc,upl_auc,"
                "n_images\n";
    for (StimulusCategory cat : detail::selected_categories(cfg)) {
        const auto test_ids = test_ds.image_ids(cat);
        if (test_ids.empty()) continue;
        for (AgeGroup g : groups) {
            const auto key = std::make_pair(static_cast<int>(index_of(cat)),
                                            static_cast<int>(index_of(g)));
            const auto it = counts.find(key);
            if (it == counts.end()) continue;
            const auto& s = sums[key];
            const int n = it->second;
            const UplResult upl = upper_performance_limit(
                ds, g, test_ids, cfg.upl_repetitions, derive_seed(cfg.seed, "upl-eval"),
                cfg.sigma_px, cfg.drop_first_fixation);
            eval_csv << to_string(cat) << ',' << to_string(g) << ','
                     << detail::format_double(s[0] / n) << ','
                     << detail::format_double(s[1] / n) << ','
                     << detail::format_double(s[2] / n) << ','
                     << detail::format_double(upl.mean_auc) << ',' << n << '\n';
        }
    }
    return {{eval_path.string(), per_image_path.string()}};
}

// Bundles overlays, metric tables, and a reproducibility manifest.
inline StageResult run_report(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const GazeDataset ds = detail::load_dataset(cfg);
    const auto [train_ds, test_ds] = detail::split_for(cfg, ds);
    const auto groups = detail::selected_groups(cfg);

    // every required input is checked up front; all gaps reported at once
    std::vector<std::string> missing;
    auto need = [&](const fs::path& p) {
        if (!fs::exists(p)) missing.push_back(p.string());
        return p;
    };
    const auto metrics_long = need(fs::path(cfg.out_dir) / "metrics/metrics_long.csv");
    const auto db_images = need(fs::path(cfg.out_dir) / "metrics/depth_bias_images.csv");
    std::vector<fs::path> sim_paths;
    for (StimulusCategory cat : detail::selected_categories(cfg)) {
        if (ds.image_ids(cat).empty()) continue;
        sim_paths.push_back(need(fs::path(cfg.out_dir) /
                                 ("metrics/similarity_" + std::string(to_string(cat)) + ".csv")));
    }
    const auto eval_csv = need(fs::path(cfg.out_dir) / "eval/eval.csv");
    const auto eval_per_image = need(fs::path(cfg.out_dir) / "eval/eval_per_image.csv");
    for (AgeGroup g : groups) need(fs::path(cfg.out_dir) / detail::model_rel_path(g));
    struct OverlayInput {
        std::string image_id;
        fs::path map_path;
        std::string tag;
    };
    std::vector<OverlayInput> overlays;
    for (const auto& info : test_ds.images) {
        if (cfg.only_category && info.category != *cfg.only_category) continue;
        overlays.push_back(
            {info.id, need(fs::path(cfg.out_dir) / ("maps/" + info.id + ".combined.png")),
             "human"});
        for (AgeGroup g : groups)
            overlays.push_back(
                {info.id,
                 need(fs::path(cfg.out_dir) /
                      ("pred/" + info.id + "." + std::string(to_string(g)) + ".png")),
                 std::string(to_string(g))});
    }
    if (!missing.empty()) {
        std::string msg = "report: missing inputs:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw IoError(msg);
    }

    StageResult r;
    for (const auto& ov : overlays) {
        const ImageInfo& info = test_ds.image(ov.image_id);
        const ImageRgb8 stimulus = read_png_rgb8(info.raster_path);
        const ScalarMap map = read_map_png(ov.map_path);
        const ImageRgb8 overlay = render_heat_overlay(stimulus, map);
        const auto p =
            detail::out_file(cfg, "report/overlay_" + ov.image_id + "_" + ov.tag + ".png");
        write_png_rgb8(p, overlay);
        r.outputs.push_back(p.string());
    }

    for (const auto& src : {metrics_long, db_images, eval_csv, eval_per_image}) {
        const auto dst = detail::out_file(cfg, "report/" + src.filename().string());
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
        r.outputs.push_back(dst.string());
    }
    for (const auto& src : sim_paths) {
        const auto dst = detail::out_file(cfg, "report/" + src.filename().string());
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
        r.outputs.push_back(dst.string());
    }

    nlohmann::json manifest;
    manifest["config"] = run_config_to_json(cfg);
    manifest["outputs"] = r.outputs;
    const auto mp = detail::out_file(cfg, "report/run_manifest.json");
    detail::open_output(mp) << manifest.dump(2) << '\n';
    r.outputs.push_back(mp.string());
    return r;
}

}  // namespace agaze
