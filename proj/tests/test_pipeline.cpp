// Run configuration handling plus an end-to-end pass over all eight pipeline
// stages on a small synthetic cohort.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <agaze/pipeline.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace agaze;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string field;
    while (std::getline(in, field, ',')) out.push_back(field);
    return out;
}

std::size_t count_rows_with(const std::vector<std::string>& lines, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& l : lines)
        if (l.rfind(prefix, 0) == 0) ++n;
    return n;
}

// cohort small enough for fast stage runs yet valid for every metric
RunConfig tiny_run(const fs::path& out_dir, int n_images = 4) {
    RunConfig cfg;
    cfg.out_dir = out_dir.string();
    cfg.seed = 7;
    cfg.sigma_px = 7.0;
    cfg.entropy_bins = 64;
    cfg.upl_repetitions = 3;
    cfg.train_fraction = 0.5;
    cfg.synth.n_observers = {2, 2, 2};
    cfg.synth.n_images = n_images;
    cfg.synth.n_fixations = 10;
    cfg.synth.stimulus.width = 96;
    cfg.synth.stimulus.height = 72;
    cfg.synth.stimulus.n_blobs = 3;
    return cfg;
}

}  // namespace

TEST_CASE("run configuration defaults pass validation") {
    RunConfig cfg;
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.sigma_px == 37.0);
    CHECK(cfg.entropy_bins == 256);
    CHECK(cfg.t1 == 5.0);
    CHECK(cfg.t2 == 10.0);
    CHECK(cfg.upl_repetitions == 50);
    CHECK(cfg.train_fraction == 0.625);
    CHECK(cfg.seed == 0);
    CHECK(!cfg.drop_first_fixation);
    CHECK(!cfg.weight_by_duration);
    CHECK(cfg.use_depth);
    CHECK(!cfg.only_group);
    CHECK(!cfg.only_category);
    CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("run configuration validation rejects bad values") {
    RunConfig cfg;
    SECTION("sigma") {
        cfg.sigma_px = 0.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SECTION("entropy bins") {
        cfg.entropy_bins = 1;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SECTION("threshold order") {
        cfg.t1 = cfg.t2;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SECTION("threshold range") {
        cfg.t1 = 0.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg.t1 = 5.0;
        cfg.t2 = 100.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SECTION("upl repetitions") {
        cfg.upl_repetitions = 0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SECTION("train fraction") {
        cfg.train_fraction = 0.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg.train_fraction = 1.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SECTION("scale selection") {
        cfg.scales[index_of(AgeGroup::Children)] = ScaleSelection{{0}};
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg.scales[index_of(AgeGroup::Children)] = ScaleSelection{{4}};
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg.scales[index_of(AgeGroup::Children)] = ScaleSelection{{1, 2, 3}};
        CHECK_NOTHROW(validate_config(cfg));
    }
    SECTION("center alpha") {
        cfg.center_alpha[index_of(AgeGroup::Adults)] = 1.5;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg.center_alpha[index_of(AgeGroup::Adults)] = -0.1;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg.center_alpha[index_of(AgeGroup::Adults)] = 1.0;
        CHECK_NOTHROW(validate_config(cfg));
    }
}

TEST_CASE("run configuration json round trip") {
    RunConfig cfg;
    cfg.manifest_path = "data/manifest.json";
    cfg.out_dir = "results";
    cfg.sigma_px = 21.0;
    cfg.entropy_bins = 128;
    cfg.t1 = 2.5;
    cfg.t2 = 20.0;
    cfg.upl_repetitions = 9;
    cfg.train_fraction = 0.75;
    cfg.seed = 424242;
    cfg.drop_first_fixation = true;
    cfg.weight_by_duration = true;
    cfg.use_depth = false;
    cfg.scales[index_of(AgeGroup::Children)] = ScaleSelection{{1, 3}};
    cfg.center_alpha[index_of(AgeGroup::Adults)] = 0.45;
    cfg.external_channels_dir = "channels";
    cfg.only_group = AgeGroup::Elderly;
    cfg.only_category = StimulusCategory::Fractals;
    cfg.synth.n_observers = {3, 4, 5};
    cfg.synth.n_images = 6;
    cfg.synth.n_fixations = 12;
    cfg.synth.center_strength = {0.5, 0.2, 0.3};
    cfg.synth.foreground_pref = {0.6, 0.1, -0.2};
    cfg.synth.explorativeness = {0.7, 1.9, 1.2};
    cfg.synth.jitter = 0.05;
    cfg.synth.stimulus.width = 123;
    cfg.synth.stimulus.height = 77;
    cfg.synth.stimulus.n_blobs = 4;
    cfg.synth.stimulus.group_distinctness = 0.8;
    cfg.synth.stimulus.noise_amplitude = 0.02;

    const RunConfig back = run_config_from_json(run_config_to_json(cfg));
    CHECK(back.manifest_path == cfg.manifest_path);
    CHECK(back.out_dir == cfg.out_dir);
    CHECK(back.sigma_px == cfg.sigma_px);
    CHECK(back.entropy_bins == cfg.entropy_bins);
    CHECK(back.t1 == cfg.t1);
    CHECK(back.t2 == cfg.t2);
    CHECK(back.upl_repetitions == cfg.upl_repetitions);
    CHECK(back.train_fraction == cfg.train_fraction);
    CHECK(back.seed == cfg.seed);
    CHECK(back.drop_first_fixation == cfg.drop_first_fixation);
    CHECK(back.weight_by_duration == cfg.weight_by_duration);
    CHECK(back.use_depth == cfg.use_depth);
    REQUIRE(back.external_channels_dir.has_value());
    CHECK(*back.external_channels_dir == "channels");
    REQUIRE(back.only_group.has_value());
    CHECK(*back.only_group == AgeGroup::Elderly);
    REQUIRE(back.only_category.has_value());
    CHECK(*back.only_category == StimulusCategory::Fractals);
    REQUIRE(back.scales[index_of(AgeGroup::Children)].has_value());
    CHECK(back.scales[index_of(AgeGroup::Children)]->scales == std::vector<int>{1, 3});
    CHECK(!back.scales[index_of(AgeGroup::Adults)]);
    REQUIRE(back.center_alpha[index_of(AgeGroup::Adults)].has_value());
    CHECK(*back.center_alpha[index_of(AgeGroup::Adults)] == 0.45);
    CHECK(!back.center_alpha[index_of(AgeGroup::Children)]);
    CHECK(back.synth.n_observers == cfg.synth.n_observers);
    CHECK(back.synth.n_images == cfg.synth.n_images);
    CHECK(back.synth.n_fixations == cfg.synth.n_fixations);
    CHECK(back.synth.center_strength == cfg.synth.center_strength);
    CHECK(back.synth.foreground_pref == cfg.synth.foreground_pref);
    CHECK(back.synth.explorativeness == cfg.synth.explorativeness);
    CHECK(back.synth.jitter == cfg.synth.jitter);
    CHECK(back.synth.stimulus.width == cfg.synth.stimulus.width);
    CHECK(back.synth.stimulus.height == cfg.synth.stimulus.height);
    CHECK(back.synth.stimulus.n_blobs == cfg.synth.stimulus.n_blobs);
    CHECK(back.synth.stimulus.group_distinctness == cfg.synth.stimulus.group_distinctness);
    CHECK(back.synth.stimulus.noise_amplitude == cfg.synth.stimulus.noise_amplitude);
}

TEST_CASE("run configuration json parsing") {
    SECTION("empty object keeps defaults") {
        const RunConfig cfg = run_config_from_json(nlohmann::json::object());
        CHECK(cfg.out_dir == "out");
        CHECK(cfg.sigma_px == 37.0);
        CHECK(cfg.use_depth);
    }
    SECTION("scale lists are sorted") {
        const auto j = nlohmann::json::parse(R"({"scales": {"children": [3, 1]}})");
        const RunConfig cfg = run_config_from_json(j);
        REQUIRE(cfg.scales[index_of(AgeGroup::Children)].has_value());
        CHECK(cfg.scales[index_of(AgeGroup::Children)]->scales == std::vector<int>{1, 3});
    }
    SECTION("synth observer counts need all three groups") {
        const auto j = nlohmann::json::parse(R"({"synth": {"n_observers": [1, 2]}})");
        CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
        CHECK_THROWS_WITH(run_config_from_json(j),
                          ContainsSubstring("'n_observers' must be an array of 3"));
    }
    SECTION("bad group name") {
        const auto j = nlohmann::json::parse(R"({"group": "teens"})");
        CHECK_THROWS_AS(run_config_from_json(j), ParseError);
    }
    SECTION("invalid values are rejected on load") {
        const auto j = nlohmann::json::parse(R"({"sigma_px": -1.0})");
        CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
    }
    SECTION("config file errors") {
        testutil::TempDir tmp;
        CHECK_THROWS_WITH(load_run_config(tmp / "absent.json"),
                          ContainsSubstring("cannot open config file"));
        const fs::path bad = tmp / "bad.json";
        std::ofstream(bad) << "{not json";
        CHECK_THROWS_AS(load_run_config(bad), ConfigError);
    }
}

TEST_CASE("pipeline stages compose into a complete run") {
    testutil::TempDir tmp;
    const fs::path out = tmp / "out";
    RunConfig cfg = tiny_run(out);
    validate_config(cfg);

    const StageResult synth = run_synth(cfg);
    REQUIRE(synth.outputs.size() == 2);
    REQUIRE(fs::exists(out / "dataset/manifest.json"));
    REQUIRE(fs::exists(out / "dataset/fixations.csv"));

    // ingest picks the generated manifest up without an explicit path
    run_ingest(cfg);
    const auto summary = nlohmann::json::parse(read_text(out / "ingest_summary.json"));
    CHECK(summary.at("n_images") == 4);
    CHECK(summary.at("n_observers") == 6);
    CHECK(summary.at("n_fixations") == 240);
    CHECK(summary.at("images_per_category").at("naturals") == 2);
    CHECK(summary.at("images_per_category").at("manmade") == 1);
    CHECK(summary.at("images_per_category").at("fractals") == 1);
    for (AgeGroup g : kAgeGroups) {
        CHECK(summary.at("observers_per_group").at(std::string(to_string(g))) == 2);
        CHECK(summary.at("fixations_per_group").at(std::string(to_string(g))) == 80);
    }

    const StageResult maps = run_maps(cfg);
    CHECK(maps.outputs.size() == 16);  // four images, three groups + combined
    for (const auto& p : maps.outputs) CHECK(fs::exists(p));
    const ScalarMap combined = read_map_png(out / "maps/img_000.combined.png");
    CHECK(combined.width == 96);
    CHECK(combined.height == 72);
    CHECK(*std::max_element(combined.values.begin(), combined.values.end()) == 1.0);

    run_metrics(cfg);
    const std::string long_text = read_text(out / "metrics/metrics_long.csv");
    const auto long_lines = lines_of(long_text);
    REQUIRE(!long_lines.empty());
    CHECK(long_lines.front() == "metric,group,category,value");
    CHECK(long_lines.size() == 1 + 66);
    for (const std::string metric :
         {"depth_bias_fg_t5", "depth_bias_bg_t5", "depth_bias_fg_t10", "depth_bias_bg_t10",
          "explorativeness_entropy_bits", "center_centroid_distance_px", "upl_auc"})
        CHECK(count_rows_with(long_lines, metric + ",") == 9);  // three groups x categories
    // the center map is built leave-one-image-out, so the single-image
    // categories cannot score it; only naturals (two images) reports it
    CHECK(count_rows_with(long_lines, "center_map_auc,") == 3);

    const std::string sim_text = read_text(out / "metrics/similarity_naturals.csv");
    const auto sim_lines = lines_of(sim_text);
    REQUIRE(sim_lines.size() == 4);
    CHECK(sim_lines.front() == "source,children,adults,elderly");
    CHECK(sim_lines[1].rfind("children,", 0) == 0);
    CHECK(sim_lines[2].rfind("adults,", 0) == 0);
    CHECK(sim_lines[3].rfind("elderly,", 0) == 0);
    CHECK(fs::exists(out / "metrics/similarity_manmade.csv"));
    CHECK(fs::exists(out / "metrics/similarity_fractals.csv"));

    const std::string db_text = read_text(out / "metrics/depth_bias_images.csv");
    const auto db_lines = lines_of(db_text);
    CHECK(db_lines.front() ==
          "image_id,category,threshold,group,foreground_pct,background_pct,n_fixations");
    CHECK(db_lines.size() == 1 + 4 * 2 * 3);  // image x threshold x group

    // a second metrics run reproduces every table byte for byte
    run_metrics(cfg);
    CHECK(read_text(out / "metrics/metrics_long.csv") == long_text);
    CHECK(read_text(out / "metrics/similarity_naturals.csv") == sim_text);
    CHECK(read_text(out / "metrics/depth_bias_images.csv") == db_text);

    const StageResult trained = run_train(cfg);
    CHECK(trained.outputs.size() == 6);
    ManifestOptions mo;
    mo.depth = true;  // synthetic cohorts always carry depth
    const ChannelManifest full = default_manifest(mo);
    for (AgeGroup g : kAgeGroups) {
        const std::string name(to_string(g));
        const fs::path model_path = out / ("models/" + name + ".json");
        REQUIRE(fs::exists(model_path));
        const AgeModel model = load_model(model_path.string());
        CHECK(model.group == g);
        CHECK(model.manifest.hash() == full.filtered(ScaleSelection::for_group(g)).hash());
        CHECK(model.center_alpha == kDefaultCenterAlpha[index_of(g)]);
        const auto diag =
            nlohmann::json::parse(read_text(out / ("models/" + name + ".diag.json")));
        CHECK(diag.at("n_samples").get<std::size_t>() > 0);
        CHECK(diag.at("epochs_run").get<int>() >= 1);
    }

    const StageResult pred = run_predict(cfg);
    REQUIRE(pred.outputs.size() == 6);  // two test images, three groups
    std::set<std::string> pred_ids;
    for (const auto& p : pred.outputs) {
        REQUIRE(fs::exists(p));
        const std::string name = fs::path(p).filename().string();
        pred_ids.insert(name.substr(0, name.find('.')));
    }
    CHECK(pred_ids.size() == 2);
    const ScalarMap pm = read_map_png(pred.outputs.front());
    CHECK(pm.width == 96);
    CHECK(pm.height == 72);

    run_eval(cfg);
    const std::string per_image_text = read_text(out / "eval/eval_per_image.csv");
    const auto per_image_lines = lines_of(per_image_text);
    CHECK(per_image_lines.front() ==
          "image_id,category,group,model_auc,intensity_contrast_auc,center_prior_auc,"
          "n_fixation_pixels");
    REQUIRE(per_image_lines.size() == 1 + 6);
    for (std::size_t i = 1; i < per_image_lines.size(); ++i) {
        const auto fields = split_csv(per_image_lines[i]);
        REQUIRE(fields.size() == 7);
        for (int c : {3, 4, 5}) {
            const double v = std::stod(fields[c]);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(std::stoul(fields[6]) > 0);
    }
    const std::string eval_text = read_text(out / "eval/eval.csv");
    const auto eval_lines = lines_of(eval_text);
    CHECK(eval_lines.front() ==
          "category,group,model_auc,intensity_contrast_auc,center_prior_auc,upl_auc,n_images");
    REQUIRE(eval_lines.size() == 1 + 6);  // two test categories, three groups

    // rerun is byte-identical, including the resampled upper limit
    run_eval(cfg);
    CHECK(read_text(out / "eval/eval.csv") == eval_text);
    CHECK(read_text(out / "eval/eval_per_image.csv") == per_image_text);

    const StageResult report = run_report(cfg);
    CHECK(report.outputs.size() == 16);  // 8 overlays + 4 tables + 3 similarity + manifest
    for (const auto& p : report.outputs) CHECK(fs::exists(p));
    std::size_t overlays = 0;
    for (const auto& entry : fs::directory_iterator(out / "report"))
        if (entry.path().filename().string().rfind("overlay_", 0) == 0) ++overlays;
    CHECK(overlays == 8);
    const auto run_manifest = nlohmann::json::parse(read_text(out / "report/run_manifest.json"));
    CHECK(run_manifest.at("config").at("seed") == 7);
    CHECK(run_manifest.at("outputs").size() == report.outputs.size() - 1);
}

TEST_CASE("pipeline group and category restriction") {
    testutil::TempDir tmp;
    const fs::path out = tmp / "out";
    RunConfig cfg = tiny_run(out, 2);
    cfg.synth.stimulus.width = 64;
    cfg.synth.stimulus.height = 48;
    run_synth(cfg);

    cfg.only_group = AgeGroup::Elderly;
    const StageResult trained = run_train(cfg);
    CHECK(trained.outputs.size() == 2);
    CHECK(fs::exists(out / "models/elderly.json"));
    CHECK(!fs::exists(out / "models/children.json"));

    const StageResult pred = run_predict(cfg);
    REQUIRE(pred.outputs.size() == 1);
    CHECK(fs::path(pred.outputs.front()).filename().string().find(".elderly.png") !=
          std::string::npos);

    run_eval(cfg);
    const auto eval_lines = lines_of(read_text(out / "eval/eval.csv"));
    REQUIRE(eval_lines.size() == 2);
    CHECK(eval_lines[1].find(",elderly,") != std::string::npos);

    // category restriction narrows the image selection
    RunConfig by_cat = tiny_run(out, 2);
    by_cat.only_category = StimulusCategory::Naturals;
    const StageResult maps = run_maps(by_cat);
    CHECK(maps.outputs.size() == 4);  // one naturals image, four maps

    // an explicit manifest path beats the out-dir fallback
    RunConfig other = tiny_run(tmp / "other_out", 2);
    other.manifest_path = (out / "dataset/manifest.json").string();
    run_ingest(other);
    CHECK(fs::exists(tmp / "other_out/ingest_summary.json"));
}

TEST_CASE("pipeline error paths") {
    SECTION("no dataset manifest configured") {
        testutil::TempDir tmp;
        RunConfig cfg = tiny_run(tmp / "out");
        CHECK_THROWS_AS(run_ingest(cfg), ConfigError);
        CHECK_THROWS_WITH(run_ingest(cfg), ContainsSubstring("no dataset manifest set"));
    }
    SECTION("explicit manifest path missing") {
        testutil::TempDir tmp;
        RunConfig cfg = tiny_run(tmp / "out");
        cfg.manifest_path = (tmp / "nope.json").string();
        CHECK_THROWS_AS(run_ingest(cfg), ConfigError);
        CHECK_THROWS_WITH(run_ingest(cfg), ContainsSubstring("does not exist"));
    }
    SECTION("split needs two images") {
        testutil::TempDir tmp;
        RunConfig cfg = tiny_run(tmp / "out", 1);
        cfg.synth.stimulus.width = 48;
        cfg.synth.stimulus.height = 36;
        run_synth(cfg);
        CHECK_THROWS_AS(run_train(cfg), ConfigError);
        CHECK_THROWS_WITH(run_train(cfg), ContainsSubstring("at least two images"));
    }
    SECTION("predict and eval refuse to run without models") {
        testutil::TempDir tmp;
        RunConfig cfg = tiny_run(tmp / "out", 2);
        cfg.synth.stimulus.width = 48;
        cfg.synth.stimulus.height = 36;
        run_synth(cfg);
        CHECK_THROWS_WITH(run_predict(cfg),
                          ContainsSubstring("predict: no trained model for group 'children'"));
        cfg.only_group = AgeGroup::Elderly;
        CHECK_THROWS_WITH(run_eval(cfg),
                          ContainsSubstring("eval: no trained model for group 'elderly'"));
    }
    SECTION("maps with an empty selection") {
        testutil::TempDir tmp;
        RunConfig cfg = tiny_run(tmp / "out", 2);  // naturals and manmade only
        cfg.synth.stimulus.width = 48;
        cfg.synth.stimulus.height = 36;
        run_synth(cfg);
        cfg.only_category = StimulusCategory::Fractals;
        CHECK_THROWS_WITH(run_maps(cfg), ContainsSubstring("maps: no images selected"));
    }
    SECTION("report lists every missing input") {
        testutil::TempDir tmp;
        RunConfig cfg = tiny_run(tmp / "out", 2);
        cfg.synth.stimulus.width = 48;
        cfg.synth.stimulus.height = 36;
        run_synth(cfg);
        try {
            run_report(cfg);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("report: missing inputs:") != std::string::npos);
            CHECK(msg.find("metrics_long.csv") != std::string::npos);
            CHECK(msg.find("eval.csv") != std::string::npos);
            CHECK(msg.find("models/children.json") != std::string::npos);
        }
    }
}
