#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <agaze/pipeline.hpp>

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> group;
    std::optional<std::string> category;
    std::optional<std::string> out;
};

agaze::RunConfig effective_config(const Overrides& o) {
    agaze::RunConfig cfg;
    if (!o.config_path.empty()) cfg = agaze::load_run_config(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.group) cfg.only_group = agaze::parse_age_group(*o.group);
    if (o.category) cfg.only_category = agaze::parse_category(*o.category);
    if (o.out) cfg.out_dir = *o.out;
    agaze::validate_config(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"age-aware gaze analysis pipeline"};
    app.require_subcommand(1);

    Overrides o;
    std::vector<std::pair<CLI::App*, std::function<agaze::StageResult(const agaze::RunConfig&)>>>
        stages;
    auto add_stage = [&](const std::string& name, const std::string& desc,
                         agaze::StageResult (*fn)(const agaze::RunConfig&)) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", o.config_path, "JSON run configuration file");
        sub->add_option("--seed", o.seed, "master seed (overrides config)");
        sub->add_option("--group", o.group, "restrict to one age group")
            ->check(CLI::IsMember({"children", "adults", "elderly"}));
        sub->add_option("--category", o.category, "restrict to one stimulus category")
            ->check(CLI::IsMember({"naturals", "manmade", "fractals"}));
        sub->add_option("--out", o.out, "output directory (overrides config)");
        stages.emplace_back(sub, fn);
    };

    add_stage("ingest", "validate a dataset manifest and summarize it", agaze::run_ingest);
    add_stage("synth", "generate a synthetic cohort under <out>/dataset", agaze::run_synth);
    add_stage("maps", "write per-group and combined saliency maps", agaze::run_maps);
    add_stage("metrics", "compute depth bias, entropy, similarity, center bias, UPL",
              agaze::run_metrics);
    add_stage("train", "fit one linear saliency model per age group", agaze::run_train);
    add_stage("predict", "write predicted saliency maps for the test split",
              agaze::run_predict);
    add_stage("eval", "score models against baselines and the UPL", agaze::run_eval);
    add_stage("report", "bundle overlays, tables, and the run manifest", agaze::run_report);

    CLI11_PARSE(app, argc, argv);

    try {
        const agaze::RunConfig cfg = effective_config(o);
        for (const auto& [sub, fn] : stages) {
            if (!sub->parsed()) continue;
            const agaze::StageResult result = fn(cfg);
            for (const auto& path : result.outputs) std::cout << path << '\n';
            std::cout << sub->get_name() << ": " << result.outputs.size()
                      << " output(s) written\n";
            return 0;
        }
        std::cerr << "error: no subcommand selected\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
