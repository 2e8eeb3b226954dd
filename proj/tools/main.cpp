#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lifestyles/common.hpp"
#include "lifestyles/pipeline.hpp"

namespace pl = lifestyles::pipeline;

int main(int argc, char** argv) {
    CLI::App app{"Joint shopping/mobility lifestyle modeling pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    int top_k = 20;
    app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    app.add_option("--seed", seed_override, "Override the root seed from the config");
    app.add_option("--out", out_dir, "Output directory holding all stage artifacts");
    app.add_option("--top-k", top_k, "Rows per behavior/class in the report tables");

    const std::pair<const char*, const char*> stages[] = {
        {"synth", "Generate synthetic event logs, POI fixture, and ground truth"},
        {"ingest", "Parse logs into visit counts, purchase documents, and weekly spend"},
        {"lda-shopping", "Train shopping behaviors on a user split and score all users"},
        {"towers", "Triangulate towers, fetch POIs within the crawl radius, learn classes"},
        {"features", "TF-IDF weighting of visits projected onto tower classes"},
        {"cmf-fit", "Fit the collective factorization on all users"},
        {"cmf-cv", "Masked-row cross-validation over the rank grid"},
        {"compare-views", "Joint model vs shopping-only RMSE on held-out users"},
        {"baselines", "Raw-count lasso regression and majority/logistic classification"},
        {"report", "Top-word tables per shopping behavior and tower class"},
    };
    for (const auto& [name, desc] : stages) app.add_subcommand(name, desc)->fallthrough();
    app.add_subcommand("all", "Run every stage in pipeline order")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        pl::PipelineConfig config =
            config_path.empty() ? pl::default_config() : pl::load_config(config_path);
        if (seed_override) {
            config.seed = *seed_override;
            pl::refresh_canonical(config);
        }
        const std::string chosen = app.get_subcommands().at(0)->get_name();
        if (chosen == "all") {
            for (const auto& name : pl::stage_names()) {
                std::fprintf(stderr, "[%s]\n", name.c_str());
                pl::run_stage(name, config, out_dir, top_k);
            }
        } else {
            pl::run_stage(chosen, config, out_dir, top_k);
        }
    } catch (const lifestyles::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
