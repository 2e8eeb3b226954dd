#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lifestyles/cmf.hpp"
#include "lifestyles/geo.hpp"
#include "lifestyles/synth.hpp"

namespace lifestyles::pipeline {

// Relative paths resolve against the output directory, so the default config chains
// `synth` straight into `ingest`; absolute paths point at external data.
struct DataConfig {
    std::string cdr = "data/cdr.csv";
    std::string ccr = "data/ccr.csv";
    std::string towers = "data/towers.csv";
    std::string pois = "data/pois.csv";
    std::optional<int> amount_buckets;  // per-MCC quantile buckets; unset = plain MCC tokens
};

struct LdaStageConfig {
    int behaviors = 5;
    double alpha = -1.0;  // < 0 selects the 50/K default
    double beta = 0.01;
    int train_iterations = 1000;
    int infer_iterations = 200;
    double train_fraction = 0.4;  // users used to train; the rest are folded in
};

struct GeoStageConfig {
    int classes = 20;
    double poi_threshold = 0.25;
    int class_train_iterations = 1000;
    std::string provider = "file";  // "file" or "http"
    geo::HttpPoiConfig http;
};

struct CmfStageConfig {
    cmf::CmfConfig model;  // model.seed is ignored; stage seeds are derived
    int folds = 10;
    std::vector<int> rank_grid;  // empty = the cross-validation default grid
};

struct BaselinesStageConfig {
    std::vector<double> lambda_grid = {10.0, 1.0, 0.1, 0.01, 0.001};
    int folds = 10;
    double ridge = 1e-3;
    int logistic_max_iter = 300;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    DataConfig data;
    LdaStageConfig lda;
    GeoStageConfig geo;
    CmfStageConfig cmf;
    BaselinesStageConfig baselines;
    synth::SynthConfig synth;  // synth.seed is ignored; the stage seed is derived
    std::string canonical;     // effective config as canonical JSON (hashed into manifests)
};

PipelineConfig default_config();

// Parses and validates; a ConfigError lists every violated field at once.
PipelineConfig parse_config_text(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

// Re-derives the canonical form after programmatic edits (e.g. a seed override).
void refresh_canonical(PipelineConfig& config);

// A required artifact is absent; the message names the stage that produces it.
class MissingInput : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Stage runners. Each writes its artifacts plus manifest_<stage>.json (stage name, stage
// seed, config hash, input and output SHA-256) under out_dir.
void run_synth(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_ingest(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_lda_shopping(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_towers(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_features(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_cmf_fit(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_cmf_cv(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_compare_views(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_baselines(const PipelineConfig& config, const std::filesystem::path& out_dir);
void run_report(const PipelineConfig& config, const std::filesystem::path& out_dir,
                int top_k = 20);

// Stage names in pipeline order.
const std::vector<std::string>& stage_names();

// Dispatch by stage name; unknown names throw std::invalid_argument.
void run_stage(const std::string& name, const PipelineConfig& config,
               const std::filesystem::path& out_dir, int top_k = 20);

}  // namespace lifestyles::pipeline
