#include "lifestyles/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_set>

#include "lifestyles/baselines.hpp"
#include "lifestyles/common.hpp"
#include "lifestyles/features.hpp"
#include "lifestyles/ingest.hpp"
#include "lifestyles/io.hpp"
#include "lifestyles/lda.hpp"
#include "lifestyles/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lifestyles::pipeline {

namespace {

// ---------- config parsing ----------

const json* section(const json& root, const char* name, std::vector<std::string>& errors) {
    if (!root.contains(name)) return nullptr;
    const json& s = root.at(name);
    if (!s.is_object()) {
        errors.push_back(std::string(name) + ": expected an object");
        return nullptr;
    }
    return &s;
}

void check_known_keys(const json& obj, const std::string& path,
                      const std::set<std::string>& known, std::vector<std::string>& errors) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) errors.push_back(path + it.key() + ": unknown field");
}

double take_double(const json* s, const std::string& path, const char* key, double def,
                   std::vector<std::string>& errors) {
    if (!s || !s->contains(key)) return def;
    const json& v = s->at(key);
    if (!v.is_number()) {
        errors.push_back(path + key + ": expected a number");
        return def;
    }
    return v.get<double>();
}

int take_int(const json* s, const std::string& path, const char* key, int def,
             std::vector<std::string>& errors) {
    if (!s || !s->contains(key)) return def;
    const json& v = s->at(key);
    if (!v.is_number_integer()) {
        errors.push_back(path + key + ": expected an integer");
        return def;
    }
    return v.get<int>();
}

std::string take_string(const json* s, const std::string& path, const char* key,
                        const std::string& def, std::vector<std::string>& errors) {
    if (!s || !s->contains(key)) return def;
    const json& v = s->at(key);
    if (!v.is_string()) {
        errors.push_back(path + key + ": expected a string");
        return def;
    }
    return v.get<std::string>();
}

bool take_bool(const json* s, const std::string& path, const char* key, bool def,
               std::vector<std::string>& errors) {
    if (!s || !s->contains(key)) return def;
    const json& v = s->at(key);
    if (!v.is_boolean()) {
        errors.push_back(path + key + ": expected a boolean");
        return def;
    }
    return v.get<bool>();
}

template <typename T>
std::vector<T> take_array(const json* s, const std::string& path, const char* key,
                          std::vector<T> def, bool integers, std::vector<std::string>& errors) {
    if (!s || !s->contains(key)) return def;
    const json& v = s->at(key);
    if (!v.is_array()) {
        errors.push_back(path + key + ": expected an array");
        return def;
    }
    std::vector<T> out;
    for (const json& e : v) {
        if (integers ? !e.is_number_integer() : !e.is_number()) {
            errors.push_back(path + key + ": expected " +
                             (integers ? "integer entries" : "numeric entries"));
            return def;
        }
        out.push_back(e.get<T>());
    }
    return out;
}

json effective_json(const PipelineConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["data"] = {{"cdr", c.data.cdr},
                 {"ccr", c.data.ccr},
                 {"towers", c.data.towers},
                 {"pois", c.data.pois},
                 {"amount_buckets",
                  c.data.amount_buckets ? json(*c.data.amount_buckets) : json(nullptr)}};
    j["lda"] = {{"behaviors", c.lda.behaviors},
                {"alpha", c.lda.alpha},
                {"beta", c.lda.beta},
                {"train_iterations", c.lda.train_iterations},
                {"infer_iterations", c.lda.infer_iterations},
                {"train_fraction", c.lda.train_fraction}};
    j["geo"] = {{"classes", c.geo.classes},
                {"poi_threshold", c.geo.poi_threshold},
                {"class_train_iterations", c.geo.class_train_iterations},
                {"provider", c.geo.provider},
                {"http",
                 {{"url_template", c.geo.http.url_template},
                  {"api_key_env", c.geo.http.api_key_env},
                  {"max_retries", c.geo.http.max_retries},
                  {"rate_limit_per_sec", c.geo.http.rate_limit_per_sec},
                  {"timeout_ms", c.geo.http.timeout_ms}}}};
    j["features"] = json::object();
    j["cmf"] = {{"rank", c.cmf.model.rank},
                {"lambda_u", c.cmf.model.lambda_u},
                {"lambda_s", c.cmf.model.lambda_s},
                {"lambda_m", c.cmf.model.lambda_m},
                {"gamma_s", c.cmf.model.gamma_s},
                {"gamma_m", c.cmf.model.gamma_m},
                {"tol", c.cmf.model.tol},
                {"max_iter", c.cmf.model.max_iter},
                {"clamp_predictions", c.cmf.model.clamp_predictions},
                {"folds", c.cmf.folds},
                {"rank_grid", c.cmf.rank_grid}};
    j["baselines"] = {{"lambda_grid", c.baselines.lambda_grid},
                      {"folds", c.baselines.folds},
                      {"ridge", c.baselines.ridge},
                      {"logistic_max_iter", c.baselines.logistic_max_iter}};
    j["synth"] = {{"n", c.synth.n},
                  {"p", c.synth.p},
                  {"d", c.synth.d},
                  {"K", c.synth.K},
                  {"r", c.synth.r},
                  {"noise_sigma", c.synth.noise_sigma},
                  {"private_factors_s", c.synth.private_factors_s},
                  {"private_factors_m", c.synth.private_factors_m}};
    return j;
}

// ---------- artifact plumbing ----------

fs::path resolve(const fs::path& out_dir, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : out_dir / path;
}

std::string artifact_label(const fs::path& p, const fs::path& out_dir) {
    std::error_code ec;
    fs::path canon = fs::weakly_canonical(p, ec);
    if (ec) canon = p.lexically_normal();
    fs::path root = fs::weakly_canonical(out_dir, ec);
    if (ec) root = out_dir.lexically_normal();
    fs::path rel = canon.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") return canon.generic_string();
    return rel.generic_string();
}

class Manifest {
  public:
    Manifest(std::string stage, const PipelineConfig& config, const fs::path& out_dir)
        : stage_(std::move(stage)),
          seed_(derive_seed(config.seed, stage_)),
          config_hash_(io::sha256_hex(config.canonical)),
          out_dir_(out_dir) {
        fs::create_directories(out_dir);
    }

    std::uint64_t seed() const { return seed_; }

    fs::path need(const std::string& rel_or_abs, const std::string& producer) {
        fs::path p = resolve(out_dir_, rel_or_abs);
        if (!fs::exists(p))
            throw MissingInput("missing input " + artifact_label(p, out_dir_) + "; run the `" +
                               producer + "` stage first");
        inputs_.push_back(p);
        return p;
    }

    fs::path out(const std::string& rel) {
        fs::path p = out_dir_ / rel;
        fs::create_directories(p.parent_path());
        outputs_.push_back(p);
        return p;
    }

    void write() const {
        json j;
        j["stage"] = stage_;
        j["seed"] = seed_;
        j["config_hash"] = config_hash_;
        json in = json::object(), out = json::object();
        for (const auto& p : inputs_) in[artifact_label(p, out_dir_)] = io::sha256_file(p);
        for (const auto& p : outputs_) out[artifact_label(p, out_dir_)] = io::sha256_file(p);
        j["inputs"] = std::move(in);
        j["outputs"] = std::move(out);
        io::write_text_file(out_dir_ / ("manifest_" + stage_ + ".json"), j.dump(2) + "\n");
    }

  private:
    std::string stage_;
    std::uint64_t seed_;
    std::string config_hash_;
    fs::path out_dir_;
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
};

std::vector<std::string> read_id_column(const fs::path& path, const std::string& header) {
    io::CsvTable t = io::read_csv(path);
    if (t.header != std::vector<std::string>{header})
        throw std::runtime_error(path.string() + ": expected header `" + header + "`");
    std::vector<std::string> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        if (row.size() != 1)
            throw std::runtime_error(path.string() + ": expected one field per row");
        out.push_back(row[0]);
    }
    return out;
}

void write_id_column(const fs::path& path, const std::string& header,
                     const std::vector<std::string>& ids) {
    std::string text = header + "\n";
    for (const auto& id : ids) text += id + "\n";
    io::write_text_file(path, text);
}

double parse_number(const std::string& s, const fs::path& path) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ": malformed number `" + s + "`");
    }
}

Eigen::MatrixXd dense_counts(const SparseCountMatrix& W) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(W.rows(), W.cols());
    for (int i = 0; i < W.rows(); ++i)
        for (const auto& [j, v] : W.row(i)) X(i, j) = static_cast<double>(v);
    return X;
}

std::vector<std::string> numbered_headers(const std::string& prefix, int count) {
    std::vector<std::string> h;
    h.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) h.push_back(prefix + std::to_string(i));
    return h;
}

struct UserMatrices {
    std::vector<std::string> users;
    Eigen::MatrixXd S;
    Eigen::MatrixXd M;
};

UserMatrices load_s_and_m(Manifest& m) {
    fs::path s_path = m.need("s_matrix.csv", "lda-shopping");
    fs::path m_path = m.need("m_matrix.csv", "features");
    io::DenseWithIds S = io::read_dense_with_ids(s_path);
    io::DenseWithIds M = io::read_dense_with_ids(m_path);
    if (S.ids != M.ids)
        throw std::runtime_error("s_matrix.csv and m_matrix.csv disagree on user order");
    return {std::move(S.ids), std::move(S.matrix), std::move(M.matrix)};
}

}  // namespace

PipelineConfig default_config() {
    PipelineConfig c;
    refresh_canonical(c);
    return c;
}

void refresh_canonical(PipelineConfig& config) { config.canonical = effective_json(config).dump(2); }

PipelineConfig parse_config_text(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");

    PipelineConfig c;
    std::vector<std::string> errors;

    check_known_keys(root, "",
                     {"seed", "data", "lda", "geo", "features", "cmf", "baselines", "synth"},
                     errors);

    if (root.contains("seed")) {
        const json& v = root.at("seed");
        if (v.is_number_unsigned())
            c.seed = v.get<std::uint64_t>();
        else if (v.is_number_integer())
            errors.push_back("seed: must be >= 0");
        else
            errors.push_back("seed: expected an integer");
    }

    if (const json* s = section(root, "data", errors)) {
        check_known_keys(*s, "data.", {"cdr", "ccr", "towers", "pois", "amount_buckets"}, errors);
        c.data.cdr = take_string(s, "data.", "cdr", c.data.cdr, errors);
        c.data.ccr = take_string(s, "data.", "ccr", c.data.ccr, errors);
        c.data.towers = take_string(s, "data.", "towers", c.data.towers, errors);
        c.data.pois = take_string(s, "data.", "pois", c.data.pois, errors);
        if (s->contains("amount_buckets") && !s->at("amount_buckets").is_null()) {
            int b = take_int(s, "data.", "amount_buckets", 0, errors);
            if (b < 2)
                errors.push_back("data.amount_buckets: must be >= 2 (or null to disable)");
            else
                c.data.amount_buckets = b;
        }
        for (const auto& [key, val] : std::initializer_list<std::pair<const char*, std::string>>{
                 {"cdr", c.data.cdr}, {"ccr", c.data.ccr}, {"towers", c.data.towers},
                 {"pois", c.data.pois}})
            if (val.empty()) errors.push_back(std::string("data.") + key + ": must not be empty");
    }

    if (const json* s = section(root, "lda", errors)) {
        check_known_keys(*s, "lda.",
                         {"behaviors", "alpha", "beta", "train_iterations", "infer_iterations",
                          "train_fraction"},
                         errors);
        c.lda.behaviors = take_int(s, "lda.", "behaviors", c.lda.behaviors, errors);
        c.lda.alpha = take_double(s, "lda.", "alpha", c.lda.alpha, errors);
        c.lda.beta = take_double(s, "lda.", "beta", c.lda.beta, errors);
        c.lda.train_iterations = take_int(s, "lda.", "train_iterations", c.lda.train_iterations,
                                          errors);
        c.lda.infer_iterations = take_int(s, "lda.", "infer_iterations", c.lda.infer_iterations,
                                          errors);
        c.lda.train_fraction = take_double(s, "lda.", "train_fraction", c.lda.train_fraction,
                                           errors);
        if (c.lda.behaviors < 1) errors.push_back("lda.behaviors: must be >= 1");
        if (c.lda.alpha == 0.0)
            errors.push_back("lda.alpha: must be > 0 (or negative to select the 50/K default)");
        if (!(c.lda.beta > 0)) errors.push_back("lda.beta: must be > 0");
        if (c.lda.train_iterations < 1) errors.push_back("lda.train_iterations: must be >= 1");
        if (c.lda.infer_iterations < 1) errors.push_back("lda.infer_iterations: must be >= 1");
        if (!(c.lda.train_fraction > 0.0 && c.lda.train_fraction <= 1.0))
            errors.push_back("lda.train_fraction: must be in (0, 1]");
    }

    if (const json* s = section(root, "geo", errors)) {
        check_known_keys(*s, "geo.",
                         {"classes", "poi_threshold", "class_train_iterations", "provider",
                          "http"},
                         errors);
        c.geo.classes = take_int(s, "geo.", "classes", c.geo.classes, errors);
        c.geo.poi_threshold = take_double(s, "geo.", "poi_threshold", c.geo.poi_threshold, errors);
        c.geo.class_train_iterations = take_int(s, "geo.", "class_train_iterations",
                                                c.geo.class_train_iterations, errors);
        c.geo.provider = take_string(s, "geo.", "provider", c.geo.provider, errors);
        if (s->contains("http")) {
            if (!s->at("http").is_object()) {
                errors.push_back("geo.http: expected an object");
            } else {
                const json* h = &s->at("http");
                check_known_keys(*h, "geo.http.",
                                 {"url_template", "api_key_env", "max_retries",
                                  "rate_limit_per_sec", "timeout_ms"},
                                 errors);
                c.geo.http.url_template = take_string(h, "geo.http.", "url_template",
                                                      c.geo.http.url_template, errors);
                c.geo.http.api_key_env = take_string(h, "geo.http.", "api_key_env",
                                                     c.geo.http.api_key_env, errors);
                c.geo.http.max_retries = take_int(h, "geo.http.", "max_retries",
                                                  c.geo.http.max_retries, errors);
                c.geo.http.rate_limit_per_sec = take_double(h, "geo.http.", "rate_limit_per_sec",
                                                            c.geo.http.rate_limit_per_sec, errors);
                c.geo.http.timeout_ms = take_int(h, "geo.http.", "timeout_ms",
                                                 c.geo.http.timeout_ms, errors);
            }
        }
        if (c.geo.classes < 1) errors.push_back("geo.classes: must be >= 1");
        if (!(c.geo.poi_threshold > 0.0 && c.geo.poi_threshold <= 1.0))
            errors.push_back("geo.poi_threshold: must be in (0, 1]");
        if (c.geo.class_train_iterations < 1)
            errors.push_back("geo.class_train_iterations: must be >= 1");
        if (c.geo.provider != "file" && c.geo.provider != "http")
            errors.push_back("geo.provider: must be \"file\" or \"http\"");
        if (c.geo.provider == "http") {
            if (c.geo.http.url_template.empty())
                errors.push_back("geo.http.url_template: required when geo.provider is \"http\"");
            if (c.geo.http.max_retries < 0) errors.push_back("geo.http.max_retries: must be >= 0");
            if (!(c.geo.http.rate_limit_per_sec > 0))
                errors.push_back("geo.http.rate_limit_per_sec: must be > 0");
            if (c.geo.http.timeout_ms < 1) errors.push_back("geo.http.timeout_ms: must be >= 1");
        }
    }

    if (const json* s = section(root, "features", errors))
        check_known_keys(*s, "features.", {}, errors);

    if (const json* s = section(root, "cmf", errors)) {
        check_known_keys(*s, "cmf.",
                         {"rank", "lambda_u", "lambda_s", "lambda_m", "gamma_s", "gamma_m", "tol",
                          "max_iter", "clamp_predictions", "folds", "rank_grid"},
                         errors);
        c.cmf.model.rank = take_int(s, "cmf.", "rank", c.cmf.model.rank, errors);
        c.cmf.model.lambda_u = take_double(s, "cmf.", "lambda_u", c.cmf.model.lambda_u, errors);
        c.cmf.model.lambda_s = take_double(s, "cmf.", "lambda_s", c.cmf.model.lambda_s, errors);
        c.cmf.model.lambda_m = take_double(s, "cmf.", "lambda_m", c.cmf.model.lambda_m, errors);
        c.cmf.model.gamma_s = take_double(s, "cmf.", "gamma_s", c.cmf.model.gamma_s, errors);
        c.cmf.model.gamma_m = take_double(s, "cmf.", "gamma_m", c.cmf.model.gamma_m, errors);
        c.cmf.model.tol = take_double(s, "cmf.", "tol", c.cmf.model.tol, errors);
        c.cmf.model.max_iter = take_int(s, "cmf.", "max_iter", c.cmf.model.max_iter, errors);
        c.cmf.model.clamp_predictions = take_bool(s, "cmf.", "clamp_predictions",
                                                  c.cmf.model.clamp_predictions, errors);
        c.cmf.folds = take_int(s, "cmf.", "folds", c.cmf.folds, errors);
        c.cmf.rank_grid = take_array<int>(s, "cmf.", "rank_grid", c.cmf.rank_grid, true, errors);
        if (c.cmf.model.rank < 1) errors.push_back("cmf.rank: must be >= 1");
        if (c.cmf.model.lambda_u < 0 || c.cmf.model.lambda_s < 0 || c.cmf.model.lambda_m < 0)
            errors.push_back("cmf.lambda_u/lambda_s/lambda_m: must be >= 0");
        if (c.cmf.model.gamma_s < 0 || c.cmf.model.gamma_m < 0)
            errors.push_back("cmf.gamma_s/gamma_m: must be >= 0");
        if (!(c.cmf.model.tol > 0)) errors.push_back("cmf.tol: must be > 0");
        if (c.cmf.model.max_iter < 1) errors.push_back("cmf.max_iter: must be >= 1");
        if (c.cmf.folds < 2) errors.push_back("cmf.folds: must be >= 2");
        for (int r : c.cmf.rank_grid)
            if (r < 1) {
                errors.push_back("cmf.rank_grid: entries must be >= 1");
                break;
            }
    }

    if (const json* s = section(root, "baselines", errors)) {
        check_known_keys(*s, "baselines.", {"lambda_grid", "folds", "ridge", "logistic_max_iter"},
                         errors);
        c.baselines.lambda_grid = take_array<double>(s, "baselines.", "lambda_grid",
                                                     c.baselines.lambda_grid, false, errors);
        c.baselines.folds = take_int(s, "baselines.", "folds", c.baselines.folds, errors);
        c.baselines.ridge = take_double(s, "baselines.", "ridge", c.baselines.ridge, errors);
        c.baselines.logistic_max_iter = take_int(s, "baselines.", "logistic_max_iter",
                                                 c.baselines.logistic_max_iter, errors);
        if (c.baselines.lambda_grid.empty())
            errors.push_back("baselines.lambda_grid: must not be empty");
        for (double l : c.baselines.lambda_grid)
            if (l < 0) {
                errors.push_back("baselines.lambda_grid: entries must be >= 0");
                break;
            }
        if (c.baselines.folds < 2) errors.push_back("baselines.folds: must be >= 2");
        if (c.baselines.ridge < 0) errors.push_back("baselines.ridge: must be >= 0");
        if (c.baselines.logistic_max_iter < 1)
            errors.push_back("baselines.logistic_max_iter: must be >= 1");
    }

    if (const json* s = section(root, "synth", errors)) {
        check_known_keys(*s, "synth.",
                         {"n", "p", "d", "K", "r", "noise_sigma", "private_factors_s",
                          "private_factors_m"},
                         errors);
        c.synth.n = take_int(s, "synth.", "n", c.synth.n, errors);
        c.synth.p = take_int(s, "synth.", "p", c.synth.p, errors);
        c.synth.d = take_int(s, "synth.", "d", c.synth.d, errors);
        c.synth.K = take_int(s, "synth.", "K", c.synth.K, errors);
        c.synth.r = take_int(s, "synth.", "r", c.synth.r, errors);
        c.synth.noise_sigma = take_double(s, "synth.", "noise_sigma", c.synth.noise_sigma, errors);
        c.synth.private_factors_s = take_array<int>(s, "synth.", "private_factors_s",
                                                    c.synth.private_factors_s, true, errors);
        c.synth.private_factors_m = take_array<int>(s, "synth.", "private_factors_m",
                                                    c.synth.private_factors_m, true, errors);
        if (c.synth.n < 1 || c.synth.p < 1 || c.synth.d < 1 || c.synth.K < 1 || c.synth.r < 1)
            errors.push_back("synth.n/p/d/K/r: all dimensions must be >= 1");
        else if (c.synth.r > std::min(c.synth.K, c.synth.d))
            errors.push_back("synth.r: must be <= min(K, d)");
        if (c.synth.noise_sigma < 0) errors.push_back("synth.noise_sigma: must be >= 0");
        std::set<int> seen;
        bool private_ok = true;
        for (const auto* set : {&c.synth.private_factors_s, &c.synth.private_factors_m})
            for (int k : *set)
                if (k < 0 || (c.synth.r >= 1 && k >= c.synth.r) || !seen.insert(k).second)
                    private_ok = false;
        if (!private_ok)
            errors.push_back(
                "synth.private_factors_s/private_factors_m: must be disjoint subsets of "
                "0..r-1");
    }

    if (!errors.empty()) {
        std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem" +
                          (errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }

    refresh_canonical(c);
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = io::read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    return parse_config_text(text);
}

// ---------- stages ----------

void run_synth(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("synth", config, out_dir);
    synth::SynthConfig sc = config.synth;
    sc.seed = m.seed();
    synth::SynthData data = synth::generate(sc);
    m.out("data/towers.csv");
    m.out("data/pois.csv");
    m.out("data/cdr.csv");
    m.out("data/ccr.csv");
    m.out("data/ground_truth.json");
    synth::write_fixtures(data, out_dir / "data");
    m.write();
}

void run_ingest(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("ingest", config, out_dir);
    fs::path towers_path = m.need(config.data.towers, "synth");
    fs::path cdr_path = m.need(config.data.cdr, "synth");
    fs::path ccr_path = m.need(config.data.ccr, "synth");

    geo::TowerTable towers = geo::read_towers(towers_path);
    std::unordered_set<std::string> known(towers.ids.begin(), towers.ids.end());

    std::ifstream cdr_in(cdr_path);
    ingest::ParseResult<ingest::CdrEvent> cdr = ingest::parse_cdr(cdr_in, &known);
    std::ifstream ccr_in(ccr_path);
    ingest::ParseResult<ingest::CcrEvent> ccr = ingest::parse_ccr(ccr_in);

    ingest::Dataset ds = ingest::build_dataset(cdr.events, ccr.events, towers.ids,
                                               config.data.amount_buckets);
    if (ds.users.empty()) throw std::runtime_error("ingest: the logs contain no users");
    std::vector<double> spend = ingest::average_weekly_spend(ccr.events, ds.users);

    write_id_column(m.out("users.csv"), "user_id", ds.users);
    io::write_sparse_triplets(m.out("visit_matrix.csv"), ds.visit_counts, ds.users, ds.towers);
    io::write_sparse_triplets(m.out("mcc_documents.csv"), ds.mcc_counts, ds.users, ds.mccs);
    write_id_column(m.out("mcc_vocabulary.csv"), "token", ds.mccs);
    {
        std::string text = "user_id,weekly_spend\n";
        for (std::size_t i = 0; i < ds.users.size(); ++i)
            text += ds.users[i] + "," + io::format_double(spend[i]) + "\n";
        io::write_text_file(m.out("weekly_spend.csv"), text);
    }
    json summary;
    summary["users"] = ds.users.size();
    summary["towers"] = ds.towers.size();
    summary["mcc_tokens"] = ds.mccs.size();
    summary["cdr_events"] = cdr.events.size();
    summary["ccr_events"] = ccr.events.size();
    summary["cdr_malformed_rows"] = cdr.errors.size();
    summary["ccr_malformed_rows"] = ccr.errors.size();
    summary["cdr_unknown_tower_rows"] = cdr.skipped_unknown;
    summary["visit_zero_fraction"] = ds.visit_counts.zero_fraction();
    io::write_text_file(m.out("ingest_summary.json"), summary.dump(2) + "\n");
    m.write();
}

void run_lda_shopping(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("lda-shopping", config, out_dir);
    fs::path users_path = m.need("users.csv", "ingest");
    fs::path docs_path = m.need("mcc_documents.csv", "ingest");
    fs::path vocab_path = m.need("mcc_vocabulary.csv", "ingest");

    std::vector<std::string> users = read_id_column(users_path, "user_id");
    std::vector<std::string> vocab = read_id_column(vocab_path, "token");
    io::SparseTriplets docs = io::read_sparse_triplets(docs_path, &users, &vocab);

    const int n = static_cast<int>(users.size());
    const int K = config.lda.behaviors;
    int n_train = static_cast<int>(std::llround(config.lda.train_fraction * n));
    n_train = std::clamp(n_train, 1, n);

    std::vector<int> order = shuffled_indices(n, derive_seed(m.seed(), "split"));
    std::vector<int> train_idx(order.begin(), order.begin() + n_train);
    std::vector<int> infer_idx(order.begin() + n_train, order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(infer_idx.begin(), infer_idx.end());

    auto subset_rows = [&](const std::vector<int>& rows) {
        SparseCountMatrix sub(static_cast<int>(rows.size()), docs.matrix.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (const auto& [c, v] : docs.matrix.row(rows[i]))
                sub.add(static_cast<int>(i), c, v);
        return sub;
    };

    lda::TrainConfig tc;
    tc.topics = K;
    tc.alpha = config.lda.alpha;
    tc.beta = config.lda.beta;
    tc.iterations = config.lda.train_iterations;
    tc.seed = derive_seed(m.seed(), "train");
    lda::TopicModel model = lda::train(subset_rows(train_idx), vocab, tc);

    Eigen::MatrixXd S(n, K);
    for (std::size_t i = 0; i < train_idx.size(); ++i)
        S.row(train_idx[i]) = model.theta.row(static_cast<Eigen::Index>(i));
    long long dropped = 0;
    int all_oov = 0;
    if (!infer_idx.empty()) {
        lda::InferResult inf = lda::infer(model, subset_rows(infer_idx), vocab,
                                          config.lda.infer_iterations,
                                          derive_seed(m.seed(), "infer"));
        for (std::size_t i = 0; i < infer_idx.size(); ++i)
            S.row(infer_idx[i]) = inf.theta.row(static_cast<Eigen::Index>(i));
        dropped = inf.dropped_tokens;
        for (char flag : inf.all_oov) all_oov += flag ? 1 : 0;
    }

    lda::save_json(model, m.out("shopping_model.json"));
    io::write_dense_with_ids(m.out("s_matrix.csv"), "user_id", numbered_headers("behavior_", K),
                             users, S);
    std::vector<std::string> train_users;
    train_users.reserve(train_idx.size());
    for (int i : train_idx) train_users.push_back(users[static_cast<std::size_t>(i)]);
    write_id_column(m.out("train_users.csv"), "user_id", train_users);
    json summary;
    summary["train_users"] = train_idx.size();
    summary["infer_users"] = infer_idx.size();
    summary["dropped_tokens"] = dropped;
    summary["all_oov_users"] = all_oov;
    io::write_text_file(m.out("lda_summary.json"), summary.dump(2) + "\n");
    m.write();
}

void run_towers(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("towers", config, out_dir);
    fs::path towers_path = m.need(config.data.towers, "synth");

    geo::TowerTable table = geo::read_towers(towers_path);
    std::vector<geo::TowerSite> sites = geo::project_sites(table);
    geo::Triangulation tri = geo::delaunay(sites);

    const int p = static_cast<int>(sites.size());
    std::vector<double> radius(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) radius[static_cast<std::size_t>(i)] = geo::crawl_radius(tri, i);

    std::unique_ptr<geo::PoiProvider> provider;
    if (config.geo.provider == "file") {
        fs::path pois_path = m.need(config.data.pois, "synth");
        provider = std::make_unique<geo::FilePoiProvider>(pois_path);
    } else {
        provider = std::make_unique<geo::HttpPoiProvider>(config.geo.http);
    }

    std::vector<std::vector<std::string>> docs(static_cast<std::size_t>(p));
    std::vector<std::string> missing;
    for (int i = 0; i < p; ++i) {
        geo::PoiResult res = geo::fetch_pois(*provider, tri.sites[static_cast<std::size_t>(i)],
                                             radius[static_cast<std::size_t>(i)]);
        if (!res.found) missing.push_back(tri.sites[static_cast<std::size_t>(i)].tower_id);
        docs[static_cast<std::size_t>(i)] = std::move(res.categories);
    }

    geo::PoiFilterResult filtered = geo::filter_frequent_categories(docs,
                                                                    config.geo.poi_threshold);

    lda::TrainConfig tc;
    tc.topics = config.geo.classes;
    tc.iterations = config.geo.class_train_iterations;
    tc.seed = derive_seed(m.seed(), "classes");
    lda::TopicModel class_model;
    geo::TowerClassMatrix classes = geo::tower_classes(filtered.docs, config.geo.classes, tc,
                                                       &class_model);

    {
        std::string text = "tower_a,tower_b\n";
        for (const auto& [a, b] : tri.edges)
            text += sites[static_cast<std::size_t>(a)].tower_id + "," +
                    sites[static_cast<std::size_t>(b)].tower_id + "\n";
        io::write_text_file(m.out("edges.csv"), text);
    }
    {
        std::string text = "tower_id,radius_m\n";
        for (int i = 0; i < p; ++i)
            text += sites[static_cast<std::size_t>(i)].tower_id + "," +
                    io::format_double(radius[static_cast<std::size_t>(i)]) + "\n";
        io::write_text_file(m.out("crawl_radius.csv"), text);
    }
    io::write_dense_with_ids(m.out("tower_classes.csv"), "tower_id",
                             numbered_headers("class_", config.geo.classes), table.ids, classes.C);
    lda::save_json(class_model, m.out("class_model.json"));

    int duplicates = 0;
    for (int i = 0; i < p; ++i)
        if (tri.canonical[static_cast<std::size_t>(i)] != i) ++duplicates;
    std::sort(missing.begin(), missing.end());
    json summary;
    summary["towers"] = p;
    summary["duplicate_sites"] = duplicates;
    summary["delaunay_edges"] = tri.edges.size();
    summary["missing_pois"] = missing;
    summary["removed_categories"] = filtered.removed;
    summary["vocabulary_size"] = filtered.vocabulary.size();
    io::write_text_file(m.out("poi_summary.json"), summary.dump(2) + "\n");
    m.write();
}

void run_features(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("features", config, out_dir);
    fs::path users_path = m.need("users.csv", "ingest");
    fs::path visits_path = m.need("visit_matrix.csv", "ingest");
    fs::path towers_path = m.need(config.data.towers, "synth");
    fs::path classes_path = m.need("tower_classes.csv", "towers");

    std::vector<std::string> users = read_id_column(users_path, "user_id");
    geo::TowerTable table = geo::read_towers(towers_path);
    io::SparseTriplets W = io::read_sparse_triplets(visits_path, &users, &table.ids);
    io::DenseWithIds classes = io::read_dense_with_ids(classes_path);
    if (classes.ids != table.ids)
        throw std::runtime_error(
            "tower_classes.csv rows do not match the tower registry; re-run the `towers` stage");

    features::TfidfResult tf = features::tfidf(W.matrix);
    Eigen::MatrixXd C_kept(static_cast<Eigen::Index>(tf.kept_columns.size()),
                           classes.matrix.cols());
    for (std::size_t k = 0; k < tf.kept_columns.size(); ++k)
        C_kept.row(static_cast<Eigen::Index>(k)) = classes.matrix.row(tf.kept_columns[k]);
    Eigen::MatrixXd M = features::mobility_matrix(tf.weights, C_kept);

    io::write_dense_with_ids(m.out("m_matrix.csv"), "user_id",
                             numbered_headers("class_", static_cast<int>(M.cols())), users, M);
    {
        std::string text = "column,tower_id\n";
        for (int col : tf.kept_columns)
            text += std::to_string(col) + "," + table.ids[static_cast<std::size_t>(col)] + "\n";
        io::write_text_file(m.out("tfidf_columns.csv"), text);
    }
    m.write();
}

void run_cmf_fit(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("cmf-fit", config, out_dir);
    UserMatrices um = load_s_and_m(m);

    cmf::CmfConfig cc = config.cmf.model;
    cc.seed = m.seed();
    cmf::RowMask mask;
    mask.observed.resize(static_cast<std::size_t>(um.S.rows()));
    for (int i = 0; i < um.S.rows(); ++i) mask.observed[static_cast<std::size_t>(i)] = i;
    cmf::CmfModel model = cmf::fit(um.S, um.M, mask, cc);

    cmf::save_json(model, cc, m.out("cmf_model.json"));
    {
        Eigen::VectorXd ns = cmf::group_norms(model.Vs);
        Eigen::VectorXd nm = cmf::group_norms(model.Vm);
        std::string text = "view,factor,norm\n";
        for (Eigen::Index k = 0; k < ns.size(); ++k)
            text += "shopping," + std::to_string(k) + "," + io::format_double(ns[k]) + "\n";
        for (Eigen::Index k = 0; k < nm.size(); ++k)
            text += "mobility," + std::to_string(k) + "," + io::format_double(nm[k]) + "\n";
        io::write_text_file(m.out("group_norms.csv"), text);
    }
    m.write();
}

void run_cmf_cv(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("cmf-cv", config, out_dir);
    UserMatrices um = load_s_and_m(m);

    cmf::CvResult res = cmf::cross_validate(um.S, um.M, config.cmf.model, config.cmf.rank_grid,
                                            config.cmf.folds, m.seed());

    {
        std::string text = "fold,rank,rmse\n";
        for (const auto& cell : res.table)
            text += std::to_string(cell.fold) + "," + std::to_string(cell.rank) + "," +
                    io::format_double(cell.rmse) + "\n";
        io::write_text_file(m.out("cv_report.csv"), text);
    }
    json sel;
    sel["selected_rank"] = res.selected_rank;
    sel["ranks"] = res.ranks;
    sel["mean_rmse"] = res.mean_rmse;
    io::write_text_file(m.out("selected_rank.json"), sel.dump(2) + "\n");
    m.write();
}

void run_compare_views(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("compare-views", config, out_dir);
    UserMatrices um = load_s_and_m(m);

    cmf::CompareViewsResult res = cmf::compare_views(um.S, um.M, config.cmf.model,
                                                     config.cmf.folds, m.seed());
    json j;
    j["rmse_joint"] = res.rmse_joint;
    j["rmse_shopping_only"] = res.rmse_shopping_only;
    j["relative_change"] = res.relative_change;
    io::write_text_file(m.out("compare_views.json"), j.dump(2) + "\n");
    m.write();
}

void run_baselines(const PipelineConfig& config, const fs::path& out_dir) {
    Manifest m("baselines", config, out_dir);
    fs::path users_path = m.need("users.csv", "ingest");
    fs::path visits_path = m.need("visit_matrix.csv", "ingest");
    fs::path towers_path = m.need(config.data.towers, "synth");
    fs::path spend_path = m.need("weekly_spend.csv", "ingest");
    fs::path s_path = m.need("s_matrix.csv", "lda-shopping");

    std::vector<std::string> users = read_id_column(users_path, "user_id");
    geo::TowerTable table = geo::read_towers(towers_path);
    io::SparseTriplets W = io::read_sparse_triplets(visits_path, &users, &table.ids);
    Eigen::MatrixXd X = dense_counts(W.matrix);

    io::CsvTable spend_csv = io::read_csv(spend_path);
    if (spend_csv.header != std::vector<std::string>{"user_id", "weekly_spend"})
        throw std::runtime_error(spend_path.string() +
                                 ": expected header `user_id,weekly_spend`");
    if (spend_csv.rows.size() != users.size())
        throw std::runtime_error("weekly_spend.csv row count does not match users.csv");
    Eigen::VectorXd y(static_cast<Eigen::Index>(users.size()));
    for (std::size_t i = 0; i < spend_csv.rows.size(); ++i) {
        if (spend_csv.rows[i].size() != 2 || spend_csv.rows[i][0] != users[i])
            throw std::runtime_error("weekly_spend.csv user order does not match users.csv");
        y[static_cast<Eigen::Index>(i)] = parse_number(spend_csv.rows[i][1], spend_path);
    }

    io::DenseWithIds S = io::read_dense_with_ids(s_path);
    if (S.ids != users)
        throw std::runtime_error("s_matrix.csv user order does not match users.csv");
    std::vector<int> labels(users.size());
    for (std::size_t i = 0; i < users.size(); ++i)
        labels[i] = baselines::primary_behavior(S.matrix.row(static_cast<Eigen::Index>(i)));

    std::vector<baselines::LassoReportRow> lasso = baselines::lasso_regression(
        X, y, config.baselines.lambda_grid, config.baselines.folds,
        derive_seed(m.seed(), "lasso"));
    {
        std::string text = "lambda,r2_train,r2_test,nnz\n";
        for (const auto& row : lasso)
            text += io::format_double(row.lambda) + "," + io::format_double(row.r2_train) + "," +
                    io::format_double(row.r2_test) + "," + std::to_string(row.nnz) + "\n";
        io::write_text_file(m.out("lasso_report.csv"), text);
    }

    baselines::ClassifyConfig ccfg;
    ccfg.folds = config.baselines.folds;
    ccfg.ridge = config.baselines.ridge;
    ccfg.max_iter = config.baselines.logistic_max_iter;
    ccfg.seed = derive_seed(m.seed(), "classify");
    baselines::ClassifyResult cls = baselines::classify_primary(X, labels, ccfg);
    {
        std::string text = "classifier,fold,accuracy\n";
        for (std::size_t f = 0; f < cls.majority_accuracy.size(); ++f)
            text += "majority," + std::to_string(f) + "," +
                    io::format_double(cls.majority_accuracy[f]) + "\n";
        for (std::size_t f = 0; f < cls.logistic_accuracy.size(); ++f)
            if (!cls.logistic_skipped[f])
                text += "logistic," + std::to_string(f) + "," +
                        io::format_double(cls.logistic_accuracy[f]) + "\n";
        io::write_text_file(m.out("classify_report.csv"), text);
    }
    json summary;
    summary["majority_pooled_accuracy"] = cls.majority_pooled_accuracy;
    summary["logistic_pooled_accuracy"] = cls.logistic_pooled_accuracy;
    summary["majority_frequency"] = cls.majority_frequency;
    json skipped = json::array();
    for (std::size_t f = 0; f < cls.logistic_skipped.size(); ++f)
        if (cls.logistic_skipped[f]) skipped.push_back(f);
    summary["logistic_skipped_folds"] = std::move(skipped);
    io::write_text_file(m.out("classify_summary.json"), summary.dump(2) + "\n");
    m.write();
}

void run_report(const PipelineConfig& config, const fs::path& out_dir, int top_k) {
    if (top_k < 1) throw ConfigError("report: top-k must be >= 1");
    Manifest m("report", config, out_dir);
    fs::path shopping_path = m.need("shopping_model.json", "lda-shopping");
    fs::path class_path = m.need("class_model.json", "towers");

    lda::TopicModel shopping = lda::load_json(shopping_path);
    lda::TopicModel classes = lda::load_json(class_path);

    auto table = [&](const lda::TopicModel& model, const char* unit_header,
                     const char* token_header) {
        std::string text = std::string(unit_header) + ",rank," + token_header + ",weight\n";
        for (int t = 0; t < model.K; ++t) {
            auto words = lda::top_words(model, t, top_k);
            for (std::size_t r = 0; r < words.size(); ++r)
                text += std::to_string(t) + "," + std::to_string(r + 1) + "," + words[r].first +
                        "," + io::format_double(words[r].second) + "\n";
        }
        return text;
    };
    io::write_text_file(m.out("behavior_top_words.csv"), table(shopping, "behavior", "token"));
    io::write_text_file(m.out("class_top_words.csv"), table(classes, "class", "category"));
    m.write();
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {
        "synth",    "ingest", "lda-shopping", "towers",        "features",
        "cmf-fit", "cmf-cv", "compare-views", "baselines",     "report"};
    return names;
}

void run_stage(const std::string& name, const PipelineConfig& config, const fs::path& out_dir,
               int top_k) {
    if (name == "synth") return run_synth(config, out_dir);
    if (name == "ingest") return run_ingest(config, out_dir);
    if (name == "lda-shopping") return run_lda_shopping(config, out_dir);
    if (name == "towers") return run_towers(config, out_dir);
    if (name == "features") return run_features(config, out_dir);
    if (name == "cmf-fit") return run_cmf_fit(config, out_dir);
    if (name == "cmf-cv") return run_cmf_cv(config, out_dir);
    if (name == "compare-views") return run_compare_views(config, out_dir);
    if (name == "baselines") return run_baselines(config, out_dir);
    if (name == "report") return run_report(config, out_dir, top_k);
    throw std::invalid_argument("unknown stage: " + name);
}

}  // namespace lifestyles::pipeline
