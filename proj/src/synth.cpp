#include "lifestyles/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>
#include <string>

#include "lifestyles/io.hpp"
#include "lifestyles/rng.hpp"

namespace lifestyles::synth {

namespace {

// 2026-01-01T00:00:00Z; all synthetic activity falls in the 150 days after this.
constexpr std::int64_t kBaseEpoch = 1767225600;
constexpr int kWindowDays = 150;

std::string padded_id(char prefix, int index, int count) {
    std::size_t width = 1;
    for (int v = count - 1; v >= 10; v /= 10) ++width;
    width = std::max<std::size_t>(width, 3);  // zero-pad: lexicographic order == index order
    std::string digits = std::to_string(index);
    std::string id(1, prefix);
    id.append(width > digits.size() ? width - digits.size() : 0, '0');
    id += digits;
    return id;
}

void validate(const SynthConfig& c) {
    if (c.n < 1 || c.p < 1 || c.d < 1 || c.K < 1 || c.r < 1)
        throw std::invalid_argument("synth: all dimensions must be >= 1");
    if (c.r > std::min(c.K, c.d))
        throw std::invalid_argument("synth: rank " + std::to_string(c.r) +
                                    " exceeds min(behaviors, classes) = " +
                                    std::to_string(std::min(c.K, c.d)));
    if (!(c.noise_sigma >= 0.0))
        throw std::invalid_argument("synth: noise_sigma must be >= 0");
    std::vector<bool> taken(static_cast<std::size_t>(c.r), false);
    auto claim = [&](const std::vector<int>& set, const char* name) {
        for (int k : set) {
            if (k < 0 || k >= c.r)
                throw std::invalid_argument(std::string("synth: ") + name + " index " +
                                            std::to_string(k) + " outside [0, " +
                                            std::to_string(c.r) + ")");
            if (taken[static_cast<std::size_t>(k)])
                throw std::invalid_argument(std::string("synth: factor ") + std::to_string(k) +
                                            " listed twice across private sets");
            taken[static_cast<std::size_t>(k)] = true;
        }
    };
    claim(c.private_factors_s, "private_factors_s");
    claim(c.private_factors_m, "private_factors_m");
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

SynthData generate(const SynthConfig& config) {
    validate(config);
    const int n = config.n, p = config.p, d = config.d, K = config.K, r = config.r;
    Rng rng(config.seed);
    SynthData out;

    // Latent model. Draw order is part of the format: U* row-major, then Vs*, then Vm*,
    // then the planted columns are zeroed. Zeroing after drawing keeps the stream (and
    // hence S) identical whether or not a factor is planted null in the other view.
    out.u_star.resize(n, r);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < r; ++j) out.u_star(i, j) = std::fabs(rng.normal());
    out.vs_star.resize(K, r);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < r; ++j) out.vs_star(i, j) = rng.normal();
    out.vm_star.resize(d, r);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) out.vm_star(i, j) = rng.normal();
    for (int k : config.private_factors_m) out.vs_star.col(k).setZero();
    for (int k : config.private_factors_s) out.vm_star.col(k).setZero();
    out.private_factors_s = config.private_factors_s;
    out.private_factors_m = config.private_factors_m;

    // Shopping view: nonnegative behavior mixtures, one row per user, rows sum to 1
    // before noise.
    Eigen::MatrixXd S = (out.u_star * out.vs_star.transpose()).cwiseMax(0.0);
    for (int i = 0; i < n; ++i) {
        double z = S.row(i).sum();
        if (z > 0)
            S.row(i) /= z;
        else
            S.row(i).setConstant(1.0 / K);
    }
    out.s_pre_noise = S;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < K; ++j)
            S(i, j) = std::max(0.0, S(i, j) + config.noise_sigma * rng.normal());
    out.S = std::move(S);

    // Mobility view: nonnegative class affinities scaled to unit mean entry per row, so
    // rows are comparable across users (visit totals are an artifact of log length, not
    // lifestyle). A row that clamps to all zeros becomes flat.
    Eigen::MatrixXd M = (out.u_star * out.vm_star.transpose()).cwiseMax(0.0);
    for (int i = 0; i < n; ++i) {
        double z = M.row(i).sum();
        if (z > 0)
            M.row(i) *= static_cast<double>(d) / z;
        else
            M.row(i).setConstant(1.0);
    }
    out.M = std::move(M);

    out.users.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.users.push_back(padded_id('u', i, n));

    // Towers: p sites in a ~11 km square, class t mod d.
    out.towers.ids.reserve(static_cast<std::size_t>(p));
    out.tower_class.reserve(static_cast<std::size_t>(p));
    for (int t = 0; t < p; ++t) {
        out.towers.ids.push_back(padded_id('t', t, p));
        out.towers.lat.push_back(rng.uniform(-0.05, 0.05));
        out.towers.lon.push_back(rng.uniform(-0.05, 0.05));
        out.tower_class.push_back(t % d);
    }

    // POIs: mostly categories specific to the tower's class, plus a few ubiquitous ones
    // (present at most towers, so a document-frequency filter should drop them).
    out.pois.resize(static_cast<std::size_t>(p));
    for (int t = 0; t < p; ++t) {
        int count = 20 + static_cast<int>(rng.uniform_int(11));
        auto& cats = out.pois[static_cast<std::size_t>(t)];
        cats.reserve(static_cast<std::size_t>(count));
        for (int q = 0; q < count; ++q) {
            if (rng.uniform() < 0.9)
                cats.push_back("c" + std::to_string(out.tower_class[static_cast<std::size_t>(t)]) +
                               "_" + std::to_string(rng.uniform_int(5)));
            else
                cats.push_back("common_" + std::to_string(rng.uniform_int(3)));
        }
    }

    // Call log: each user visits a few towers, preferring towers whose class the user's
    // mobility row weights highly; each visited tower gets 1-4 distinct days.
    out.intended_visits.resize(n, p);
    std::vector<double> tower_weight(static_cast<std::size_t>(p));
    const std::uint64_t max_towers = std::min<std::uint64_t>(5, static_cast<std::uint64_t>(p));
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < p; ++t)
            tower_weight[static_cast<std::size_t>(t)] =
                out.M(i, out.tower_class[static_cast<std::size_t>(t)]) + 0.05;
        int ntow = 1 + static_cast<int>(rng.uniform_int(max_towers));
        std::vector<int> chosen;
        std::set<int> seen;
        while (static_cast<int>(chosen.size()) < ntow) {
            int t = static_cast<int>(rng.categorical(tower_weight));
            if (seen.insert(t).second) chosen.push_back(t);
        }
        for (int t : chosen) {
            int ndays = 1 + static_cast<int>(rng.uniform_int(4));
            std::set<int> days;
            while (static_cast<int>(days.size()) < ndays)
                days.insert(static_cast<int>(rng.uniform_int(kWindowDays)));
            for (int day : days) {
                std::int64_t sec = static_cast<std::int64_t>(rng.uniform_int(86400));
                out.cdr.push_back({out.users[static_cast<std::size_t>(i)],
                                   out.towers.ids[static_cast<std::size_t>(t)],
                                   kBaseEpoch + static_cast<std::int64_t>(day) * 86400 + sec});
            }
            out.intended_visits.add(i, t, ndays);
        }
    }

    // Purchase log: transaction behaviors follow the user's noiseless mixture; each
    // behavior owns a block of five MCC codes.
    std::vector<double> behavior_weight(static_cast<std::size_t>(K));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < K; ++j)
            behavior_weight[static_cast<std::size_t>(j)] = out.s_pre_noise(i, j);
        int ntx = 20 + static_cast<int>(rng.uniform_int(20));
        for (int q = 0; q < ntx; ++q) {
            int b = static_cast<int>(rng.categorical(behavior_weight));
            std::string mcc = std::to_string(5000 + 5 * b + static_cast<int>(rng.uniform_int(5)));
            double amount = std::exp(rng.normal(3.0, 1.0));
            std::int64_t day = static_cast<std::int64_t>(rng.uniform_int(kWindowDays));
            std::int64_t sec = static_cast<std::int64_t>(rng.uniform_int(86400));
            out.ccr.push_back({out.users[static_cast<std::size_t>(i)], std::move(mcc), amount,
                               kBaseEpoch + day * 86400 + sec});
        }
    }

    return out;
}

double sparsity_report(const SparseCountMatrix& W) { return W.zero_fraction(); }

void write_fixtures(const SynthData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::string towers = "tower_id,lat,lon\n";
    for (std::size_t t = 0; t < data.towers.ids.size(); ++t)
        towers += data.towers.ids[t] + "," + io::format_double(data.towers.lat[t]) + "," +
                  io::format_double(data.towers.lon[t]) + "\n";
    io::write_text_file(dir / "towers.csv", towers);

    std::string pois = "tower_id,category\n";
    for (std::size_t t = 0; t < data.towers.ids.size(); ++t) {
        pois += data.towers.ids[t] + ",";
        const auto& cats = data.pois[t];
        for (std::size_t q = 0; q < cats.size(); ++q) {
            if (q) pois += ';';
            pois += cats[q];
        }
        pois += '\n';
    }
    io::write_text_file(dir / "pois.csv", pois);

    std::string cdr = "user_id,tower_id,timestamp\n";
    for (const auto& e : data.cdr)
        cdr += e.user_id + "," + e.tower_id + "," + ingest::format_timestamp(e.timestamp) + "\n";
    io::write_text_file(dir / "cdr.csv", cdr);

    std::string ccr = "user_id,mcc,amount,timestamp\n";
    for (const auto& e : data.ccr)
        ccr += e.user_id + "," + e.mcc + "," + io::format_double(e.amount) + "," +
               ingest::format_timestamp(e.timestamp) + "\n";
    io::write_text_file(dir / "ccr.csv", ccr);

    nlohmann::json truth;
    truth["u_star"] = matrix_json(data.u_star);
    truth["vs_star"] = matrix_json(data.vs_star);
    truth["vm_star"] = matrix_json(data.vm_star);
    truth["private_factors_s"] = data.private_factors_s;
    truth["private_factors_m"] = data.private_factors_m;
    io::write_text_file(dir / "ground_truth.json", truth.dump(2) + "\n");
}

}  // namespace lifestyles::synth
