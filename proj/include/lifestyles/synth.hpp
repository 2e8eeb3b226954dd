#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lifestyles/geo.hpp"
#include "lifestyles/ingest.hpp"
#include "lifestyles/sparse.hpp"

namespace lifestyles::synth {

struct SynthConfig {
    int n = 500;  // users
    int p = 100;  // towers
    int d = 20;   // tower classes
    int K = 5;    // shopping behaviors
    int r = 3;    // latent rank
    double noise_sigma = 0.05;
    // Factor indices private to one view: a factor in private_factors_s is planted
    // null in Vm* (it drives only S); one in private_factors_m is planted null in Vs*.
    std::vector<int> private_factors_s;
    std::vector<int> private_factors_m;
    std::uint64_t seed = 0;
};

struct SynthData {
    Eigen::MatrixXd u_star;       // n x r, |N(0,1)| entries
    Eigen::MatrixXd vs_star;      // K x r, N(0,1) with planted columns zeroed
    Eigen::MatrixXd vm_star;      // d x r, N(0,1) with planted columns zeroed
    Eigen::MatrixXd s_pre_noise;  // row-normalized clamp0(U* Vs*^T); rows sum to 1
    Eigen::MatrixXd S;            // s_pre_noise + noise, clamped at 0
    Eigen::MatrixXd M;            // clamp0(U* Vm*^T), rows scaled to unit mean entry
    std::vector<int> private_factors_s;  // echoed from the config
    std::vector<int> private_factors_m;

    std::vector<std::string> users;
    geo::TowerTable towers;                      // uniform sites in a square about (0, 0)
    std::vector<int> tower_class;                // planted class per tower
    std::vector<std::vector<std::string>> pois;  // per-tower category multiset
    std::vector<ingest::CdrEvent> cdr;
    std::vector<ingest::CcrEvent> ccr;
    SparseCountMatrix intended_visits;  // users x towers distinct-day counts the CDR log encodes
};

SynthData generate(const SynthConfig& config);

// Fraction of zero entries in a visit matrix.
double sparsity_report(const SparseCountMatrix& W);

// Writes towers.csv, pois.csv, cdr.csv, ccr.csv, and ground_truth.json into dir.
void write_fixtures(const SynthData& data, const std::filesystem::path& dir);

}  // namespace lifestyles::synth
