// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration and task orchestration. Every artifact is a pure
// function of the configuration, so reruns produce byte-identical files.
#pragma once

#include "pbdw/affine_map.hpp"
#include "pbdw/greedy.hpp"
#include "pbdw/inverse.hpp"
#include "pbdw/piecewise.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace pbdw {

inline constexpr const char* kVersion = "0.1.0";

/// Schema violation at a JSON pointer such as "/greedy/n_max".
class ConfigError : public InvalidInput {
public:
    ConfigError(std::string pointer, const std::string& message)
        : InvalidInput(pointer + ": " + message), pointer_(std::move(pointer)) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

enum class Task { greedy_decay, fit_affine, build_pw, estimate_state, estimate_param, bench_oracle, compare_all };

std::string to_string(Task task);
Task parse_task(const std::string& name);

struct GreedySettings {
    int n_max = 12;
    bool random_training = false;
    int grid_per_dim = 5;        ///< tensor-grid training
    double train_eps = 1e-2;     ///< random training size parameters
    double train_eta = 1e-2;
    double tol = 0.0;
};

struct AffineSettings {
    int net_grid = 5;
    int probe_grid = 0;          ///< 0: 2 net_grid - 1 when d_y <= 3, otherwise no probes
    int n_l = 20;                ///< greedy dimension of U_L
    AffineFitConfig fit;
    int held_out = 200;
    bool poor_mans_competitor = false;
};

struct OracleSettings {
    int grid = 11;
    std::vector<double> eps{0.0, 0.01};
    double eps_slice = -1.0;     ///< negative: default_eps_slice
    int slices = 5;
};

enum class EstimateMethod { one_space, affine, piecewise };

struct EstimateSettings {
    EstimateMethod method = EstimateMethod::one_space;
    int samples = 50;
    NoiseSpec noise;
};

struct Inputs {
    std::string observations;    ///< CSV of raw sensor values
    std::string state;           ///< matrix CSV, one state per column
    std::string map;             ///< directory of a fitted map or partition
};

struct ExperimentConfig {
    ModelConfig model;
    std::vector<SensorSpec> sensors;
    Task task = Task::greedy_decay;
    std::uint64_t seed = 0;
    double rank_tol = 1e-10;
    LsConfig least_squares;
    GreedySettings greedy;
    AffineSettings affine;
    PiecewiseConfig piecewise;
    OracleSettings oracle;
    EstimateSettings estimate;
    Inputs inputs;
    std::string output_dir = "out";

    /// Strict parse. `sensors` is either a list of sensor specs or
    /// {"equispaced": {"count": m, "width": w}}.
    static ExperimentConfig from_json(const nlohmann::json& doc);
    /// Every field, explicit sensors.
    nlohmann::json to_json() const;
    std::uint64_t hash() const;
};

struct RunResult {
    std::vector<std::string> artifacts;   ///< relative to output_dir, manifest last
    nlohmann::json summary;
};

/// Executes the task and writes summary.json, CSV tables and manifest.json into output_dir.
RunResult run(const ExperimentConfig& config);

/// Directory for net caches: $PBDW_CACHE_DIR or empty.
std::string cache_dir();

}  // namespace pbdw
