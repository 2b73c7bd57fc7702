// SPDX-License-Identifier: Apache-2.0
//
// Piecewise-affine reduced models: the parameter box is split into cells until
// each cell carries a local one-space map with certificate mu * eps_k <= eps.
// At recovery time every local estimate is scored by the metric-projection
// surrogate and the smallest score wins.
#pragma once
#include "pbdw/common.hpp"
#include "pbdw/greedy.hpp"
#include "pbdw/inverse.hpp"
#include "pbdw/onespace.hpp"
#include "pbdw/sensing.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace pbdw {

enum class SplitRule {
    /// halve the coordinate whose two face centers carry the largest anchor residual
    surrogate_faces,
    round_robin,
};

struct PiecewiseConfig {
    double eps = 0.0;          ///< target certificate per cell
    int max_cells = 64;
    int max_depth = 12;
    int n_max = -1;            ///< local dimension cap; negative means m
    int grid_per_dim = 5;      ///< per-cell tensor grid when d_y <= 3
    double random_eta = 1e-2;  ///< failure probability for random cell training sets
    RandomTrainingConstants random_constants;
    SplitRule split_rule = SplitRule::surrogate_faces;
    std::uint64_t seed = 0;
    LsConfig surrogate;
};

struct Cell {
    ParamBox box;
    ReducedSpace local_space;          ///< anchored at u(center of box)
    std::optional<OneSpaceMap> local_map;
    double certificate = kInfinity;    ///< mu * eps_k
    int depth = 0;
    bool accepted = false;
    std::size_t training_size = 0;
};

struct SplitRecord {
    std::size_t order = 0;   ///< position in processing order
    int depth = 0;
    Index coord = 0;
    std::vector<double> scores;
};

struct PartitionedModel {
    std::vector<Cell> cells;
    double target_eps = 0.0;
    std::vector<SplitRecord> split_trace;
    bool complete = false;              ///< every cell accepted within budget
    double worst_certificate = 0.0;
    LsConfig surrogate;

    Index k() const { return static_cast<Index>(cells.size()); }
    double total_volume() const;
    nlohmann::json to_json() const;
};

PartitionedModel build_partition(const ParametricModel& model, const MeasurementSystem& system,
                                 const PiecewiseConfig& config);

struct CellScore {
    std::size_t k = 0;
    double s_value = kInfinity;
    double certificate = kInfinity;
};

struct PiecewiseRecovery {
    Vec u_star;
    std::size_t k_star = 0;
    Param y_bar;             ///< metric projection of u_star
    std::vector<CellScore> diagnostics;
};

/// Ties go to the smallest cell index. Cells without a defined map are skipped.
PiecewiseRecovery recover_pw(const ParametricModel& model, const PartitionedModel& pm, const Observation& w);

}  // namespace pbdw
