// SPDX-License-Identifier: Apache-2.0
//
// Brute-force benchmarks over a tensor-grid net of the manifold. Every value
// is a lower bound of the corresponding supremum over the true manifold.
#pragma once
#include "pbdw/common.hpp"
#include "pbdw/elliptic_model.hpp"
#include "pbdw/sensing.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <string>

namespace pbdw {

inline constexpr std::size_t kMaxNetPoints = 1000000;
inline constexpr std::size_t kMaxPairEvaluations = 10000000;

struct OracleNet {
    std::vector<Param> params;
    Mat states;
    int grid_per_dim = 0;
    std::uint64_t model_hash = 0;
    bool from_cache = false;

    Index size() const { return states.cols(); }
};

/// Tensor-grid snapshots of the whole parameter box. With a non-empty
/// cache_dir the states are stored there, keyed by the model hash and grid.
OracleNet manifold_net(const ParametricModel& model, int grid_per_dim, const std::string& cache_dir = {});

/// Net states split into W-coordinates and U-isometric coordinates of the
/// W-orthogonal part, so that pair distances are Euclidean.
struct NetGeometry {
    Mat w;      ///< m x N
    Mat perp;   ///< r x N
    Index size() const { return w.cols(); }
};

NetGeometry net_geometry(const OracleNet& net, const MeasurementSystem& system);

/// 1e-3 times the median of ||P_W u|| over the net.
double default_eps_slice(const NetGeometry& geometry);

struct SliceResult {
    std::vector<Index> members;
    double radius_lb = 0.0;   ///< half the diameter of the members
    bool empty() const { return members.empty(); }
};

/// Net states with ||P_W u - w|| <= eps_slice (w in W-coordinates).
SliceResult slice_and_radius(const NetGeometry& geometry, const Vec& w, double eps_slice);

struct DeltaResult {
    double delta_lb = 0.0;
    double eps = 0.0;
    double eps_slice = 0.0;
    std::size_t pairs_checked = 0;
    bool truncated = false;   ///< pair budget reached; still a lower bound
    Index first = -1;
    Index second = -1;
};

/// Lower bound of delta_eps over pairs of net states. A pair u, v with
/// p = ||P_W(u - v)|| <= 2 eps is completed inside the eps-inflated manifold
/// by perturbations cancelling the W-difference and stretching the rest:
///   ||P_{W perp}(u - v)|| + 2 sqrt(eps^2 - p^2/4).
/// Pairs with p up to 2 eps + eps_slice are admitted with the root clamped at 0.
DeltaResult delta_eps_bruteforce(const NetGeometry& geometry, double eps, double eps_slice,
                                 std::size_t pair_budget = kMaxPairEvaluations);

using RecoveryFn = std::function<Vec(const Observation&)>;

struct WcResult {
    double wc_lb = 0.0;
    std::vector<double> errors;
    Index argmax = -1;
};

/// max over the net of ||u - A(P_W u)||.
WcResult wc_error_bruteforce(const OracleNet& net, const MeasurementSystem& system, const RecoveryFn& map);

/// Returns the net state whose W-coordinates are closest to the observation.
RecoveryFn nearest_member_map(const OracleNet& net, const MeasurementSystem& system);

struct BenchmarkReport {
    double eps = 0.0;
    double delta_eps = 0.0;
    DeltaResult delta;
    std::vector<double> rad_slices;
    std::map<std::string, double> wc_errors;
    std::map<std::string, double> certificates;
    int grid_per_dim = 0;
    Index net_size = 0;
    double slice_tol = 0.0;

    nlohmann::json to_json() const;
};

}  // namespace pbdw
