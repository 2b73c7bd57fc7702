// SPDX-License-Identifier: Apache-2.0
//
// Affine recovery maps A(w) = w + z + B w with values in W + W~perp, where
// W~perp is the orthogonal complement of W inside U_L + W. The pair (z, B)
// minimizes the worst recovery error over a finite manifold net.
#pragma once
#include "pbdw/common.hpp"
#include "pbdw/elliptic_model.hpp"
#include "pbdw/greedy.hpp"
#include "pbdw/onespace.hpp"
#include "pbdw/sensing.hpp"

#include <string>

namespace pbdw {

struct ManifoldNet {
    std::vector<Param> params;
    Mat states;                 ///< one snapshot per column
    double delta = kInfinity;   ///< fineness, estimated against a probe set
    bool delta_estimated = false;
    std::string provenance;

    Index size() const { return states.cols(); }
};

ManifoldNet build_net(const ParametricModel& model, const TrainingSet& points);

/// Largest distance from a probe snapshot to its nearest net state; stores it in net.delta.
double estimate_net_delta(const ParametricModel& model, ManifoldNet& net, const TrainingSet& probes);

/// Distance from each column of `states` to the nearest net state.
std::vector<double> nearest_net_distance(const DiscreteSpace& space, const ManifoldNet& net, const Mat& states);

/// U-orthonormal basis of (U_L + W) minus W. Directions of U_L lying in W
/// (relative tolerance rel_tol) are discarded.
Mat build_complement(const MeasurementSystem& system, const Mat& u_l_basis, double rel_tol = 1e-10);

struct AffineFitConfig {
    double tol_opt = 1e-6;   ///< relative suboptimality of the max error
    int max_iter = 20000;
};

struct AffineFitDiagnostics {
    int iterations = 0;
    double primal = 0.0;     ///< best max error found
    double dual = 0.0;       ///< certified lower bound on the optimal max error
    bool certified = false;
    /// best max error after each iteration
    std::vector<double> objective_history;
};

struct AffineRecoveryMap {
    Vec z;                   ///< complement coordinates
    Mat b_matrix;            ///< p x m, W-coordinates to complement coordinates
    Mat complement_basis;    ///< dim x p, U-orthonormal
    double training_objective = 0.0;
    double eta = 0.0;        ///< certified distance of the net's manifold to U_L
    double net_delta = kInfinity;
    bool net_delta_estimated = false;
    AffineFitDiagnostics diagnostics;

    Index m() const { return b_matrix.cols(); }
    Index p() const { return complement_basis.cols(); }
    double b_norm() const;
    /// training objective + sqrt(1 + ||B||^2) net_delta
    double certificate() const;
};

/// Minimizes max_u ||u - A(P_W u)|| over the net with a log-barrier method on
/// the epigraph form. The barrier multipliers give a point of the dual simplex
/// whose exact dual value certifies the objective.
AffineRecoveryMap fit_affine(const MeasurementSystem& system, const ManifoldNet& net, const ReducedSpace& u_l,
                             const AffineFitConfig& config = {});

Vec apply(const AffineRecoveryMap& map, const MeasurementSystem& system, const Observation& w);

/// ||u - A(P_W u)|| for each column of `states`.
std::vector<double> affine_errors(const AffineRecoveryMap& map, const MeasurementSystem& system, const Mat& states);

/// sqrt(sum_{k >= m+2} sigma_k^2 / N) for the net's U-singular values: no
/// affine map with m-dimensional input reaches a smaller max error on the net.
double width_lower_bound(const DiscreteSpace& space, const Mat& states, Index m);

struct HeldOutReport {
    std::vector<double> errors;
    std::vector<double> net_distance;
    double max_error = 0.0;
    double delta = 0.0;        ///< max net distance of the held-out states
    double b_norm = 0.0;
    /// training objective + eta + ||B|| delta
    double stated_bound = 0.0;
    /// training objective + sqrt(1 + ||B||^2) delta, which holds unconditionally
    double lipschitz_bound = 0.0;
};

HeldOutReport evaluate_held_out(const AffineRecoveryMap& map, const MeasurementSystem& system,
                                const ManifoldNet& net, const Mat& held_out);

}  // namespace pbdw
