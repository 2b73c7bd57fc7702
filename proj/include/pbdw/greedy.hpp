// SPDX-License-Identifier: Apache-2.0
//
// Weak-greedy reduced bases driven by the residual surrogate
//
//   R(y, U_n) = || f - A(y) Pi_n u(y) ||_{V'},
//
// where Pi_n is the Galerkin projection onto U_n. For the coercive problem
// r ||u(y) - P_n u(y)|| <= R(y, U_n) <= R ||u(y) - P_n u(y)||, so taking the
// exact argmax of R over a training set is a weak-greedy step with gamma = r/R.
#pragma once

#include "pbdw/common.hpp"
#include "pbdw/elliptic_model.hpp"
#include "pbdw/onespace.hpp"

#include <optional>

namespace pbdw {

enum class TrainingMode { tensor_grid, sparse_random };

struct TrainingSet {
    std::vector<Param> points;
    TrainingMode mode = TrainingMode::tensor_grid;
    int per_dim = 0;            ///< tensor grid only
    std::uint64_t seed = 0;     ///< random sets only
    ParamBox box;
    // provenance of sets drawn by random_training
    double target_eps = 0.0;
    double failure_prob = 0.0;

    std::size_t size() const { return points.size(); }

    static TrainingSet tensor_grid(const ParamBox& box, int per_dim);
    static TrainingSet sparse_random(const ParamBox& box, std::size_t count, std::uint64_t seed);
};

/// Constants of the randomized training-set size N = ceil(C_N (|ln eta| + |ln eps|)).
struct RandomTrainingConstants {
    double c_n = 10.0;
};

std::size_t random_training_size(double eps, double eta, const RandomTrainingConstants& constants = {});

TrainingSet random_training(int d_y, double eps, double eta, const RandomTrainingConstants& constants,
                            std::uint64_t seed);

/// Offline/online evaluator of the Galerkin projection and its residual for a
/// fixed (possibly affine) reduced space.
class SurrogateEvaluator {
public:
    /// Keeps a reference to `model`, which must outlive the evaluator.
    SurrogateEvaluator(const ParametricModel& model, const ReducedSpace& reduced);

    /// Coefficients c of Pi_n u(y) = anchor + basis * c.
    Vec galerkin_coeffs(const Param& y) const;
    Vec galerkin_state(const Param& y) const;
    /// Residual dual norm of the Galerkin projection.
    double operator()(const Param& y) const;

private:
    const ParametricModel* model_;
    Vec anchor_;
    Mat basis_;
    std::vector<Mat> op_basis_;    // A_j * basis
    std::vector<Vec> op_anchor_;   // A_j * anchor
    std::vector<Mat> reduced_ops_; // basis^T A_j basis
    std::vector<Vec> reduced_rhs_; // basis^T (f - A_0 anchor), -basis^T A_j anchor
};

double surrogate(const ParametricModel& model, const ReducedSpace& reduced, const Param& y);

struct GreedyOptions {
    int n_max = 10;
    double tol = 0.0;         ///< target accuracy eps in distance units
    double stop_c = -1.0;     ///< c in the stopping rule max R <= c eps^{1+a}; negative means r
    double stop_a = 0.0;
    bool record_dist = false; ///< compute the true distance history (full solves over the training set)
    bool resample = false;    ///< draw a fresh random training set at every step
    std::size_t resample_size = 0;
    std::uint64_t seed = 0;
    double deflation_tol = 1e-10;
    std::optional<Vec> anchor; ///< approximate u(y) - anchor instead of u(y)
};

struct GreedyTrace {
    std::vector<Param> selected_params;
    /// Entry k: max over the training set of R(y, U_k).
    std::vector<double> surrogate_max_history;
    /// Entry k: (1/r) surrogate_max_history[k], a certified distance bound over the training set.
    std::vector<double> eps_history;
    /// Entry k: max over the training set of ||u(y) - P_k u(y)|| (when recorded).
    std::vector<double> dist_history;
    /// gamma at surrogate level is 1; at true-distance level it is at least gamma_used = r/R.
    double gamma_used = 1.0;
    std::vector<std::string> events;
};

struct GreedyResult {
    ReducedSpace space;
    GreedyTrace trace;

    /// U_n from the nested hierarchy with eps_n = trace.eps_history[n].
    ReducedSpace nested(Index n) const;
};

GreedyResult weak_greedy(const ParametricModel& model, const TrainingSet& training, const GreedyOptions& options);

struct PoorMansRow {
    Index n = 0;
    double beta = 0.0;
    double mu = kInfinity;
    double eps = 0.0;
    double product = kInfinity;
};

struct PoorMansResult {
    Index n_star = 0;
    OneSpaceMap map;
    std::vector<PoorMansRow> table;
};

/// n* = argmin_n mu(U_n, W) eps_n over the supplied nested spaces (ties: smallest n).
PoorMansResult poor_mans_select(const ParametricModel& model, const MeasurementSystem& system,
                                const std::vector<ReducedSpace>& nested_spaces);

}  // namespace pbdw
