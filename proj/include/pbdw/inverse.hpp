// SPDX-License-Identifier: Apache-2.0
//
// Metric projection onto the solution manifold through the affine residual.
// For a state u_bar the squared residual dual norm is a quadratic in y,
//
//   ||R(u_bar, y)||_{V'}^2 = [1, y]^T Q [1, y],
//
// and minimizing it over the parameter box gives y_bar with
// ||u_bar - u(y_bar)|| <= (R/r) inf_y ||u_bar - u(y)||.
#pragma once
#include "pbdw/common.hpp"
#include "pbdw/elliptic_model.hpp"

namespace pbdw {

/// Q with Q_ij = <G^{-1} R_i, G^{-1} R_j>, i, j = 0..d_y.
Mat residual_quadratic(const ParametricModel& model, const Vec& u_bar);

struct LsConfig {
    double kkt_tol = 1e-8;
    int max_iter = 500;
};

struct BoxQpResult {
    Vec y;
    double objective = 0.0;
    /// || y - Proj(y - grad / s) ||_inf with s = max |Q_ij|
    double kkt_residual = kInfinity;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

/// Minimizes [1,y]^T Q [1,y] over the box by projected Newton steps on the
/// free variables, falling back to a projected gradient step when the Newton
/// arc fails the Armijo test.
BoxQpResult minimize_box_qp(const Mat& q, const ParamBox& box, const LsConfig& config = {});

double box_qp_kkt_residual(const Mat& q, const ParamBox& box, const Vec& y);

struct ProjectionResult {
    Param y_bar;
    double s_value = 0.0;         ///< ||u_bar - u(y_bar)||_U
    double residual_at_opt = 0.0; ///< ||R(u_bar, y_bar)||_{V'}
    double kkt_residual = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_history;
    /// -1 at the lower face, +1 at the upper face, 0 free
    std::vector<int> active;
};

ProjectionResult metric_project(const ParametricModel& model, const Vec& u_bar, const LsConfig& config = {},
                                const ParamBox* box = nullptr);

struct ParameterEstimate {
    ProjectionResult projection;
    /// (1 + R/r) times the supplied worst-case certificate of the recovery map
    double chain_bound = 0.0;
};

ParameterEstimate estimate_parameter(const ParametricModel& model, const Vec& recovered_state,
                                     double certificate, const LsConfig& config = {});

}  // namespace pbdw
