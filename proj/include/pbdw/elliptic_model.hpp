// SPDX-License-Identifier: Apache-2.0
//
// Discretized parametric diffusion problem
//
//   -div(a(x,y) grad u) = f  in the unit interval or square,  u = 0 on the boundary,
//   a(x,y) = a0 + sum_j y_j c_j chi_{I_j}(x),  y in [-1,1]^d_y,
//
// with P1 (1D) or bilinear Q1 (2D) elements on a uniform grid. The trial norm
// is the H^1_0 seminorm, so the Gram matrix is the unit-coefficient stiffness
// matrix and the dual norm of a functional r is sqrt(r^T G^{-1} r).
#pragma once

#include "pbdw/common.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <utility>

namespace pbdw {

enum class CoeffProfile { equal, decay };

/// Spatial layout of the regions I_j. `automatic` picks a checkerboard when
/// dx = 2 and d_y is a perfect square, strips in x otherwise.
enum class Partition { automatic, strips, checkerboard, rings };

struct ModelConfig {
    int dx = 1;             ///< spatial dimension, 1 or 2
    int n_mesh = 200;       ///< cells per direction
    int d_y = 4;            ///< number of parameters
    double a0 = 1.0;        ///< nominal coefficient
    CoeffProfile coeff_profile = CoeffProfile::equal;
    Partition partition = Partition::automatic;
    double rho = 0.9;       ///< total amplitude sum_j |c_j|
    double f = 1.0;         ///< constant load
    double solver_tol = 1e-12;
    std::uint64_t seed = 0;

    /// Strict parse: unknown keys and wrong types are rejected.
    static ModelConfig from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

/// Ambient finite element space U_h with the H^1_0 inner product.
class DiscreteSpace {
public:
    DiscreteSpace(int dx, int n_mesh, Mat nodes, SpMat gram);

    Index dim() const { return gram_.rows(); }
    int spatial_dim() const { return dx_; }
    int n_mesh() const { return n_mesh_; }
    double h() const { return 1.0 / n_mesh_; }
    /// Interior node coordinates, one row per degree of freedom.
    const Mat& nodes() const { return nodes_; }
    const SpMat& gram() const { return gram_; }

    double inner(const Vec& u, const Vec& v) const { return u.dot(gram_ * v); }
    double norm(const Vec& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }

    /// G^{-1} r, the Riesz representer of the functional r.
    Vec riesz_lift(const Vec& dual) const;
    Mat riesz_lift(const Mat& duals) const;
    /// sqrt(r^T G^{-1} r) = sup_v r(v) / ||v||_U.
    double dual_norm(const Vec& dual) const;

    /// Coordinates in which the Euclidean norm equals the U-norm (columns are states).
    Mat euclidean_coords(const Mat& states) const;

private:
    void check_dim(Index n, const char* what) const;

    int dx_;
    int n_mesh_;
    Mat nodes_;
    SpMat gram_;
    std::shared_ptr<const Eigen::SimplicialLLT<SpMat>> factor_;
};

/// Affine residual R(v,y) = R_0(v) + sum_j y_j R_j(v), with R_0 = f - A_0 v, R_j = -A_j v.
struct Residual {
    Vec dual_vector;
    std::vector<Vec> components;
};

class ParametricModel {
public:
    const ModelConfig& config() const { return config_; }
    const DiscreteSpace& space() const { return *space_; }
    const std::shared_ptr<const DiscreteSpace>& space_ptr() const { return space_; }

    int d_y() const { return config_.d_y; }
    /// A_0, A_1, ..., A_{d_y}
    const std::vector<SpMat>& ops() const { return ops_; }
    const Vec& load() const { return load_; }
    const Vec& amplitudes() const { return amplitudes_; }
    double r() const { return r_; }
    double R() const { return R_; }
    /// Quotient of the error-residual equivalence constants.
    double kappa() const { return R_ / r_; }
    double solver_tol() const { return config_.solver_tol; }

    /// Region index I_j of each element, and the measure |I_j|.
    const std::vector<int>& element_region() const { return element_region_; }
    const Vec& region_measure() const { return region_measure_; }

    /// Throws InvalidInput unless y has d_y entries in [-1,1].
    void check_param(const Param& y) const;
    SpMat assemble(const Param& y) const;

    /// a(x,y) on every element.
    Vec element_coefficients(const Param& y) const;

    /// Stable identifier of the configuration.
    std::uint64_t hash() const;

private:
    friend ParametricModel build_model(const ModelConfig& config);

    ModelConfig config_;
    std::shared_ptr<const DiscreteSpace> space_;
    std::vector<SpMat> ops_;
    Vec load_;
    Vec amplitudes_;
    double r_ = 0.0;
    double R_ = 0.0;
    std::vector<int> element_region_;
    Vec region_measure_;
};

ParametricModel build_model(const ModelConfig& config);

/// Returns u(y) with A(y) u(y) = f.
Vec solve(const ParametricModel& model, const Param& y);

Residual residual(const ParametricModel& model, const Vec& v, const Param& y);

inline double dual_norm(const DiscreteSpace& space, const Vec& dual) { return space.dual_norm(dual); }
inline Vec riesz_lift(const DiscreteSpace& space, const Vec& dual) { return space.riesz_lift(dual); }

/// (||R(v,y)||/R, ||R(v,y)||/r), which brackets ||u(y) - v||_U.
std::pair<double, double> error_residual_envelope(const ParametricModel& model, const Vec& v,
                                                  const Param& y);

struct VertexCheck {
    std::size_t checked = 0;
    std::size_t failures = 0;
    bool exhaustive = false;
    bool ok() const { return failures == 0; }
};

/// Factorizes A(y) on the vertices of Y: all of them when d_y <= 12, otherwise
/// `samples` random vertices.
VertexCheck check_vertex_definiteness(const ParametricModel& model, std::size_t samples = 512,
                                      std::uint64_t seed = 0);

/// ||a(y1) - a(y2)||_{L2}, integrated element by element.
double coefficient_l2_distance(const ParametricModel& model, const Param& y1, const Param& y2);

}  // namespace pbdw
