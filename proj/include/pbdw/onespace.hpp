// SPDX-License-Identifier: Apache-2.0
//
// One-space (PBDW) recovery: given a reduced space U_n = anchor + span(basis)
// with dist(M, U_n) <= eps, returns the element of U_w = w + W^perp closest to
// U_n. The map is applied through the SVD of the m x n cross-Gramian between
// U-orthonormal bases of W and of the linear part of U_n.
#pragma once

#include "pbdw/common.hpp"
#include "pbdw/sensing.hpp"

#include <memory>
#include <string>

namespace pbdw {

struct ReducedSpace {
    Vec anchor;         ///< zero for linear spaces
    Mat basis;          ///< U-orthonormal columns
    double eps = 0.0;   ///< certified bound on the distance of M (or a portion of it) to the space
    std::string provenance;

    Index n() const { return basis.cols(); }

    /// Linear space spanned by `vectors`, orthonormalized (dependent columns dropped).
    static ReducedSpace linear(const DiscreteSpace& space, const Mat& vectors, double eps,
                               std::string provenance = {});
    /// The first n basis vectors with a new certificate.
    ReducedSpace truncated(Index n, double new_eps) const;
};

/// Modified Gram-Schmidt with reorthogonalization in the U-inner product.
/// Columns whose remaining norm falls below rel_tol times their original norm are dropped.
Mat orthonormalize(const DiscreteSpace& space, const Mat& vectors, double rel_tol = 1e-10);

/// Distance of u to an affine reduced space, computed with the orthogonal projection.
double distance_to_space(const DiscreteSpace& space, const ReducedSpace& reduced, const Vec& u);

struct BetaMu {
    double beta = 0.0;
    double mu = kInfinity;
    bool dimension_exceeds_m = false;  ///< n > m forces beta = 0
};

/// Threshold below which beta is treated as zero and mu as infinite.
inline constexpr double kBetaThreshold = 1e-10;

BetaMu beta_mu(const ReducedSpace& reduced, const MeasurementSystem& system);

class OneSpaceMap {
public:
    OneSpaceMap(ReducedSpace reduced, const MeasurementSystem& system);

    const ReducedSpace& reduced() const { return reduced_; }
    double beta() const { return stats_.beta; }
    double mu() const { return stats_.mu; }
    bool defined() const { return stats_.mu < kInfinity; }
    Index m() const { return w_basis_.cols(); }
    Index n() const { return reduced_.n(); }

    /// u* for the given observation. Throws NumericalError when beta = 0.
    Vec recover(const Observation& w) const { return recover_coords(w.w_coords); }
    Vec recover_coords(const Vec& w_coords) const;

    /// mu * eps, the worst-case error over the cylinder K(U_n, eps).
    double certify() const;
    /// mu * (eps + noise), the bound over the eps-inflated manifold.
    double certify(double noise) const;

    /// A cylinder element at distance eps from U_n whose recovery error equals mu * eps:
    /// anchor + (eps/beta) times the normalized W^perp part of the least observable basis direction.
    Vec extremal_element() const;

private:
    std::shared_ptr<const DiscreteSpace> space_;
    ReducedSpace reduced_;
    Mat w_basis_;
    Vec anchor_coords_;
    Mat cross_;  // w_basis^T G basis
    Eigen::JacobiSVD<Mat> svd_;
    BetaMu stats_;
};

}  // namespace pbdw
