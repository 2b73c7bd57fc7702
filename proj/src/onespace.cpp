// SPDX-License-Identifier: Apache-2.0
#include "pbdw/onespace.hpp"

namespace pbdw {

Mat orthonormalize(const DiscreteSpace& space, const Mat& vectors, double rel_tol)
{
    Mat basis(vectors.rows(), vectors.cols());
    Index kept = 0;
    for (Index j = 0; j < vectors.cols(); ++j) {
        Vec v = vectors.col(j);
        const double original = space.norm(v);
        if (original == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (Index k = 0; k < kept; ++k) v -= space.inner(basis.col(k), v) * basis.col(k);
        const double remaining = space.norm(v);
        if (remaining <= rel_tol * original) continue;
        basis.col(kept++) = v / remaining;
    }
    return basis.leftCols(kept);
}

ReducedSpace ReducedSpace::linear(const DiscreteSpace& space, const Mat& vectors, double eps,
                                  std::string provenance)
{
    ReducedSpace r;
    r.anchor = Vec::Zero(space.dim());
    r.basis = orthonormalize(space, vectors);
    r.eps = eps;
    r.provenance = std::move(provenance);
    return r;
}

ReducedSpace ReducedSpace::truncated(Index n, double new_eps) const
{
    if (n < 0 || n > this->n()) throw InvalidInput("truncated: n out of range");
    ReducedSpace r;
    r.anchor = anchor;
    r.basis = basis.leftCols(n);
    r.eps = new_eps;
    r.provenance = provenance;
    return r;
}

double distance_to_space(const DiscreteSpace& space, const ReducedSpace& reduced, const Vec& u)
{
    Vec e = reduced.anchor.size() ? Vec(u - reduced.anchor) : u;
    if (reduced.n() > 0) {
        const Vec c = reduced.basis.transpose() * (space.gram() * e);
        e -= reduced.basis * c;
        // second pass keeps tiny distances accurate
        e -= reduced.basis * (reduced.basis.transpose() * (space.gram() * e));
    }
    return space.norm(e);
}

BetaMu beta_mu(const ReducedSpace& reduced, const MeasurementSystem& system)
{
    BetaMu out;
    const Index n = reduced.n();
    if (n == 0) {
        out.beta = 1.0;
        out.mu = 1.0;
        return out;
    }
    if (n > system.m()) {
        out.dimension_exceeds_m = true;
        return out;
    }
    const Mat cross = system.coords(reduced.basis);
    Eigen::JacobiSVD<Mat> svd(cross);
    const double smin = svd.singularValues()(n - 1);
    out.beta = std::min(1.0, smin);
    out.mu = out.beta > kBetaThreshold ? 1.0 / out.beta : kInfinity;
    return out;
}

OneSpaceMap::OneSpaceMap(ReducedSpace reduced, const MeasurementSystem& system)
    : space_(system.space_ptr()), reduced_(std::move(reduced)), w_basis_(system.w_basis())
{
    const Index dim = space_->dim();
    if (reduced_.anchor.size() == 0) reduced_.anchor = Vec::Zero(dim);
    if (reduced_.anchor.size() != dim || reduced_.basis.rows() != dim)
        throw InvalidInput("OneSpaceMap: reduced space has the wrong ambient dimension");
    anchor_coords_ = system.coords(reduced_.anchor);
    cross_ = system.coords(reduced_.basis);
    if (reduced_.n() > 0) svd_.compute(cross_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    stats_ = beta_mu(reduced_, system);
}

Vec OneSpaceMap::recover_coords(const Vec& w_coords) const
{
    if (!defined()) throw NumericalError("one-space map undefined: U_n intersects W^perp (beta = 0)");
    if (w_coords.size() != m()) throw InvalidInput("observation has the wrong number of coordinates");
    const Vec shifted = w_coords - anchor_coords_;
    Vec u = reduced_.anchor + w_basis_ * shifted;
    if (n() == 0) return u;
    // c = argmin ||shifted - cross c||, pseudo-inverse with cutoff 1e-10 sigma_max
    const Vec& sv = svd_.singularValues();
    const double cutoff = 1e-10 * sv(0);
    Vec proj = svd_.matrixU().transpose() * shifted;
    for (Index k = 0; k < sv.size(); ++k) proj(k) = sv(k) > cutoff ? proj(k) / sv(k) : 0.0;
    const Vec c = svd_.matrixV() * proj;
    // u* = anchor + v* + (shifted - P_W v*) with v* = basis c
    u += reduced_.basis * c - w_basis_ * (cross_ * c);
    return u;
}

double OneSpaceMap::certify() const
{
    if (reduced_.eps == 0.0) return 0.0;
    return stats_.mu * reduced_.eps;
}

double OneSpaceMap::certify(double noise) const
{
    const double total = reduced_.eps + noise;
    if (total == 0.0) return 0.0;
    return stats_.mu * total;
}

Vec OneSpaceMap::extremal_element() const
{
    if (!defined()) throw NumericalError("extremal_element: map undefined");
    const DiscreteSpace& U = *space_;
    Vec direction;
    if (n() > 0) {
        const Vec v = reduced_.basis * svd_.matrixV().col(n() - 1);
        direction = v - w_basis_ * (w_basis_.transpose() * (U.gram() * v));
    }
    if (n() == 0 || U.norm(direction) <= 1e-8) {
        // beta = 1: any unit element orthogonal to both W and U_n is extremal
        Rng rng(0x5eed);
        direction = rng.normal_vector(U.dim());
        for (int pass = 0; pass < 2; ++pass) {
            direction -= w_basis_ * (w_basis_.transpose() * (U.gram() * direction));
            if (n() > 0) direction -= reduced_.basis * (reduced_.basis.transpose() * (U.gram() * direction));
        }
        return reduced_.anchor + reduced_.eps * direction / U.norm(direction);
    }
    return reduced_.anchor + (reduced_.eps / stats_.beta) * direction / U.norm(direction);
}

}  // namespace pbdw
