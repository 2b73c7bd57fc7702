// SPDX-License-Identifier: Apache-2.0
#include "pbdw/affine_map.hpp"

#include "pbdw/parallel.hpp"

#include <algorithm>
#include <sstream>

namespace pbdw {

ManifoldNet build_net(const ParametricModel& model, const TrainingSet& points)
{
    if (points.points.empty()) throw InvalidInput("manifold net needs at least one point");
    ManifoldNet net;
    net.params = points.points;
    net.states.resize(model.space().dim(), static_cast<Index>(points.size()));
    parallel_for(points.size(), [&](std::size_t i) { net.states.col(static_cast<Index>(i)) = solve(model, points.points[i]); });
    std::ostringstream prov;
    if (points.mode == TrainingMode::tensor_grid)
        prov << "tensor_grid(" << points.per_dim << " per dim)";
    else
        prov << "random(" << points.size() << ", seed " << points.seed << ")";
    net.provenance = prov.str();
    return net;
}

std::vector<double> nearest_net_distance(const DiscreteSpace& space, const ManifoldNet& net, const Mat& states)
{
    const Mat e_net = space.euclidean_coords(net.states);
    const Mat e = space.euclidean_coords(states);
    std::vector<double> out(static_cast<std::size_t>(states.cols()));
    parallel_for(out.size(), [&](std::size_t i) {
        const auto col = e.col(static_cast<Index>(i));
        out[i] = std::sqrt((e_net.colwise() - col).colwise().squaredNorm().minCoeff());
    });
    return out;
}

double estimate_net_delta(const ParametricModel& model, ManifoldNet& net, const TrainingSet& probes)
{
    const ManifoldNet probe_net = build_net(model, probes);
    const auto d = nearest_net_distance(model.space(), net, probe_net.states);
    net.delta = *std::max_element(d.begin(), d.end());
    net.delta_estimated = true;
    return net.delta;
}

Mat build_complement(const MeasurementSystem& system, const Mat& u_l_basis, double rel_tol)
{
    const DiscreteSpace& U = system.space();
    if (u_l_basis.rows() != U.dim()) throw InvalidInput("build_complement: basis has the wrong dimension");
    Mat rest = u_l_basis;
    for (Index c = 0; c < rest.cols(); ++c) {
        const double original = U.norm(u_l_basis.col(c));
        if (!(original > 0.0)) throw InvalidInput("build_complement: zero basis vector");
        for (int pass = 0; pass < 2; ++pass) rest.col(c) -= system.state(system.coords(Vec(rest.col(c))));
        if (U.norm(rest.col(c)) <= rel_tol * original) rest.col(c).setZero();
    }
    std::vector<Index> keep;
    for (Index c = 0; c < rest.cols(); ++c)
        if (rest.col(c).squaredNorm() > 0.0) keep.push_back(c);
    Mat kept(U.dim(), static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) kept.col(static_cast<Index>(k)) = rest.col(keep[k]);
    Mat q = orthonormalize(U, kept, rel_tol);
    // orthonormalization mixes columns; remove the W component it may reintroduce
    for (int pass = 0; pass < 2; ++pass) q -= system.w_basis() * system.coords(q);
    return orthonormalize(U, q, rel_tol);
}

double AffineRecoveryMap::b_norm() const
{
    if (b_matrix.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Mat>(b_matrix).singularValues()(0);
}

double AffineRecoveryMap::certificate() const
{
    const double b = b_norm();
    return training_objective + std::sqrt(1.0 + b * b) * net_delta;
}

namespace {

// Net data in complement coordinates: for state u with w = coords(u), the
// squared error of X = [z, B] is ||a - X v||^2 + rho^2 with v = [1; w].
struct NetData {
    Mat v;      // (m+1) x N
    Mat a;      // p x N
    Vec rho2;   // squared distance of P_{W perp} u to the complement
};

NetData net_data(const MeasurementSystem& system, const Mat& complement, const Mat& states)
{
    const DiscreteSpace& U = system.space();
    const Index n = states.cols();
    const Mat w = system.coords(states);
    const Mat perp = states - system.w_basis() * w;
    NetData d;
    d.v.resize(w.rows() + 1, n);
    d.v.row(0).setOnes();
    d.v.bottomRows(w.rows()) = w;
    d.a = complement.transpose() * (U.gram() * perp);
    const Mat outside = perp - complement * d.a;
    d.rho2.resize(n);
    for (Index i = 0; i < n; ++i) d.rho2(i) = U.inner(outside.col(i), outside.col(i));
    return d;
}

Mat pinv_psd(const Mat& m)
{
    Eigen::SelfAdjointEigenSolver<Mat> eig(m);
    const Vec& ev = eig.eigenvalues();
    const double cut = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Vec inv = Vec::Zero(ev.size());
    for (Index i = 0; i < ev.size(); ++i)
        if (ev(i) > cut) inv(i) = 1.0 / ev(i);
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Vec squared_errors(const NetData& d, const Mat& x)
{
    if (d.a.rows() == 0) return d.rho2;
    return (d.a - x * d.v).colwise().squaredNorm().transpose() + d.rho2;
}

// Lagrangian dual at lambda in the simplex, min_X sum_i lambda_i g_i(X): a
// weighted least-squares problem, solved by column-pivoted QR and evaluated
// term by term so rank deficiency costs no accuracy.
double dual_value(const NetData& d, const Vec& lambda)
{
    if (d.a.rows() == 0) return lambda.dot(d.rho2);
    const Vec w = lambda.cwiseSqrt();
    const Mat design = w.asDiagonal() * d.v.transpose();
    const Mat rhs = w.asDiagonal() * d.a.transpose();
    const Mat xt = design.colPivHouseholderQr().solve(rhs);
    return lambda.dot(squared_errors(d, xt.transpose()));
}

}  // namespace

AffineRecoveryMap fit_affine(const MeasurementSystem& system, const ManifoldNet& net, const ReducedSpace& u_l,
                             const AffineFitConfig& config)
{
    if (net.size() == 0) throw InvalidInput("fit_affine: empty net");
    if (net.states.rows() != system.space().dim()) throw InvalidInput("fit_affine: net does not match the space");
    AffineRecoveryMap map;
    map.complement_basis = build_complement(system, u_l.basis);
    map.eta = u_l.eps;
    map.net_delta = net.delta;
    map.net_delta_estimated = net.delta_estimated;
    NetData d = net_data(system, map.complement_basis, net.states);
    const Index n = net.size();
    const Index p = map.p();
    const Index m = system.m();
    const Index nv = p * (m + 1);
    AffineFitDiagnostics& diag = map.diagnostics;

    // Start from the least-squares fit and rescale so its max squared error is 1.
    Mat x = Mat::Zero(p, m + 1);
    if (p > 0) x = (d.a * d.v.transpose()) * pinv_psd(d.v * d.v.transpose());
    const double scale = std::max(squared_errors(d, x).maxCoeff(), 1e-300);
    d.a /= std::sqrt(scale);
    d.rho2 /= scale;
    x /= std::sqrt(scale);

    Mat best_x = x;
    double best_primal = squared_errors(d, x).maxCoeff();
    double best_dual = d.rho2.maxCoeff();
    auto certified = [&] {
        const double gap_root = std::sqrt(best_primal) - std::sqrt(std::max(best_dual, 0.0));
        return gap_root <= config.tol_opt * std::sqrt(best_primal) + 1e-12;
    };

    // Barrier method for min s subject to g_i(X) < s.
    double s = 1.5 * best_primal + 1e-12;
    double tau = static_cast<double>(n) / std::max(best_primal, 1e-300);
    diag.objective_history.push_back(std::sqrt(best_primal * scale));
    int newton = 0;
    while (!certified() && newton < config.max_iter) {
        for (; newton < config.max_iter; ++newton) {
            Vec g = squared_errors(d, x);
            Vec h = (s - g.array()).matrix();
            const Mat e = p > 0 ? Mat(d.a - x * d.v) : Mat(0, n);
            const Vec inv_h = h.cwiseInverse();
            // gradient: d/dX = sum (1/h) grad g_i = -2 E diag(1/h) V^T, d/ds = tau - sum 1/h
            Vec grad(nv + 1);
            if (p > 0) {
                const Mat gx = -2.0 * e * inv_h.asDiagonal() * d.v.transpose();
                grad.head(nv) = Eigen::Map<const Vec>(gx.data(), nv);
            }
            grad(nv) = tau - inv_h.sum();
            Mat qcols(nv + 1, n);
            for (Index i = 0; i < n; ++i) {
                for (Index c = 0; c <= m && p > 0; ++c)
                    qcols.col(i).segment(c * p, p) = (-2.0 * d.v(c, i) * inv_h(i)) * e.col(i);
                qcols(nv, i) = -inv_h(i);
            }
            Mat hess = qcols * qcols.transpose();
            if (p > 0) {
                const Mat sv = d.v * (2.0 * inv_h).asDiagonal() * d.v.transpose();
                for (Index a = 0; a <= m; ++a)
                    for (Index b = 0; b <= m; ++b)
                        hess.block(a * p, b * p, p, p).diagonal().array() += sv(a, b);
            }
            hess.diagonal().array() += 1e-14 * hess.diagonal().maxCoeff();
            const Vec step = -hess.ldlt().solve(grad);
            const double decrement = -grad.dot(step);
            if (!(decrement > 1e-6)) break;

            auto value = [&](const Mat& xx, double ss, bool& feasible) {
                const Vec gg = squared_errors(d, xx);
                feasible = (ss - gg.array()).minCoeff() > 0.0;
                return feasible ? tau * ss - (ss - gg.array()).log().sum() : kInfinity;
            };
            bool feasible = true;
            const double f0 = value(x, s, feasible);
            double t = 1.0;
            Mat x_try;
            double s_try = s;
            bool accepted = false;
            for (int k = 0; k < 30 && !accepted; ++k, t *= 0.5) {
                x_try = x + t * Eigen::Map<const Mat>(step.data(), p, m + 1);
                s_try = s + t * step(nv);
                accepted = value(x_try, s_try, feasible) <= f0 - 0.25 * t * decrement && feasible;
            }
            if (!accepted) break;
            x = x_try;
            s = s_try;
            g = squared_errors(d, x);
            const double primal = g.maxCoeff();
            if (primal < best_primal) {
                best_primal = primal;
                best_x = x;
            }
            diag.objective_history.push_back(std::sqrt(best_primal * scale));
        }
        // dual point from the barrier multipliers
        const Vec h = (s - squared_errors(d, x).array()).matrix();
        Vec lambda = h.cwiseInverse();
        lambda /= lambda.sum();
        best_dual = std::max(best_dual, dual_value(d, lambda));
        tau *= 8.0;
        if (tau > 1e20 * static_cast<double>(n)) break;
    }
    diag.iterations = newton;
    diag.certified = certified();
    diag.primal = std::sqrt(best_primal * scale);
    diag.dual = std::sqrt(std::max(best_dual, 0.0) * scale);
    map.z = best_x.col(0) * std::sqrt(scale);
    map.b_matrix = best_x.rightCols(m) * std::sqrt(scale);
    map.training_objective = diag.primal;
    return map;
}

Vec apply(const AffineRecoveryMap& map, const MeasurementSystem& system, const Observation& w)
{
    if (w.w_coords.size() != system.m() || map.m() != system.m())
        throw InvalidInput("apply: observation does not match the map");
    Vec u = system.state(w.w_coords);
    if (map.p() > 0) u += map.complement_basis * (map.z + map.b_matrix * w.w_coords);
    return u;
}

std::vector<double> affine_errors(const AffineRecoveryMap& map, const MeasurementSystem& system, const Mat& states)
{
    std::vector<double> out(static_cast<std::size_t>(states.cols()));
    parallel_for(out.size(), [&](std::size_t i) {
        const Vec u = states.col(static_cast<Index>(i));
        out[i] = system.space().norm(u - apply(map, system, observe(system, u)));
    });
    return out;
}

double width_lower_bound(const DiscreteSpace& space, const Mat& states, Index m)
{
    if (states.cols() == 0) return 0.0;
    const Vec sv = Eigen::BDCSVD<Mat>(space.euclidean_coords(states)).singularValues();
    double tail = 0.0;
    for (Index k = m + 1; k < sv.size(); ++k) tail += sv(k) * sv(k);
    return std::sqrt(tail / static_cast<double>(states.cols()));
}

HeldOutReport evaluate_held_out(const AffineRecoveryMap& map, const MeasurementSystem& system,
                                const ManifoldNet& net, const Mat& held_out)
{
    HeldOutReport rep;
    rep.errors = affine_errors(map, system, held_out);
    rep.net_distance = nearest_net_distance(system.space(), net, held_out);
    rep.max_error = rep.errors.empty() ? 0.0 : *std::max_element(rep.errors.begin(), rep.errors.end());
    rep.delta = rep.net_distance.empty() ? 0.0 : *std::max_element(rep.net_distance.begin(), rep.net_distance.end());
    rep.b_norm = map.b_norm();
    rep.stated_bound = map.training_objective + map.eta + rep.b_norm * rep.delta;
    rep.lipschitz_bound = map.training_objective + std::sqrt(1.0 + rep.b_norm * rep.b_norm) * rep.delta;
    return rep;
}

}  // namespace pbdw
