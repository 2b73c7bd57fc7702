// SPDX-License-Identifier: Apache-2.0
#include "pbdw/inverse.hpp"

#include <algorithm>

namespace pbdw {

Mat residual_quadratic(const ParametricModel& model, const Vec& u_bar)
{
    const DiscreteSpace& space = model.space();
    if (u_bar.size() != space.dim()) throw InvalidInput("state has the wrong dimension");
    const auto& ops = model.ops();
    Mat r(space.dim(), model.d_y() + 1);
    r.col(0) = model.load() - ops[0] * u_bar;
    for (int j = 1; j <= model.d_y(); ++j) r.col(j) = -(ops[static_cast<std::size_t>(j)] * u_bar);
    const Mat lifted = space.riesz_lift(r);
    Mat q = r.transpose() * lifted;
    return 0.5 * (q + q.transpose());
}

namespace {

double objective(const Mat& q, const Vec& y)
{
    const Index d = y.size();
    return q(0, 0) + 2.0 * q.col(0).tail(d).dot(y) + y.dot(q.bottomRightCorner(d, d) * y);
}

Vec gradient(const Mat& q, const Vec& y)
{
    const Index d = y.size();
    return 2.0 * (q.col(0).tail(d) + q.bottomRightCorner(d, d) * y);
}

Vec project(const ParamBox& box, const Vec& y) { return y.cwiseMax(box.lo).cwiseMin(box.hi); }

double kkt_scale(const Mat& q) { return std::max(q.cwiseAbs().maxCoeff(), 1e-300); }

}  // namespace

double box_qp_kkt_residual(const Mat& q, const ParamBox& box, const Vec& y)
{
    const Vec g = gradient(q, y);
    return (y - project(box, y - g / kkt_scale(q))).cwiseAbs().maxCoeff();
}

BoxQpResult minimize_box_qp(const Mat& q, const ParamBox& box, const LsConfig& config)
{
    const Index d = box.dim();
    if (q.rows() != d + 1 || q.cols() != d + 1) throw InvalidInput("quadratic form does not match the box");
    const Mat h = q.bottomRightCorner(d, d);
    const double s = kkt_scale(q);
    // Lipschitz constant of the gradient, for the fallback step
    const double lip = std::max(2.0 * h.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff(), 1e-300);
    const double armijo = 1e-4;

    BoxQpResult res;
    Vec y = project(box, box.center());
    double f = objective(q, y);
    res.history.push_back(f);
    for (res.iterations = 0; res.iterations < config.max_iter; ++res.iterations) {
        const Vec g = gradient(q, y);
        res.kkt_residual = (y - project(box, y - g / s)).cwiseAbs().maxCoeff();
        if (res.kkt_residual <= config.kkt_tol) {
            res.converged = true;
            break;
        }
        // epsilon-active set: variables at (or near) a face with the gradient pushing outward
        const double eps_active = std::min(1e-3 * box.width().minCoeff(), res.kkt_residual);
        std::vector<Index> free_idx;
        Vec dir = Vec::Zero(d);
        for (Index i = 0; i < d; ++i) {
            const bool at_lo = y(i) <= box.lo(i) + eps_active && g(i) > 0;
            const bool at_hi = y(i) >= box.hi(i) - eps_active && g(i) < 0;
            if (at_lo || at_hi)
                dir(i) = -g(i) / s;
            else
                free_idx.push_back(i);
        }
        if (!free_idx.empty()) {
            const auto nf = static_cast<Index>(free_idx.size());
            Mat hf(nf, nf);
            Vec gf(nf);
            for (Index a = 0; a < nf; ++a) {
                gf(a) = g(free_idx[static_cast<std::size_t>(a)]);
                for (Index b = 0; b < nf; ++b)
                    hf(a, b) = h(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
            }
            hf.diagonal().array() += 1e-12 * s;
            const Vec step = -0.5 * hf.ldlt().solve(gf);
            for (Index a = 0; a < nf; ++a) dir(free_idx[static_cast<std::size_t>(a)]) = step(a);
        }

        bool accepted = false;
        double alpha = 1.0;
        for (int k = 0; k < 40 && !accepted; ++k, alpha *= 0.5) {
            const Vec trial = project(box, y + alpha * dir);
            const double ft = objective(q, trial);
            if (trial != y && ft <= f + armijo * g.dot(trial - y)) {
                y = trial;
                f = ft;
                accepted = true;
            }
        }
        if (!accepted) {
            const Vec trial = project(box, y - g / lip);
            const double ft = objective(q, trial);
            if (!(ft <= f)) break;
            if ((trial - y).cwiseAbs().maxCoeff() == 0.0) break;
            y = trial;
            f = ft;
        }
        res.history.push_back(f);
    }
    if (!res.converged) {
        res.kkt_residual = box_qp_kkt_residual(q, box, y);
        res.converged = res.kkt_residual <= config.kkt_tol;
    }
    res.y = y;
    res.objective = f;
    return res;
}

ProjectionResult metric_project(const ParametricModel& model, const Vec& u_bar, const LsConfig& config,
                                const ParamBox* box)
{
    const ParamBox domain = box ? *box : ParamBox::unit(model.d_y());
    if (domain.dim() != model.d_y()) throw InvalidInput("box dimension does not match d_y");
    const Mat q = residual_quadratic(model, u_bar);
    const BoxQpResult qp = minimize_box_qp(q, domain, config);

    ProjectionResult out;
    out.y_bar = qp.y;
    out.kkt_residual = qp.kkt_residual;
    out.converged = qp.converged;
    out.iterations = qp.iterations;
    out.objective_history = qp.history;
    out.active.assign(static_cast<std::size_t>(model.d_y()), 0);
    for (Index j = 0; j < model.d_y(); ++j) {
        if (qp.y(j) <= domain.lo(j)) out.active[static_cast<std::size_t>(j)] = -1;
        if (qp.y(j) >= domain.hi(j)) out.active[static_cast<std::size_t>(j)] = 1;
    }
    const Vec u = solve(model, qp.y);
    out.s_value = model.space().norm(u_bar - u);
    out.residual_at_opt = model.space().dual_norm(residual(model, u_bar, qp.y).dual_vector);
    return out;
}

ParameterEstimate estimate_parameter(const ParametricModel& model, const Vec& recovered_state,
                                     double certificate, const LsConfig& config)
{
    if (!(certificate >= 0.0)) throw InvalidInput("certificate must be nonnegative");
    ParameterEstimate est;
    est.projection = metric_project(model, recovered_state, config);
    est.chain_bound = (1.0 + model.kappa()) * certificate;
    return est;
}

}  // namespace pbdw
