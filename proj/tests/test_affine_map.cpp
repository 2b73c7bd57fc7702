// SPDX-License-Identifier: Apache-2.0
#include "pbdw/affine_map.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace pbdw {
namespace {

ParametricModel model_2d(int d_y = 4, int n_mesh = 12)
{
    ModelConfig c;
    c.dx = 2;
    c.n_mesh = n_mesh;
    c.d_y = d_y;
    c.rho = 0.9;
    return build_model(c);
}

ManifoldNet net_from(const Mat& states)
{
    ManifoldNet net;
    net.states = states;
    return net;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

// Numerical rank of the columns in the U-geometry.
Index u_rank(const DiscreteSpace& U, const Mat& cols)
{
    const Vec sv = Eigen::JacobiSVD<Mat>(U.euclidean_coords(cols)).singularValues();
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-10 * sv(0)) ++r;
    return r;
}

TEST(Complement, TrivialCases)
{
    const auto model = model_2d();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    EXPECT_EQ(build_complement(system, system.w_basis().leftCols(2)).cols(), 0);

    Rng rng(1);
    Mat v = Mat::NullaryExpr(model.space().dim(), 2, [&] { return rng.normal(); });
    for (int pass = 0; pass < 2; ++pass) v -= system.w_basis() * system.coords(v);
    const Mat c = build_complement(system, orthonormalize(model.space(), v));
    ASSERT_EQ(c.cols(), 2);
    // same span: projecting v onto the complement loses nothing
    const Mat proj = c * (c.transpose() * (model.space().gram() * v));
    EXPECT_LT(model.space().euclidean_coords(v - proj).norm(), 1e-10 * model.space().euclidean_coords(v).norm());
}

TEST(Complement, GeneralPositionRank)
{
    const auto model = model_2d();
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    Rng rng(2);
    Mat snaps(U.dim(), 6);
    for (int k = 0; k < 6; ++k) snaps.col(k) = solve(model, rng.uniform_box(4));
    // include one vector of W so the sum is not direct
    snaps.col(5) = system.w_basis().col(0);
    const Mat u_l = orthonormalize(U, snaps);
    const Mat c = build_complement(system, u_l);
    Mat both(U.dim(), system.m() + u_l.cols());
    both << system.w_basis(), u_l;
    EXPECT_EQ(c.cols(), u_rank(U, both) - system.m());
    EXPECT_LT((system.w_basis().transpose() * (U.gram() * c)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((c.transpose() * (U.gram() * c) - Mat::Identity(c.cols(), c.cols())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AffineFit, SingleStateNet)
{
    const auto model = model_2d();
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    Rng rng(3);
    const Vec u0 = solve(model, rng.uniform_box(4));
    const Vec u1 = solve(model, rng.uniform_box(4));
    const ReducedSpace u_l = ReducedSpace::linear(U, u1, 0.0);
    const AffineRecoveryMap map = fit_affine(system, net_from(u0), u_l);
    // best the complement can do: distance of P_{W perp} u0 to it
    const Vec perp = project_w(system, u0).second;
    const Vec c = map.complement_basis.col(0);
    const double rho = U.norm(perp - U.inner(c, perp) * c);
    EXPECT_NEAR(map.training_objective, rho, 1e-8 * U.norm(u0));
    EXPECT_TRUE(map.diagnostics.certified);
}

TEST(AffineFit, ExactOnAffineLines)
{
    const auto model = model_2d();
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    Rng rng(4);
    const Vec base = solve(model, rng.uniform_box(4));
    const Vec dir = solve(model, rng.uniform_box(4)) - base;
    ASSERT_GT(system.coords(dir).norm(), 1e-3 * U.norm(dir));
    Mat states(U.dim(), 11);
    for (int i = 0; i <= 10; ++i) states.col(i) = base + (-1.0 + 0.2 * i) * dir;
    Mat span(U.dim(), 2);
    span << base, dir;
    const AffineRecoveryMap map = fit_affine(system, net_from(states), ReducedSpace::linear(U, span, 0.0));
    EXPECT_LE(map.training_objective, 1e-6 * U.norm(base));
    EXPECT_LE(max_of(affine_errors(map, system, states)), 1e-6 * U.norm(base));
}

// Nested ternary search for one complement direction and one sensor, where
// X = [z, b] has two entries and the objective is jointly convex.
double two_variable_minmax(const Vec& a, const Vec& w, const Vec& rho2)
{
    auto objective = [&](double z, double b) {
        return ((a.array() - z - b * w.array()).square() + rho2.array()).maxCoeff();
    };
    auto best_over_z = [&](double b) {
        double lo = -10.0, hi = 10.0;
        for (int it = 0; it < 200; ++it) {
            const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
            if (objective(m1, b) < objective(m2, b))
                hi = m2;
            else
                lo = m1;
        }
        return objective(0.5 * (lo + hi), b);
    };
    double lo = -100.0, hi = 100.0;
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (best_over_z(m1) < best_over_z(m2))
            hi = m2;
        else
            lo = m1;
    }
    return std::sqrt(best_over_z(0.5 * (lo + hi)));
}

TEST(AffineFit, MatchesTwoVariableSearch)
{
    const auto model = model_2d(4, 10);
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 1, 0.3));
    const ManifoldNet net = build_net(model, TrainingSet::tensor_grid(ParamBox::unit(4), 3));
    Rng rng(5);
    const ReducedSpace u_l = ReducedSpace::linear(U, solve(model, rng.uniform_box(4)), 0.0);
    const AffineRecoveryMap map = fit_affine(system, net, u_l);
    ASSERT_EQ(map.p(), 1);
    ASSERT_TRUE(map.diagnostics.certified);

    const Mat w = system.coords(net.states);
    const Mat perp = net.states - system.w_basis() * w;
    const Vec c = map.complement_basis.col(0);
    const Vec a = (c.transpose() * (U.gram() * perp)).transpose();
    Vec rho2(net.size());
    for (Index i = 0; i < net.size(); ++i) {
        const Vec rest = perp.col(i) - a(i) * c;
        rho2(i) = U.inner(rest, rest);
    }
    // normalize so the search window contains the optimum
    const double scale = a.cwiseAbs().maxCoeff();
    const double wscale = w.cwiseAbs().maxCoeff();
    const double oracle = scale * two_variable_minmax(a / scale, w.row(0).transpose() / wscale, rho2 / (scale * scale));
    EXPECT_NEAR(map.training_objective, oracle, 1e-5 * oracle);
    EXPECT_LE(map.diagnostics.dual, map.training_objective * (1 + 1e-12));
}

TEST(AffineFit, DominatesPoorMansMapAndWidthBound)
{
    const auto model = model_2d();
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const TrainingSet grid = TrainingSet::tensor_grid(ParamBox::unit(4), 3);
    const ManifoldNet net = build_net(model, grid);
    GreedyOptions opt;
    opt.n_max = 10;
    const GreedyResult greedy = weak_greedy(model, grid, opt);
    const AffineRecoveryMap map = fit_affine(system, net, greedy.space);
    EXPECT_TRUE(map.diagnostics.certified);
    const auto& hist = map.diagnostics.objective_history;
    for (std::size_t k = 1; k < hist.size(); ++k) EXPECT_LE(hist[k], hist[k - 1]);
    EXPECT_NEAR(max_of(affine_errors(map, system, net.states)), map.training_objective, 1e-9 * map.training_objective);

    std::vector<ReducedSpace> nested;
    for (Index n = 1; n <= std::min<Index>(greedy.space.n(), system.m()); ++n) nested.push_back(greedy.nested(n));
    const PoorMansResult pm = poor_mans_select(model, system, nested);
    double poor = 0.0;
    for (Index i = 0; i < net.size(); ++i) {
        const Vec u = net.states.col(i);
        poor = std::max(poor, U.norm(u - pm.map.recover(observe(system, u))));
    }
    EXPECT_LE(map.training_objective, poor * (1 + 1e-9));
    EXPECT_GE(map.training_objective, width_lower_bound(U, net.states, system.m()) * (1 - 1e-9));
}

TEST(AffineApply, DataConsistencyAndLinearity)
{
    const auto model = model_2d();
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    Rng rng(6);
    const ManifoldNet net = build_net(model, TrainingSet::sparse_random(ParamBox::unit(4), 30, 6));
    GreedyOptions opt;
    opt.n_max = 6;
    const AffineRecoveryMap map =
        fit_affine(system, net, weak_greedy(model, TrainingSet::tensor_grid(ParamBox::unit(4), 3), opt).space);
    const Vec w1 = rng.normal_vector(system.m()), w2 = rng.normal_vector(system.m());
    const Vec a1 = apply(map, system, observation_from_coords(system, w1));
    const Vec a2 = apply(map, system, observation_from_coords(system, w2));
    const Vec a12 = apply(map, system, observation_from_coords(system, Vec(w1 + w2)));
    const Vec a0 = apply(map, system, observation_from_coords(system, Vec::Zero(system.m())));
    EXPECT_LT(U.norm((a12 - a0) - (a1 - a0) - (a2 - a0)), 1e-12 * U.norm(a12));
    EXPECT_LT((system.coords(a1) - w1).norm(), 1e-10 * w1.norm());

    AffineRecoveryMap zero = map;
    zero.z.setZero();
    zero.b_matrix.setZero();
    EXPECT_LT(U.norm(apply(zero, system, observation_from_coords(system, w1)) - system.state(w1)), 1e-14);
}

TEST(AffineHeldOut, GapWithinNetBounds)
{
    const auto model = model_2d();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const TrainingSet grid = TrainingSet::tensor_grid(ParamBox::unit(4), 3);
    ManifoldNet net = build_net(model, grid);
    GreedyOptions opt;
    opt.n_max = 12;
    const GreedyResult greedy = weak_greedy(model, grid, opt);
    const AffineRecoveryMap map = fit_affine(system, net, greedy.space);
    const ManifoldNet held = build_net(model, TrainingSet::sparse_random(ParamBox::unit(4), 40, 8));
    const HeldOutReport rep = evaluate_held_out(map, system, net, held.states);
    EXPECT_LE(rep.max_error, rep.lipschitz_bound);
    EXPECT_LE(rep.max_error, rep.stated_bound);
    for (std::size_t i = 0; i < rep.errors.size(); ++i)
        EXPECT_LE(rep.errors[i], map.training_objective + std::sqrt(1 + rep.b_norm * rep.b_norm) * rep.net_distance[i] * (1 + 1e-9));
    EXPECT_GT(estimate_net_delta(model, net, TrainingSet::tensor_grid(ParamBox::unit(4), 4)), 0.0);
    EXPECT_TRUE(net.delta_estimated);
}

}  // namespace
}  // namespace pbdw
