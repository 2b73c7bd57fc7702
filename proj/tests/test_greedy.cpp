// SPDX-License-Identifier: Apache-2.0
#include "pbdw/greedy.hpp"

#include <gtest/gtest.h>

#include <set>

namespace pbdw {
namespace {

ParametricModel make_model(int d_y, int n_mesh = 100, double rho = 0.9)
{
    ModelConfig c;
    c.n_mesh = n_mesh;
    c.d_y = d_y;
    c.rho = rho;
    return build_model(c);
}

// Galerkin projection assembled from the full matrices, independent of the
// offline/online split in SurrogateEvaluator.
double direct_surrogate(const ParametricModel& model, const Mat& basis, const Param& y)
{
    const SpMat a = model.assemble(y);
    Vec galerkin = Vec::Zero(model.space().dim());
    if (basis.cols() > 0) {
        const Mat reduced = basis.transpose() * (a * basis);
        galerkin = basis * reduced.ldlt().solve(basis.transpose() * model.load());
    }
    return model.space().dual_norm(model.load() - a * galerkin);
}

TEST(RandomTraining, SizeFormulaAndDeterminism)
{
    EXPECT_EQ(random_training_size(1e-2, 1e-2, {10.0}), 93u);
    const TrainingSet a = random_training(8, 1e-2, 1e-2, {10.0}, 42);
    const TrainingSet b = random_training(8, 1e-2, 1e-2, {10.0}, 42);
    ASSERT_EQ(a.size(), 93u);
    std::set<std::vector<double>> unique;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.points[i], b.points[i]);
        EXPECT_TRUE(ParamBox::unit(8).contains(a.points[i]));
        unique.insert(std::vector<double>(a.points[i].data(), a.points[i].data() + 8));
    }
    EXPECT_EQ(unique.size(), a.size());
    EXPECT_EQ(a.target_eps, 1e-2);
    EXPECT_THROW(random_training(2, 0.0, 0.5, {}, 1), InvalidInput);
    EXPECT_THROW(random_training(2, 0.5, 1.0, {}, 1), InvalidInput);
}

TEST(TrainingSet, TensorGridCoversTheBox)
{
    const TrainingSet grid = TrainingSet::tensor_grid(ParamBox::unit(2), 3);
    ASSERT_EQ(grid.size(), 9u);
    EXPECT_EQ(grid.points[0], (Param(2) << -1, -1).finished());
    EXPECT_EQ(grid.points[1], (Param(2) << 0, -1).finished());
    EXPECT_EQ(grid.points[8], (Param(2) << 1, 1).finished());
}

TEST(Surrogate, ZeroSpaceGivesLoadDualNorm)
{
    const auto model = make_model(2);
    ReducedSpace empty;
    empty.basis.resize(model.space().dim(), 0);
    Rng rng(1);
    for (int t = 0; t < 5; ++t)
        EXPECT_NEAR(surrogate(model, empty, rng.uniform_box(2)), model.space().dual_norm(model.load()), 1e-15);
}

TEST(Surrogate, VanishesOnSelectedSnapshots)
{
    const auto model = make_model(3);
    const auto training = TrainingSet::tensor_grid(ParamBox::unit(3), 3);
    GreedyOptions opt;
    opt.n_max = 4;
    const GreedyResult res = weak_greedy(model, training, opt);
    for (const Param& y : res.trace.selected_params) EXPECT_LE(surrogate(model, res.space, y), 1e-9);
}

TEST(Surrogate, MatchesDirectAssemblyAndIsTight)
{
    const auto model = make_model(3);
    const DiscreteSpace& U = model.space();
    const auto training = TrainingSet::tensor_grid(ParamBox::unit(3), 4);
    GreedyOptions opt;
    opt.n_max = 6;
    const GreedyResult res = weak_greedy(model, training, opt);
    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        const Index n = t % 6;
        const ReducedSpace sub = res.nested(n);
        const Param y = rng.uniform_box(3);
        const SurrogateEvaluator eval(model, sub);
        const double s = eval(y);
        EXPECT_NEAR(s, direct_surrogate(model, sub.basis, y), 1e-10 * s + 1e-12 * model.space().dual_norm(model.load()));
        const Vec u = solve(model, y);
        const double galerkin_err = U.norm(u - eval.galerkin_state(y));
        const double best = distance_to_space(U, sub, u);
        if (best < 1e-11) continue;
        EXPECT_GE(s / galerkin_err, model.r() * (1 - 1e-8));
        EXPECT_LE(s / galerkin_err, model.R() * (1 + 1e-8));
        EXPECT_GE(s / best, model.r() * (1 - 1e-8));
        EXPECT_LE(s / best, model.R() * (1 + 1e-8));
    }
}

TEST(WeakGreedy, SelectsTheBruteForceArgmax)
{
    const auto model = make_model(2, 80);
    const auto training = TrainingSet::tensor_grid(ParamBox::unit(2), 3);
    GreedyOptions opt;
    opt.n_max = 3;
    const GreedyResult res = weak_greedy(model, training, opt);
    ASSERT_EQ(res.space.n(), 3);
    for (Index k = 0; k < 3; ++k) {
        const Mat basis = res.space.basis.leftCols(k);
        double best = -1.0;
        for (const Param& y : training.points) best = std::max(best, direct_surrogate(model, basis, y));
        EXPECT_NEAR(res.trace.surrogate_max_history[static_cast<std::size_t>(k)], best, 1e-9 * best);
        // Mirror-symmetric parameters can tie exactly; compare values, not points.
        const Param& chosen = res.trace.selected_params[static_cast<std::size_t>(k)];
        EXPECT_GE(direct_surrogate(model, basis, chosen), best * (1 - 1e-9)) << "step " << k;
    }
}

TEST(WeakGreedy, LargeToleranceReturnsEmptySpace)
{
    const auto model = make_model(2);
    GreedyOptions opt;
    opt.n_max = 5;
    opt.tol = 1e3;
    const GreedyResult res = weak_greedy(model, TrainingSet::tensor_grid(ParamBox::unit(2), 3), opt);
    EXPECT_EQ(res.space.n(), 0);
    EXPECT_EQ(res.trace.surrogate_max_history.size(), 1u);
}

TEST(WeakGreedy, DistanceHistoryNonIncreasingAndCertified)
{
    ModelConfig c;
    c.dx = 2;
    c.n_mesh = 12;
    c.d_y = 4;
    c.rho = 0.9;
    const auto model = build_model(c);
    GreedyOptions opt;
    opt.n_max = 10;
    opt.record_dist = true;
    const GreedyResult res = weak_greedy(model, TrainingSet::tensor_grid(ParamBox::unit(4), 3), opt);
    const auto& dist = res.trace.dist_history;
    ASSERT_EQ(dist.size(), res.trace.eps_history.size());
    for (std::size_t k = 1; k < dist.size(); ++k) EXPECT_LE(dist[k], dist[k - 1] * (1 + 1e-12));
    for (std::size_t k = 0; k < dist.size(); ++k) EXPECT_LE(dist[k], res.trace.eps_history[k] * (1 + 1e-10));
    for (std::size_t k = 1; k < dist.size(); ++k)
        EXPECT_LE(res.trace.surrogate_max_history[k],
                  model.kappa() * res.trace.surrogate_max_history[k - 1] * (1 + 1e-10));
}

TEST(WeakGreedy, ReproducibleAndDeflating)
{
    const auto model = make_model(1, 60);
    GreedyOptions opt;
    opt.n_max = 6;
    const auto training = TrainingSet::tensor_grid(ParamBox::unit(1), 9);
    const GreedyResult a = weak_greedy(model, training, opt);
    const GreedyResult b = weak_greedy(model, training, opt);
    EXPECT_EQ(a.trace.selected_params, b.trace.selected_params);
    // In 1D with one parameter the manifold spans at most two directions.
    EXPECT_LE(a.space.n(), 3);
    const Mat gram = a.space.basis.transpose() * (model.space().gram() * a.space.basis);
    EXPECT_LT((gram - Mat::Identity(a.space.n(), a.space.n())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WeakGreedy, ResampledTrainingIsDeterministic)
{
    const auto model = make_model(4);
    GreedyOptions opt;
    opt.n_max = 5;
    opt.resample = true;
    opt.resample_size = 30;
    opt.seed = 9;
    TrainingSet box_only;
    box_only.box = ParamBox::unit(4);
    const GreedyResult a = weak_greedy(model, box_only, opt);
    const GreedyResult b = weak_greedy(model, box_only, opt);
    EXPECT_EQ(a.space.n(), 5);
    EXPECT_EQ(a.trace.selected_params, b.trace.selected_params);
}

TEST(WeakGreedy, AnchoredSnapshots)
{
    const auto model = make_model(2);
    const ParamBox box{Vec::Constant(2, 0.0), Vec::Constant(2, 1.0)};
    GreedyOptions opt;
    opt.n_max = 2;
    opt.anchor = solve(model, box.center());
    const GreedyResult res = weak_greedy(model, TrainingSet::tensor_grid(box, 3), opt);
    EXPECT_EQ(res.space.anchor, *opt.anchor);
    for (const Param& y : res.trace.selected_params) EXPECT_LE(surrogate(model, res.space, y), 1e-9);
}

TEST(PoorMans, MatchesExhaustiveProduct)
{
    ModelConfig c;
    c.dx = 2;
    c.n_mesh = 12;
    c.d_y = 2;
    c.rho = 0.9;
    const auto model = build_model(c);
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.15));
    GreedyOptions opt;
    opt.n_max = 4;
    const GreedyResult res = weak_greedy(model, TrainingSet::tensor_grid(ParamBox::unit(2), 5), opt);
    std::vector<ReducedSpace> nested;
    for (Index n = 1; n <= res.space.n(); ++n) nested.push_back(res.nested(n));
    const PoorMansResult pm = poor_mans_select(model, system, nested);

    double best = kInfinity;
    Index arg = -1;
    for (const auto& s : nested) {
        const double mu = beta_mu(s, system).mu;
        const double product = mu * s.eps;
        if (product < best) {
            best = product;
            arg = s.n();
        }
    }
    EXPECT_EQ(pm.n_star, arg);
    EXPECT_EQ(pm.map.n(), arg);
    ASSERT_EQ(pm.table.size(), nested.size());
    for (std::size_t k = 1; k < pm.table.size(); ++k) {
        EXPECT_GE(pm.table[k].mu, pm.table[k - 1].mu * (1 - 1e-12));
        EXPECT_LE(pm.table[k].eps, model.kappa() * pm.table[k - 1].eps);
    }
}

TEST(PoorMans, ExactSpaceWinsAndInfiniteMuIsAnError)
{
    const auto model = make_model(2);
    const auto system = build_system(model.space_ptr(), equispaced_sensors(1, 3, 0.1));
    Rng rng(3);
    Mat states(model.space().dim(), 2);
    for (int k = 0; k < 2; ++k) states.col(k) = solve(model, rng.uniform_box(2));
    std::vector<ReducedSpace> nested{ReducedSpace::linear(model.space(), states.leftCols(1), 0.3),
                                     ReducedSpace::linear(model.space(), states, 0.0)};
    EXPECT_EQ(poor_mans_select(model, system, nested).n_star, 2);

    Vec v = rng.normal_vector(model.space().dim());
    v -= system.state(system.coords(v));
    v -= system.state(system.coords(v));
    std::vector<ReducedSpace> hopeless{ReducedSpace::linear(model.space(), v, 0.1)};
    EXPECT_THROW(poor_mans_select(model, system, hopeless), NumericalError);
}

}  // namespace
}  // namespace pbdw
