// SPDX-License-Identifier: Apache-2.0
#include "pbdw/sensing.hpp"

#include <gtest/gtest.h>

namespace pbdw {
namespace {

ParametricModel model_1d(int n)
{
    ModelConfig c;
    c.n_mesh = n;
    c.d_y = 2;
    c.rho = 0.5;
    return build_model(c);
}

TEST(BuildSystem, PointValueRieszIdentity)
{
    const auto model = model_1d(64);
    const auto sys = build_system(model.space_ptr(), {{SensorKind::point_value, {0.5}, 0.0}});
    const Vec psi = sys.representers().col(0);
    EXPECT_NEAR(model.space().inner(psi, psi), sys.sensors()[0].functional.dot(psi), 1e-12);
    // Green's function of -u'' at 1/2 peaks at 1/4
    EXPECT_NEAR(psi.maxCoeff(), 0.25, 1e-12);
}

TEST(BuildSystem, IdenticalSensorsAreRankDeficient)
{
    const auto model = model_1d(64);
    const SensorSpec s{SensorKind::local_average, {0.3}, 0.1};
    try {
        build_system(model.space_ptr(), {s, {SensorKind::local_average, {0.7}, 0.1}, s});
        FAIL() << "expected rank deficiency";
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("sensor 2"), std::string::npos) << e.what();
    }
}

TEST(BuildSystem, RejectsInvalidSupports)
{
    const auto model = model_1d(64);
    EXPECT_THROW(build_system(model.space_ptr(), {{SensorKind::local_average, {0.02}, 0.1}}), InvalidInput);
    EXPECT_THROW(build_system(model.space_ptr(), {}), InvalidInput);
    EXPECT_THROW(build_system(model.space_ptr(), {{SensorKind::local_average, {0.5, 0.5}, 0.1}}), InvalidInput);
    ModelConfig c;
    c.dx = 2;
    c.n_mesh = 8;
    c.d_y = 1;
    const auto m2 = build_model(c);
    EXPECT_THROW(build_system(m2.space_ptr(), {{SensorKind::point_value, {0.5, 0.5}, 0.0}}), InvalidInput);
}

TEST(BuildSystem, EquispacedAveragesAreWellConditioned)
{
    const auto model = model_1d(200);
    const auto sys = build_system(model.space_ptr(), equispaced_sensors(1, 8, 0.1));
    EXPECT_EQ(sys.m(), 8);
    EXPECT_TRUE(std::isfinite(sys.gramian_condition()));
    EXPECT_GE(sys.gramian_condition(), 1.0);
    const Mat gram_w = sys.w_basis().transpose() * (model.space().gram() * sys.w_basis());
    EXPECT_LT((gram_w - Mat::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildSystem, RepresentersReproduceFunctionals)
{
    const auto model = model_1d(100);
    const auto sys = build_system(model.space_ptr(), equispaced_sensors(1, 5, 0.1));
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const Vec v = rng.normal_vector(model.space().dim());
        for (Index i = 0; i < sys.m(); ++i)
            EXPECT_NEAR(model.space().inner(sys.representers().col(i), v), sys.functionals().col(i).dot(v),
                        1e-10 * v.norm());
    }
}

// Independent oracle: the trapezoid rule over the nodes in [0.4, 0.6] is exact
// for piecewise linear functions whose kinks sit on the nodes.
TEST(BuildSystem, LocalAverageLiftMatchesDirectAverage)
{
    const auto model = model_1d(200);
    const auto sys = build_system(model.space_ptr(), {{SensorKind::local_average, {0.5}, 0.2}});
    const Vec lift = sys.representers().col(0);
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const Vec v = rng.normal_vector(model.space().dim());
        // node k (1-based) sits at k/200; interval covers nodes 80..120
        double integral = 0.0;
        for (int k = 80; k < 120; ++k) integral += 0.5 * (v(k - 1) + v(k)) / 200.0;
        EXPECT_NEAR(model.space().inner(lift, v), integral / 0.2, 1e-10);
    }
}

TEST(BuildSystem, BoxAverageOfBilinearFunctionIn2D)
{
    ModelConfig c;
    c.dx = 2;
    c.n_mesh = 20;
    c.d_y = 1;
    const auto model = build_model(c);
    const auto sys = build_system(model.space_ptr(), {{SensorKind::local_average, {0.45, 0.6}, 0.3}});
    Vec v(model.space().dim());
    for (Index k = 0; k < v.size(); ++k) v(k) = model.space().nodes()(k, 0) * model.space().nodes()(k, 1);
    EXPECT_NEAR(sys.raw_values(v)(0), 0.45 * 0.6, 1e-13);
}

TEST(ProjectW, MembersComplementAndPythagoras)
{
    const auto model = model_1d(120);
    const DiscreteSpace& U = model.space();
    const auto sys = build_system(model.space_ptr(), equispaced_sensors(1, 6, 0.1));
    Rng rng(12);

    const Vec in_w = sys.representers() * rng.normal_vector(6);
    const auto [w1, p1] = project_w(sys, in_w);
    EXPECT_LT(U.norm(p1), 1e-10 * U.norm(in_w));

    Vec perp = rng.normal_vector(U.dim());
    perp -= sys.state(sys.coords(perp));
    perp -= sys.state(sys.coords(perp));
    const auto [w2, p2] = project_w(sys, perp);
    EXPECT_LT(U.norm(w2), 1e-10 * U.norm(perp));

    for (int t = 0; t < 100; ++t) {
        const Vec u = rng.normal_vector(U.dim());
        const auto [w, p] = project_w(sys, u);
        const double lhs = U.inner(u, u);
        EXPECT_NEAR(lhs, U.inner(w, w) + U.inner(p, p), 1e-10 * lhs);
    }
}

TEST(ProjectW, IdempotentAndSelfAdjoint)
{
    const auto model = model_1d(90);
    const DiscreteSpace& U = model.space();
    const auto sys = build_system(model.space_ptr(), equispaced_sensors(1, 4, 0.15));
    Rng rng(13);
    for (int t = 0; t < 20; ++t) {
        const Vec u = rng.normal_vector(U.dim());
        const Vec v = rng.normal_vector(U.dim());
        const Vec pu = project_w(sys, u).first;
        const Vec pv = project_w(sys, v).first;
        EXPECT_LE(U.norm(project_w(sys, pu).first - pu), 1e-10);
        EXPECT_NEAR(U.inner(pu, v), U.inner(u, pv), 1e-10 * U.norm(u) * U.norm(v));
    }
}

TEST(Observe, InformationEquivalenceAndNoise)
{
    const auto model = model_1d(100);
    const auto sys = build_system(model.space_ptr(), equispaced_sensors(1, 5, 0.1));
    const Vec u = solve(model, Param::Constant(2, 0.3));

    const Observation clean = observe(sys, u);
    EXPECT_LT((clean.raw - sys.functionals().transpose() * u).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((sys.coords_from_raw(clean.raw) - clean.w_coords).norm(), 1e-10);
    EXPECT_LT((sys.raw_from_coords(sys.coords_from_raw(clean.raw)) - clean.raw).norm(), 1e-10);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Observation noisy = observe(sys, u, {NoiseKind::bounded, 1e-3}, seed);
        EXPECT_LE((noisy.w_coords - clean.w_coords).norm(), 1e-3 * (1 + 1e-12));
        EXPECT_EQ(noisy.noise_level, 1e-3);
    }
    const Observation g1 = observe(sys, u, {NoiseKind::gaussian, 1e-4}, 77);
    const Observation g2 = observe(sys, u, {NoiseKind::gaussian, 1e-4}, 77);
    EXPECT_EQ(g1.raw, g2.raw);
    EXPECT_EQ(g1.w_coords, g2.w_coords);
    EXPECT_GT((g1.raw - clean.raw).norm(), 0.0);
}

TEST(SensorSpecJson, StrictParsing)
{
    const SensorSpec s = SensorSpec::from_json({{"kind", "local_average"}, {"center", 0.25}, {"width", 0.05}});
    EXPECT_EQ(s.center.size(), 1u);
    EXPECT_DOUBLE_EQ(s.center[0], 0.25);
    EXPECT_THROW(SensorSpec::from_json({{"kind", "laser"}, {"center", 0.2}}), InvalidInput);
    EXPECT_THROW(SensorSpec::from_json({{"center", 0.2}, {"radius", 1}}), InvalidInput);
}

}  // namespace
}  // namespace pbdw
