// SPDX-License-Identifier: Apache-2.0
#include "pbdw/oracle.hpp"

#include "pbdw/greedy.hpp"
#include "pbdw/onespace.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace pbdw {
namespace {

ParametricModel model_2d(int d_y = 2, int n_mesh = 16)
{
    ModelConfig c;
    c.dx = 2;
    c.n_mesh = n_mesh;
    c.d_y = d_y;
    c.rho = 0.9;
    return build_model(c);
}

TEST(ManifoldNet, SizeBudgetAndCache)
{
    ModelConfig c;
    c.n_mesh = 50;
    c.d_y = 1;
    const auto model = build_model(c);
    EXPECT_EQ(manifold_net(model, 11).size(), 11);

    ModelConfig big = c;
    big.d_y = 7;
    EXPECT_THROW(manifold_net(build_model(big), 8), InvalidInput);

    const auto dir = std::filesystem::temp_directory_path() / "pbdw_oracle_cache_test";
    std::filesystem::remove_all(dir);
    const OracleNet first = manifold_net(model, 7, dir.string());
    const OracleNet second = manifold_net(model, 7, dir.string());
    EXPECT_FALSE(first.from_cache);
    EXPECT_TRUE(second.from_cache);
    EXPECT_EQ(first.states, second.states);
    std::filesystem::remove_all(dir);
}

TEST(NetGeometry, PreservesPairDistances)
{
    const auto model = model_2d();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    for (int grid : {3, 21}) {
        const OracleNet net = manifold_net(model, grid);
        const NetGeometry g = net_geometry(net, system);
        Rng rng(1);
        for (int t = 0; t < 20; ++t) {
            const auto i = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(net.size()));
            const auto j = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(net.size()));
            const double direct = model.space().norm(net.states.col(i) - net.states.col(j));
            const double split = std::sqrt((g.w.col(i) - g.w.col(j)).squaredNorm() + (g.perp.col(i) - g.perp.col(j)).squaredNorm());
            EXPECT_NEAR(split, direct, 1e-10 * (1 + direct));
        }
    }
}

TEST(Slice, MembersAndRadius)
{
    const auto model = model_2d();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const OracleNet net = manifold_net(model, 11);
    const NetGeometry g = net_geometry(net, system);
    const double tol = default_eps_slice(g);
    for (Index i : {Index{0}, Index{17}, Index{60}}) {
        const SliceResult s = slice_and_radius(g, g.w.col(i), tol);
        ASSERT_FALSE(s.empty());
        EXPECT_NE(std::find(s.members.begin(), s.members.end(), i), s.members.end());
    }
    EXPECT_TRUE(slice_and_radius(g, Vec::Constant(system.m(), 1e3), tol).empty());
    EXPECT_THROW(slice_and_radius(g, g.w.col(0), 0.0), InvalidInput);
}

TEST(Slice, SingletonWithEnoughSensors)
{
    // d_y = 2 with four sensors off the symmetry lines: the data determine y
    const auto model = model_2d();
    std::vector<SensorSpec> specs;
    for (auto [x, y] : {std::pair{0.2, 0.3}, {0.45, 0.7}, {0.7, 0.4}, {0.85, 0.8}}) {
        SensorSpec s;
        s.center = {x, y};
        s.width = 0.15;
        specs.push_back(s);
    }
    const auto system = build_system(model.space_ptr(), specs);
    const OracleNet net = manifold_net(model, 9);
    const NetGeometry g = net_geometry(net, system);
    for (Index i = 0; i < net.size(); i += 7) {
        const SliceResult s = slice_and_radius(g, g.w.col(i), default_eps_slice(g));
        EXPECT_EQ(s.members.size(), 1u);
        EXPECT_EQ(s.radius_lb, 0.0);
    }
}

TEST(Slice, RadiusBelowAnyMapError)
{
    const auto model = model_2d(3);
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const OracleNet net = manifold_net(model, 9);
    const NetGeometry g = net_geometry(net, system);
    GreedyOptions opt;
    opt.n_max = 3;
    const OneSpaceMap map(weak_greedy(model, TrainingSet::tensor_grid(ParamBox::unit(3), 5), opt).space, system);
    const double tol = 50 * default_eps_slice(g);
    int nontrivial = 0;
    for (Index c = 0; c < net.size(); c += 11) {
        const SliceResult s = slice_and_radius(g, g.w.col(c), tol);
        if (s.members.size() > 1) ++nontrivial;
        double worst = 0.0, spread = 0.0;
        for (Index i : s.members) {
            const Vec ai = map.recover_coords(g.w.col(i));
            worst = std::max(worst, U.norm(Vec(net.states.col(i)) - ai));
            for (Index j : s.members) spread = std::max(spread, U.norm(ai - map.recover_coords(g.w.col(j))));
        }
        EXPECT_LE(s.radius_lb, worst + 0.5 * spread + 1e-14);
    }
    EXPECT_GT(nontrivial, 0);
}

TEST(DeltaEps, FullObservationGivesZero)
{
    ModelConfig c;
    c.n_mesh = 20;
    c.d_y = 2;
    const auto model = build_model(c);
    std::vector<SensorSpec> specs;
    for (int i = 1; i < 20; ++i) {
        SensorSpec s;
        s.kind = SensorKind::point_value;
        s.center = {i / 20.0};
        specs.push_back(s);
    }
    const auto system = build_system(model.space_ptr(), specs);
    const NetGeometry g = net_geometry(manifold_net(model, 5), system);
    EXPECT_EQ(delta_eps_bruteforce(g, 0.0, 1e-12).delta_lb, 0.0);
}

TEST(DeltaEps, MonotoneInEpsAndRegression)
{
    const auto model = model_2d();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const NetGeometry g = net_geometry(manifold_net(model, 21), system);
    const double tol = default_eps_slice(g);
    double previous = -1.0;
    for (double eps : {0.0, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2}) {
        const DeltaResult d = delta_eps_bruteforce(g, eps, tol);
        EXPECT_GE(d.delta_lb, previous);
        EXPECT_GE(d.delta_lb, 2 * eps);
        EXPECT_FALSE(d.truncated);
        previous = d.delta_lb;
    }
    // pinned at this configuration
    EXPECT_EQ(delta_eps_bruteforce(g, 0.0, tol).delta_lb, 0.0);
    EXPECT_NEAR(delta_eps_bruteforce(g, 1e-2, tol).delta_lb, 0.028048, 0.01 * 0.028048);
}

TEST(DeltaEps, PairsAreRealizedInTheInflatedManifold)
{
    const auto model = model_2d(3);
    const DiscreteSpace& U = model.space();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const OracleNet net = manifold_net(model, 7);
    const NetGeometry g = net_geometry(net, system);
    const double eps = 5e-3;
    const DeltaResult d = delta_eps_bruteforce(g, eps, 0.0);
    ASSERT_GE(d.first, 0);
    // rebuild the extremal pair explicitly and check both halves
    const Vec u = net.states.col(d.first), v = net.states.col(d.second);
    const auto [dw, dperp] = project_w(system, Vec(u - v));
    const double p = U.norm(dw);
    ASSERT_LE(p, 2 * eps);
    const Vec stretch = dperp / U.norm(dperp) * 2.0 * std::sqrt(eps * eps - p * p / 4);
    const Vec shift = -dw + stretch;  // applied as +shift/2 to u and -shift/2 to v
    const Vec up = u + 0.5 * shift, vp = v - 0.5 * shift;
    EXPECT_LE(U.norm(0.5 * shift), eps * (1 + 1e-10));
    EXPECT_LT(system.coords(Vec(up - vp)).norm(), 1e-10);
    EXPECT_NEAR(U.norm(up - vp), d.delta_lb, 1e-10 * d.delta_lb);
}

TEST(DeltaEps, BudgetTruncationKeepsALowerBound)
{
    const auto model = model_2d(3);
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const NetGeometry g = net_geometry(manifold_net(model, 9), system);
    const double tol = default_eps_slice(g);
    const DeltaResult full = delta_eps_bruteforce(g, 1e-2, tol);
    const DeltaResult cut = delta_eps_bruteforce(g, 1e-2, tol, full.pairs_checked / 3);
    EXPECT_TRUE(cut.truncated);
    EXPECT_LE(cut.pairs_checked, full.pairs_checked / 3);
    EXPECT_LE(cut.delta_lb, full.delta_lb);
}

TEST(WorstCase, CertificatesDominateAndNetsNest)
{
    const auto model = model_2d();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const OracleNet coarse = manifold_net(model, 5);
    const OracleNet fine = manifold_net(model, 9);  // contains the 5-grid
    GreedyOptions opt;
    opt.n_max = 3;
    const GreedyResult greedy = weak_greedy(model, TrainingSet::tensor_grid(ParamBox::unit(2), 9), opt);
    for (Index n = 1; n <= 3; ++n) {
        const OneSpaceMap map(greedy.nested(n), system);
        const RecoveryFn fn = [&](const Observation& w) { return map.recover(w); };
        const WcResult wc_fine = wc_error_bruteforce(fine, system, fn);
        const WcResult wc_coarse = wc_error_bruteforce(coarse, system, fn);
        EXPECT_LE(wc_fine.wc_lb, map.certify() * (1 + 1e-6)) << "n = " << n;
        EXPECT_LE(wc_coarse.wc_lb, wc_fine.wc_lb * (1 + 1e-12));
    }
    const NetGeometry gc = net_geometry(coarse, system), gf = net_geometry(fine, system);
    const double tol = default_eps_slice(gf);
    for (double eps : {0.0, 1e-3, 1e-2})
        EXPECT_LE(delta_eps_bruteforce(gc, eps, tol).delta_lb, delta_eps_bruteforce(gf, eps, tol).delta_lb);
    for (Index i = 0; i < coarse.size(); i += 5)
        EXPECT_LE(slice_and_radius(gc, gc.w.col(i), 20 * tol).radius_lb,
                  slice_and_radius(gf, gc.w.col(i), 20 * tol).radius_lb);
}

TEST(WorstCase, NearestMemberMapOnAFinerNet)
{
    const auto model = model_2d();
    const auto system = build_system(model.space_ptr(), equispaced_sensors(2, 4, 0.2));
    const OracleNet net = manifold_net(model, 9);
    const RecoveryFn cheat = nearest_member_map(net, system);
    EXPECT_EQ(wc_error_bruteforce(net, system, cheat).wc_lb, 0.0);
    const double wc = wc_error_bruteforce(manifold_net(model, 17), system, cheat).wc_lb;
    EXPECT_GT(wc, 0.0);
    EXPECT_LT(wc, 0.1 * model.space().norm(net.states.col(0)));
}

TEST(Report, JsonFields)
{
    BenchmarkReport rep;
    rep.eps = 0.01;
    rep.delta_eps = 0.05;
    rep.wc_errors["one_space"] = 0.02;
    const auto doc = rep.to_json();
    for (const char* key : {"delta_eps", "rad_slices", "wc_errors", "net_resolution", "slice_tol"})
        EXPECT_TRUE(doc.contains(key)) << key;
}

}  // namespace
}  // namespace pbdw
