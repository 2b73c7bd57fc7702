// SPDX-License-Identifier: Apache-2.0
#include "pbdw/oracle.hpp"

#include "pbdw/greedy.hpp"
#include "pbdw/parallel.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pbdw {

namespace {

std::string cache_path(const std::string& dir, std::uint64_t hash, int grid)
{
    std::ostringstream name;
    name << "net_" << std::hex << hash << std::dec << "_g" << grid << ".bin";
    return (std::filesystem::path(dir) / name.str()).string();
}

bool read_cache(const std::string& path, Mat& states)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::int64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    if (!in || rows != states.rows() || cols != states.cols()) return false;
    in.read(reinterpret_cast<char*>(states.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
    return static_cast<bool>(in);
}

void write_cache(const std::string& path, const Mat& states)
{
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        const std::int64_t rows = states.rows(), cols = states.cols();
        out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
        out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
        out.write(reinterpret_cast<const char*>(states.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!out) throw std::runtime_error("could not write net cache " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

OracleNet manifold_net(const ParametricModel& model, int grid_per_dim, const std::string& cache_dir)
{
    if (grid_per_dim < 1) throw InvalidInput("manifold_net: grid_per_dim must be positive");
    const double count = std::pow(static_cast<double>(grid_per_dim), model.d_y());
    if (count > static_cast<double>(kMaxNetPoints)) throw InvalidInput("manifold_net: net exceeds 10^6 points");
    const TrainingSet grid = TrainingSet::tensor_grid(ParamBox::unit(model.d_y()), grid_per_dim);
    OracleNet net;
    net.params = grid.points;
    net.grid_per_dim = grid_per_dim;
    net.model_hash = model.hash();
    net.states.resize(model.space().dim(), static_cast<Index>(grid.size()));
    const std::string path = cache_dir.empty() ? std::string() : cache_path(cache_dir, net.model_hash, grid_per_dim);
    if (!path.empty() && read_cache(path, net.states)) {
        net.from_cache = true;
        return net;
    }
    parallel_for(grid.size(), [&](std::size_t i) { net.states.col(static_cast<Index>(i)) = solve(model, grid.points[i]); });
    if (!path.empty()) write_cache(path, net.states);
    return net;
}

NetGeometry net_geometry(const OracleNet& net, const MeasurementSystem& system)
{
    NetGeometry g;
    g.w = system.coords(net.states);
    const Mat perp = net.states - system.w_basis() * g.w;
    const Mat e = system.space().euclidean_coords(perp);
    if (e.cols() <= e.rows()) {
        // fewer states than dofs: an orthonormal basis of their span keeps all distances
        Eigen::ColPivHouseholderQR<Mat> qr(e);
        qr.setThreshold(1e-14);
        const Index r = std::max<Index>(qr.rank(), 1);
        const Mat q = qr.householderQ() * Mat::Identity(e.rows(), r);
        g.perp = q.transpose() * e;
    } else {
        g.perp = e;
    }
    return g;
}

double default_eps_slice(const NetGeometry& geometry)
{
    std::vector<double> norms(static_cast<std::size_t>(geometry.size()));
    for (Index i = 0; i < geometry.size(); ++i) norms[static_cast<std::size_t>(i)] = geometry.w.col(i).norm();
    auto mid = norms.begin() + static_cast<std::ptrdiff_t>(norms.size() / 2);
    std::nth_element(norms.begin(), mid, norms.end());
    return 1e-3 * *mid;
}

SliceResult slice_and_radius(const NetGeometry& geometry, const Vec& w, double eps_slice)
{
    if (!(eps_slice > 0.0)) throw InvalidInput("slice_and_radius: eps_slice must be positive");
    if (w.size() != geometry.w.rows()) throw InvalidInput("slice_and_radius: observation has the wrong size");
    SliceResult res;
    for (Index i = 0; i < geometry.size(); ++i)
        if ((geometry.w.col(i) - w).norm() <= eps_slice) res.members.push_back(i);
    double diam2 = 0.0;
    for (std::size_t a = 0; a < res.members.size(); ++a)
        for (std::size_t b = a + 1; b < res.members.size(); ++b) {
            const Index i = res.members[a], j = res.members[b];
            diam2 = std::max(diam2, (geometry.w.col(i) - geometry.w.col(j)).squaredNorm() +
                                        (geometry.perp.col(i) - geometry.perp.col(j)).squaredNorm());
        }
    res.radius_lb = 0.5 * std::sqrt(diam2);
    return res;
}

DeltaResult delta_eps_bruteforce(const NetGeometry& geometry, double eps, double eps_slice, std::size_t pair_budget)
{
    if (!(eps >= 0.0) || !(eps_slice >= 0.0)) throw InvalidInput("delta_eps_bruteforce: tolerances must be nonnegative");
    const Index n = geometry.size();
    DeltaResult res;
    res.eps = eps;
    res.eps_slice = eps_slice;
    res.delta_lb = 2.0 * eps;  // u = v with opposite perturbations orthogonal to W
    if (n == 0) return res;
    const double reach = 2.0 * eps + eps_slice;

    // sort by the first W-coordinate; admissible partners lie in a window
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return geometry.w(0, a) < geometry.w(0, b); });
    std::vector<double> key(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) key[k] = geometry.w(0, order[k]);
    std::vector<std::size_t> window_end(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        window_end[k] = static_cast<std::size_t>(std::upper_bound(key.begin(), key.end(), key[k] + reach) - key.begin());

    // deterministic budget: rows are admitted in order while the running pair count fits
    std::size_t rows = 0, pairs = 0;
    for (; rows < order.size(); ++rows) {
        const std::size_t row_pairs = window_end[rows] - rows - 1;
        if (pairs + row_pairs > pair_budget) {
            res.truncated = true;
            break;
        }
        pairs += row_pairs;
    }
    res.pairs_checked = pairs;

    struct RowBest {
        double value = -1.0;
        Index partner = -1;
    };
    std::vector<RowBest> best(rows);
    const double eps2 = eps * eps;
    parallel_for(rows, [&](std::size_t k) {
        const Index i = order[k];
        RowBest b;
        for (std::size_t l = k + 1; l < window_end[k]; ++l) {
            const Index j = order[l];
            const double p = (geometry.w.col(i) - geometry.w.col(j)).norm();
            if (p > reach) continue;
            const double value = (geometry.perp.col(i) - geometry.perp.col(j)).norm() +
                                 2.0 * std::sqrt(std::max(0.0, eps2 - 0.25 * p * p));
            if (value > b.value) {
                b.value = value;
                b.partner = j;
            }
        }
        best[k] = b;
    });
    for (std::size_t k = 0; k < rows; ++k)
        if (best[k].value > res.delta_lb) {
            res.delta_lb = best[k].value;
            res.first = order[k];
            res.second = best[k].partner;
        }
    return res;
}

WcResult wc_error_bruteforce(const OracleNet& net, const MeasurementSystem& system, const RecoveryFn& map)
{
    WcResult res;
    res.errors.resize(static_cast<std::size_t>(net.size()));
    parallel_for(res.errors.size(), [&](std::size_t i) {
        const Vec u = net.states.col(static_cast<Index>(i));
        res.errors[i] = system.space().norm(u - map(observe(system, u)));
    });
    for (std::size_t i = 0; i < res.errors.size(); ++i)
        if (res.errors[i] > res.wc_lb || res.argmax < 0) {
            res.wc_lb = res.errors[i];
            res.argmax = static_cast<Index>(i);
        }
    return res;
}

RecoveryFn nearest_member_map(const OracleNet& net, const MeasurementSystem& system)
{
    const Mat w = system.coords(net.states);
    const Mat states = net.states;
    return [w, states](const Observation& obs) -> Vec {
        Index best = 0;
        (w.colwise() - obs.w_coords).colwise().squaredNorm().minCoeff(&best);
        return states.col(best);
    };
}

nlohmann::json BenchmarkReport::to_json() const
{
    nlohmann::json doc;
    doc["eps"] = eps;
    doc["delta_eps"] = delta_eps;
    doc["delta_pairs_checked"] = delta.pairs_checked;
    doc["delta_truncated"] = delta.truncated;
    doc["rad_slices"] = rad_slices;
    doc["wc_errors"] = wc_errors;
    doc["certificates"] = certificates;
    doc["net_resolution"] = {{"grid_per_dim", grid_per_dim}, {"net_size", net_size}};
    doc["slice_tol"] = slice_tol;
    doc["bounds"] = "all oracle values are lower bounds over the net";
    return doc;
}

}  // namespace pbdw
