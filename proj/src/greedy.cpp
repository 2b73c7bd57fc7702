// SPDX-License-Identifier: Apache-2.0
#include "pbdw/greedy.hpp"

#include "pbdw/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace pbdw {

TrainingSet TrainingSet::tensor_grid(const ParamBox& box, int per_dim)
{
    if (per_dim < 1) throw InvalidInput("tensor grid needs at least one point per dimension");
    const Index d = box.dim();
    TrainingSet set;
    set.mode = TrainingMode::tensor_grid;
    set.per_dim = per_dim;
    set.box = box;
    double total = std::pow(static_cast<double>(per_dim), static_cast<double>(d));
    if (total > 1e7) throw InvalidInput("tensor grid exceeds 10^7 points");
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    const auto count = static_cast<std::size_t>(total);
    set.points.reserve(count);
    for (std::size_t p = 0; p < count; ++p) {
        Param y(d);
        for (Index j = 0; j < d; ++j) {
            const double t = per_dim == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(j)]) / (per_dim - 1);
            y(j) = box.lo(j) + t * (box.hi(j) - box.lo(j));
        }
        set.points.push_back(std::move(y));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            if (++idx[j] < per_dim) break;
            idx[j] = 0;
        }
    }
    return set;
}

TrainingSet TrainingSet::sparse_random(const ParamBox& box, std::size_t count, std::uint64_t seed)
{
    if (count == 0) throw InvalidInput("random training set must be nonempty");
    TrainingSet set;
    set.mode = TrainingMode::sparse_random;
    set.seed = seed;
    set.box = box;
    Rng rng(seed);
    set.points.reserve(count);
    for (std::size_t p = 0; p < count; ++p) {
        Param y(box.dim());
        for (Index j = 0; j < box.dim(); ++j) y(j) = rng.uniform(box.lo(j), box.hi(j));
        set.points.push_back(std::move(y));
    }
    return set;
}

std::size_t random_training_size(double eps, double eta, const RandomTrainingConstants& constants)
{
    if (!(eps > 0.0 && eps < 1.0) || !(eta > 0.0 && eta < 1.0))
        throw InvalidInput("random_training: eps and eta must lie in (0,1)");
    if (!(constants.c_n > 0.0)) throw InvalidInput("random_training: C_N must be positive");
    return static_cast<std::size_t>(std::ceil(constants.c_n * (std::abs(std::log(eta)) + std::abs(std::log(eps)))));
}

TrainingSet random_training(int d_y, double eps, double eta, const RandomTrainingConstants& constants,
                            std::uint64_t seed)
{
    const std::size_t count = random_training_size(eps, eta, constants);
    TrainingSet set = TrainingSet::sparse_random(ParamBox::unit(d_y), count, seed);
    set.target_eps = eps;
    set.failure_prob = eta;
    return set;
}

// ---------------------------------------------------------------------------

SurrogateEvaluator::SurrogateEvaluator(const ParametricModel& model, const ReducedSpace& reduced)
    : model_(&model), anchor_(reduced.anchor), basis_(reduced.basis)
{
    const Index dim = model.space().dim();
    if (anchor_.size() == 0) anchor_ = Vec::Zero(dim);
    if (anchor_.size() != dim || basis_.rows() != dim)
        throw InvalidInput("surrogate: reduced space has the wrong ambient dimension");
    const auto& ops = model.ops();
    for (std::size_t j = 0; j < ops.size(); ++j) {
        op_basis_.push_back(ops[j] * basis_);
        op_anchor_.push_back(ops[j] * anchor_);
        reduced_ops_.push_back(basis_.transpose() * op_basis_.back());
        reduced_rhs_.push_back(-(basis_.transpose() * op_anchor_.back()));
    }
    reduced_rhs_[0] += basis_.transpose() * model.load();
}

Vec SurrogateEvaluator::galerkin_coeffs(const Param& y) const
{
    model_->check_param(y);
    const Index n = basis_.cols();
    if (n == 0) return Vec();
    Mat a = reduced_ops_[0];
    Vec b = reduced_rhs_[0];
    for (Index j = 0; j < y.size(); ++j) {
        a += y(j) * reduced_ops_[static_cast<std::size_t>(j + 1)];
        b += y(j) * reduced_rhs_[static_cast<std::size_t>(j + 1)];
    }
    Eigen::LDLT<Mat> ldlt(0.5 * (a + a.transpose()));
    if (ldlt.info() != Eigen::Success) throw NumericalError("reduced Galerkin system is singular");
    return ldlt.solve(b);
}

Vec SurrogateEvaluator::galerkin_state(const Param& y) const
{
    const Vec c = galerkin_coeffs(y);
    return c.size() ? Vec(anchor_ + basis_ * c) : anchor_;
}

double SurrogateEvaluator::operator()(const Param& y) const
{
    const Vec c = galerkin_coeffs(y);
    Vec res = model_->load() - op_anchor_[0];
    if (c.size()) res -= op_basis_[0] * c;
    for (Index j = 0; j < y.size(); ++j) {
        const auto k = static_cast<std::size_t>(j + 1);
        res -= y(j) * op_anchor_[k];
        if (c.size()) res -= y(j) * (op_basis_[k] * c);
    }
    return model_->space().dual_norm(res);
}

double surrogate(const ParametricModel& model, const ReducedSpace& reduced, const Param& y)
{
    return SurrogateEvaluator(model, reduced)(y);
}

// ---------------------------------------------------------------------------

ReducedSpace GreedyResult::nested(Index n) const
{
    if (n < 0 || n > space.n()) throw InvalidInput("nested: n out of range");
    return space.truncated(n, trace.eps_history[static_cast<std::size_t>(n)]);
}

GreedyResult weak_greedy(const ParametricModel& model, const TrainingSet& training, const GreedyOptions& options)
{
    if (training.points.empty() && !options.resample) throw InvalidInput("weak_greedy: empty training set");
    if (options.n_max < 0) throw InvalidInput("weak_greedy: n_max must be non-negative");
    if (options.n_max > model.space().dim()) throw InvalidInput("weak_greedy: n_max exceeds the ambient dimension");
    if (options.resample && options.resample_size == 0) throw InvalidInput("weak_greedy: resample_size must be positive");
    if (options.record_dist && options.resample)
        throw InvalidInput("weak_greedy: distance history needs a fixed training set");

    const DiscreteSpace& U = model.space();
    const Index dim = U.dim();
    const double r = model.r();
    const Vec anchor = options.anchor ? *options.anchor : Vec::Zero(dim);
    if (anchor.size() != dim) throw InvalidInput("weak_greedy: anchor has the wrong dimension");
    const double stop_c = options.stop_c < 0.0 ? r : options.stop_c;
    const double threshold = options.tol > 0.0 ? stop_c * std::pow(options.tol, 1.0 + options.stop_a) : 0.0;

    GreedyResult result;
    GreedyTrace& trace = result.trace;
    trace.gamma_used = 1.0;
    ReducedSpace current;
    current.anchor = anchor;
    current.basis.resize(dim, 0);

    const bool fixed = !options.resample;
    std::vector<Vec> snapshots;
    if (fixed) snapshots.resize(training.size());
    auto snapshot = [&](const TrainingSet& set, std::size_t i) -> Vec {
        if (fixed) {
            if (snapshots[i].size() == 0) snapshots[i] = solve(model, set.points[i]) - anchor;
            return snapshots[i];
        }
        return solve(model, set.points[i]) - anchor;
    };
    if (options.record_dist) parallel_for(training.size(), [&](std::size_t i) { snapshot(training, i); });

    std::vector<char> excluded(fixed ? training.size() : 0, 0);
    for (int k = 0;; ++k) {
        TrainingSet resampled;
        if (!fixed) {
            const ParamBox box = training.box.dim() ? training.box : ParamBox::unit(model.d_y());
            resampled = TrainingSet::sparse_random(box, options.resample_size,
                                                   derive_seed(options.seed, static_cast<std::uint64_t>(k)));
            excluded.assign(resampled.size(), 0);
        }
        const TrainingSet& set = fixed ? training : resampled;

        const SurrogateEvaluator eval(model, current);
        std::vector<double> values(set.size());
        parallel_for(set.size(), [&](std::size_t i) { values[i] = eval(set.points[i]); });
        const double max_value = *std::max_element(values.begin(), values.end());
        trace.surrogate_max_history.push_back(max_value);
        trace.eps_history.push_back(max_value / r);
        if (options.record_dist) {
            double worst = 0.0;
            for (std::size_t i = 0; i < set.size(); ++i) {
                ReducedSpace centered = current;
                centered.anchor = Vec::Zero(dim);
                worst = std::max(worst, distance_to_space(U, centered, snapshots[i]));
            }
            trace.dist_history.push_back(worst);
        }
        if (max_value <= threshold || k >= options.n_max) break;

        std::vector<std::size_t> order(set.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
        bool added = false;
        for (std::size_t idx : order) {
            if (excluded[idx]) continue;
            Vec v = snapshot(set, idx);
            const double original = U.norm(v);
            for (int pass = 0; pass < 2; ++pass)
                for (Index c = 0; c < current.basis.cols(); ++c)
                    v -= U.inner(current.basis.col(c), v) * current.basis.col(c);
            const double remaining = U.norm(v);
            if (!(remaining > options.deflation_tol * original)) {
                excluded[idx] = 1;
                std::ostringstream msg;
                msg << "step " << k << ": training point " << idx
                    << " is numerically dependent on the current basis, skipped";
                trace.events.push_back(msg.str());
                continue;
            }
            current.basis.conservativeResize(Eigen::NoChange, current.basis.cols() + 1);
            current.basis.col(current.basis.cols() - 1) = v / remaining;
            trace.selected_params.push_back(set.points[idx]);
            added = true;
            break;
        }
        if (!added) {
            std::ostringstream msg;
            msg << "step " << k << ": no training point adds a new direction, stopping";
            trace.events.push_back(msg.str());
            break;
        }
    }

    current.eps = trace.eps_history.back();
    std::ostringstream prov;
    prov << "weak_greedy(" << (fixed ? (training.mode == TrainingMode::tensor_grid ? "tensor_grid" : "random") : "resampled")
         << ", n=" << current.n() << ")";
    current.provenance = prov.str();
    result.space = std::move(current);
    return result;
}

// ---------------------------------------------------------------------------

PoorMansResult poor_mans_select(const ParametricModel& model, const MeasurementSystem& system,
                                const std::vector<ReducedSpace>& nested_spaces)
{
    (void)model;
    if (nested_spaces.empty()) throw InvalidInput("poor_mans_select: no candidate spaces");
    std::vector<PoorMansRow> table;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < nested_spaces.size(); ++i) {
        const ReducedSpace& s = nested_spaces[i];
        const BetaMu bm = beta_mu(s, system);
        PoorMansRow row;
        row.n = s.n();
        row.beta = bm.beta;
        row.mu = bm.mu;
        row.eps = s.eps;
        if (bm.mu < kInfinity) row.product = s.eps == 0.0 ? 0.0 : bm.mu * s.eps;
        table.push_back(row);
        if (row.mu < kInfinity) {
            const auto& cur = table[i];
            if (!best || cur.product < table[*best].product ||
                (cur.product == table[*best].product && cur.n < table[*best].n))
                best = i;
        }
    }
    if (!best) throw NumericalError("poor_mans_select: mu is infinite for every candidate space");
    return {table[*best].n, OneSpaceMap(nested_spaces[*best], system), std::move(table)};
}

}  // namespace pbdw
