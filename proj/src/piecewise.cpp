// SPDX-License-Identifier: Apache-2.0
#include "pbdw/piecewise.hpp"

#include "pbdw/parallel.hpp"

#include <deque>

namespace pbdw {

double PartitionedModel::total_volume() const
{
    double v = 0.0;
    for (const Cell& c : cells) v += c.box.volume();
    return v;
}

nlohmann::json PartitionedModel::to_json() const
{
    nlohmann::json doc;
    doc["target_eps"] = target_eps;
    doc["complete"] = complete;
    doc["worst_certificate"] = worst_certificate;
    doc["cells"] = nlohmann::json::array();
    for (const Cell& c : cells) {
        nlohmann::json cell;
        cell["lo"] = std::vector<double>(c.box.lo.data(), c.box.lo.data() + c.box.lo.size());
        cell["hi"] = std::vector<double>(c.box.hi.data(), c.box.hi.data() + c.box.hi.size());
        cell["n"] = c.local_space.n();
        cell["eps"] = c.local_space.eps;
        cell["mu"] = c.local_map ? c.local_map->mu() : kInfinity;
        cell["certificate"] = c.certificate;
        cell["depth"] = c.depth;
        cell["accepted"] = c.accepted;
        doc["cells"].push_back(cell);
    }
    doc["splits"] = nlohmann::json::array();
    for (const SplitRecord& s : split_trace)
        doc["splits"].push_back({{"order", s.order}, {"depth", s.depth}, {"coord", s.coord}, {"scores", s.scores}});
    return doc;
}

namespace {

struct Pending {
    ParamBox box;
    int depth = 0;
};

TrainingSet cell_training(const ParametricModel& model, const PiecewiseConfig& config, const ParamBox& box,
                          std::size_t order)
{
    if (model.d_y() <= 3) return TrainingSet::tensor_grid(box, config.grid_per_dim);
    const std::size_t count = random_training_size(config.eps, config.random_eta, config.random_constants);
    return TrainingSet::sparse_random(box, count, derive_seed(config.seed, order));
}

// Local greedy on shifted snapshots; keeps the smallest n meeting the target,
// or the best certificate seen when none does.
Cell fit_cell(const ParametricModel& model, const MeasurementSystem& system, const PiecewiseConfig& config,
              const Pending& pending, std::size_t order)
{
    Cell cell;
    cell.box = pending.box;
    cell.depth = pending.depth;
    const Vec anchor = solve(model, pending.box.center());
    const TrainingSet training = cell_training(model, config, pending.box, order);
    cell.training_size = training.size();
    GreedyOptions opt;
    opt.n_max = config.n_max < 0 ? static_cast<int>(system.m()) : std::min<int>(config.n_max, static_cast<int>(system.m()));
    opt.anchor = anchor;
    const GreedyResult greedy = weak_greedy(model, training, opt);

    for (Index n = 0; n <= greedy.space.n(); ++n) {
        ReducedSpace local = greedy.nested(n);
        OneSpaceMap map(local, system);
        const double cert = map.defined() ? map.mu() * local.eps : kInfinity;
        if (cert < cell.certificate) {
            cell.certificate = cert;
            cell.local_space = local;
            cell.local_map.emplace(std::move(map));
        }
        if (cert <= config.eps) {
            cell.accepted = true;
            break;
        }
    }
    return cell;
}

Index split_coordinate(const ParametricModel& model, const ParamBox& box, const Vec& anchor, SplitRule rule,
                       int depth, std::vector<double>& scores)
{
    const Index d = box.dim();
    if (rule == SplitRule::round_robin) return depth % d;
    ReducedSpace centre;
    centre.anchor = anchor;
    centre.basis.resize(anchor.size(), 0);
    const SurrogateEvaluator eval(model, centre);
    scores.assign(static_cast<std::size_t>(d), 0.0);
    Index best = 0;
    for (Index j = 0; j < d; ++j) {
        Param lo = box.center(), hi = box.center();
        lo(j) = box.lo(j);
        hi(j) = box.hi(j);
        scores[static_cast<std::size_t>(j)] = eval(lo) + eval(hi);
        if (scores[static_cast<std::size_t>(j)] > scores[static_cast<std::size_t>(best)]) best = j;
    }
    return best;
}

}  // namespace

PartitionedModel build_partition(const ParametricModel& model, const MeasurementSystem& system,
                                 const PiecewiseConfig& config)
{
    if (!(config.eps > 0.0)) throw InvalidInput("build_partition: eps must be positive");
    if (config.max_cells < 1 || config.max_depth < 0) throw InvalidInput("build_partition: invalid budget");
    if (model.d_y() <= 3 && config.grid_per_dim < 2) throw InvalidInput("build_partition: grid_per_dim must be at least 2");

    PartitionedModel pm;
    pm.target_eps = config.eps;
    pm.surrogate = config.surrogate;
    std::deque<Pending> queue{{ParamBox::unit(model.d_y()), 0}};
    std::size_t order = 0;
    while (!queue.empty()) {
        const Pending pending = queue.front();
        queue.pop_front();
        Cell cell = fit_cell(model, system, config, pending, order);
        const auto leaves = pm.cells.size() + queue.size() + 1;
        const bool can_split = pending.depth < config.max_depth && leaves < static_cast<std::size_t>(config.max_cells);
        if (!cell.accepted && can_split) {
            SplitRecord rec;
            rec.order = order;
            rec.depth = pending.depth;
            rec.coord = split_coordinate(model, pending.box, cell.local_space.anchor, config.split_rule, pending.depth,
                                         rec.scores);
            const auto [lower, upper] = pending.box.split(rec.coord);
            queue.push_back({lower, pending.depth + 1});
            queue.push_back({upper, pending.depth + 1});
            pm.split_trace.push_back(std::move(rec));
        } else {
            pm.cells.push_back(std::move(cell));
        }
        ++order;
    }
    pm.complete = true;
    for (const Cell& c : pm.cells) {
        pm.complete = pm.complete && c.accepted;
        pm.worst_certificate = std::max(pm.worst_certificate, c.certificate);
    }
    return pm;
}

PiecewiseRecovery recover_pw(const ParametricModel& model, const PartitionedModel& pm, const Observation& w)
{
    std::vector<CellScore> scores(pm.cells.size());
    std::vector<Vec> estimates(pm.cells.size());
    std::vector<Param> params(pm.cells.size());
    parallel_for(pm.cells.size(), [&](std::size_t k) {
        const Cell& c = pm.cells[k];
        scores[k].k = k;
        scores[k].certificate = c.certificate;
        if (!c.local_map || !c.local_map->defined()) return;
        estimates[k] = c.local_map->recover(w);
        const ProjectionResult p = metric_project(model, estimates[k], pm.surrogate);
        scores[k].s_value = p.s_value;
        params[k] = p.y_bar;
    });
    PiecewiseRecovery out;
    bool found = false;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (estimates[k].size() == 0) continue;
        if (!found || scores[k].s_value < scores[out.k_star].s_value) {
            out.k_star = k;
            found = true;
        }
    }
    if (!found) throw NumericalError("recover_pw: no cell has a defined recovery map");
    out.u_star = estimates[out.k_star];
    out.y_bar = params[out.k_star];
    out.diagnostics = std::move(scores);
    return out;
}

}  // namespace pbdw
