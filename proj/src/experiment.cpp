// SPDX-License-Identifier: Apache-2.0
#include "pbdw/experiment.hpp"

#include "pbdw/io.hpp"
#include "pbdw/oracle.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

namespace pbdw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<Task, std::string>> kTaskNames{
    {Task::greedy_decay, "greedy_decay"},     {Task::fit_affine, "fit_affine"},
    {Task::build_pw, "build_pw"},             {Task::estimate_state, "estimate_state"},
    {Task::estimate_param, "estimate_param"}, {Task::bench_oracle, "bench_oracle"},
    {Task::compare_all, "compare_all"}};

const std::vector<std::pair<EstimateMethod, std::string>> kMethodNames{
    {EstimateMethod::one_space, "one-space"}, {EstimateMethod::affine, "affine"},
    {EstimateMethod::piecewise, "piecewise"}};

const std::vector<std::pair<NoiseKind, std::string>> kNoiseNames{
    {NoiseKind::none, "none"}, {NoiseKind::bounded, "bounded"}, {NoiseKind::gaussian, "gaussian"}};

template <typename E>
std::string name_of(const std::vector<std::pair<E, std::string>>& names, E value)
{
    for (const auto& [v, n] : names)
        if (v == value) return n;
    return {};
}

template <typename E>
std::string choices(const std::vector<std::pair<E, std::string>>& names)
{
    std::string out;
    for (const auto& [v, n] : names) out += (out.empty() ? "" : ", ") + n;
    return out;
}

// Strict reader for one JSON object; every key must be consumed.
class Section {
public:
    Section(const json& doc, std::string pointer) : doc_(doc), pointer_(std::move(pointer))
    {
        if (!doc_.is_object()) throw ConfigError(pointer_.empty() ? "/" : pointer_, "expected an object");
    }

    std::string at(const std::string& key) const { return pointer_ + "/" + key; }
    bool has(const std::string& key) const { return doc_.contains(key); }

    const json* take(const std::string& key)
    {
        if (!doc_.contains(key)) return nullptr;
        seen_.insert(key);
        return &doc_.at(key);
    }

    void number(const std::string& key, double& out, double lo = -kInfinity, bool open_lo = false)
    {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_number()) throw ConfigError(at(key), "expected a number");
        const double x = v->get<double>();
        if (x < lo || (open_lo && x == lo))
            throw ConfigError(at(key), std::string("must be ") + (open_lo ? "> " : ">= ") + format_number(lo));
        out = x;
    }

    template <typename I>
    void integer(const std::string& key, I& out, long long lo)
    {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer");
        if (v->is_number_unsigned() ? false : v->get<long long>() < lo)
            throw ConfigError(at(key), "must be >= " + std::to_string(lo));
        out = v->get<I>();
    }

    void text(const std::string& key, std::string& out)
    {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_string()) throw ConfigError(at(key), "expected a string");
        out = v->get<std::string>();
    }

    void boolean(const std::string& key, bool& out)
    {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
        out = v->get<bool>();
    }

    template <typename E>
    void choice(const std::string& key, E& out, const std::vector<std::pair<E, std::string>>& names)
    {
        std::string name;
        if (!has(key)) return;
        text(key, name);
        for (const auto& [v, n] : names)
            if (n == name) {
                out = v;
                return;
            }
        throw ConfigError(at(key), "'" + name + "' is not one of " + choices(names));
    }

    void finish() const
    {
        for (const auto& [key, value] : doc_.items())
            if (!seen_.count(key)) throw ConfigError(at(key), "unknown key");
    }

private:
    const json& doc_;
    std::string pointer_;
    std::set<std::string> seen_;
};

void check_keys(const json& doc, const json& allowed, const std::string& pointer)
{
    if (!doc.is_object()) throw ConfigError(pointer, "expected an object");
    for (const auto& [key, value] : doc.items())
        if (!allowed.contains(key)) throw ConfigError(pointer + "/" + key, "unknown key");
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

// CSV table with a fixed header; numeric cells use the shortest round-trip form.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    Table& row() { rows_.emplace_back(); return *this; }
    Table& add(const std::string& cell) { rows_.back().push_back(cell); return *this; }
    Table& add(double value) { return add(format_number(value)); }
    Table& add(long long value) { return add(std::to_string(value)); }
    Table& add(std::size_t value) { return add(std::to_string(value)); }
    Table& add(int value) { return add(std::to_string(value)); }
    Table& add(bool value) { return add(std::string(value ? "true" : "false")); }

    std::string str() const
    {
        std::ostringstream out;
        const auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
            out << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out.str();
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::vector<std::string> indexed(const std::string& prefix, Index count)
{
    std::vector<std::string> names;
    for (Index j = 0; j < count; ++j) names.push_back(prefix + std::to_string(j + 1));
    return names;
}

std::string hex(std::uint64_t h)
{
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

// Shared state of one run.
struct Context {
    const ExperimentConfig& cfg;
    ParametricModel model;
    MeasurementSystem system;
    std::uint64_t system_hash;
    fs::path out;
    std::vector<std::string> artifacts;

    explicit Context(const ExperimentConfig& c)
        : cfg(c),
          model(build_model(c.model)),
          system(build_system(model.space_ptr(), c.sensors, c.rank_tol)),
          system_hash(fnv1a(c.model.to_json().dump() + c.to_json().at("sensors").dump())),
          out(c.output_dir)
    {
    }

    void text(const std::string& name, const std::string& content)
    {
        write_text(out / name, content);
        artifacts.push_back(name);
    }
    void document(const std::string& name, const json& doc) { text(name, doc.dump(2) + "\n"); }
    void table(const std::string& name, const Table& t) { text(name, t.str()); }
    void matrix(const std::string& name, const Mat& m)
    {
        write_matrix(out / name, m);
        artifacts.push_back(name);
    }

    std::uint64_t seed(std::uint64_t tag) const { return derive_seed(cfg.seed, tag); }
};

enum SeedTag : std::uint64_t { kTraining = 1, kGreedy, kHeldOut, kSamples, kNoise, kPartition };

TrainingSet greedy_training(const Context& ctx)
{
    const GreedySettings& g = ctx.cfg.greedy;
    if (g.random_training) return random_training(ctx.model.d_y(), g.train_eps, g.train_eta, {}, ctx.seed(kTraining));
    return TrainingSet::tensor_grid(ParamBox::unit(ctx.model.d_y()), g.grid_per_dim);
}

GreedyResult run_greedy(const Context& ctx, int n_max)
{
    GreedyOptions options;
    options.n_max = std::min<int>(n_max, static_cast<int>(ctx.model.space().dim()));
    options.tol = ctx.cfg.greedy.tol;
    options.seed = ctx.seed(kGreedy);
    return weak_greedy(ctx.model, greedy_training(ctx), options);
}

std::vector<ReducedSpace> nested_spaces(const GreedyResult& g)
{
    std::vector<ReducedSpace> spaces;
    for (Index n = 0; n <= g.space.n(); ++n) spaces.push_back(g.nested(n));
    return spaces;
}

PoorMansResult poor_mans(const Context& ctx, const GreedyResult& g)
{
    std::vector<ReducedSpace> spaces = nested_spaces(g);
    // candidate dimensions beyond m have beta = 0
    if (static_cast<Index>(spaces.size()) > ctx.system.m() + 1) spaces.resize(ctx.system.m() + 1);
    return poor_mans_select(ctx.model, ctx.system, spaces);
}

struct AffineFit {
    GreedyResult u_l;
    ManifoldNet net;
    AffineRecoveryMap map;
};

AffineFit fit_affine_map(const Context& ctx)
{
    const AffineSettings& a = ctx.cfg.affine;
    const int d = ctx.model.d_y();
    AffineFit fit{run_greedy(ctx, a.n_l), build_net(ctx.model, TrainingSet::tensor_grid(ParamBox::unit(d), a.net_grid)),
                  {}};
    const int probe = a.probe_grid > 0 ? a.probe_grid : (d <= 3 ? 2 * a.net_grid - 1 : 0);
    if (probe > 0) estimate_net_delta(ctx.model, fit.net, TrainingSet::tensor_grid(ParamBox::unit(d), probe));
    fit.map = fit_affine(ctx.system, fit.net, fit.u_l.space, a.fit);
    return fit;
}

PiecewiseConfig partition_config(const Context& ctx)
{
    PiecewiseConfig pc = ctx.cfg.piecewise;
    pc.seed = ctx.seed(kPartition);
    pc.surrogate = ctx.cfg.least_squares;
    return pc;
}

Mat solve_all(const ParametricModel& model, const std::vector<Param>& params)
{
    Mat states(model.space().dim(), static_cast<Index>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) states.col(static_cast<Index>(i)) = solve(model, params[i]);
    return states;
}

std::vector<Param> random_params(const Context& ctx, int count, std::uint64_t tag)
{
    Rng rng(ctx.seed(tag));
    std::vector<Param> params;
    for (int i = 0; i < count; ++i) params.push_back(rng.uniform_box(ctx.model.d_y()));
    return params;
}

// Observations to process, with the generating states when synthetic.
struct Samples {
    std::vector<Observation> observations;
    std::vector<Param> params;
    Mat states;
    bool synthetic() const { return !params.empty(); }
};

Samples load_samples(Context& ctx)
{
    Samples s;
    if (!ctx.cfg.inputs.observations.empty()) {
        s.observations = ingest_observations(ctx.cfg.inputs.observations, ctx.system);
        return s;
    }
    s.params = random_params(ctx, ctx.cfg.estimate.samples, kSamples);
    s.states = solve_all(ctx.model, s.params);
    for (Index i = 0; i < s.states.cols(); ++i)
        s.observations.push_back(observe(ctx.system, s.states.col(i), ctx.cfg.estimate.noise,
                                         derive_seed(ctx.seed(kNoise), static_cast<std::uint64_t>(i))));
    export_observations(ctx.out / "observations.csv", s.observations);
    ctx.artifacts.push_back("observations.csv");
    return s;
}

struct Estimate {
    Vec u;
    double certificate = 0.0;
    long long cell = -1;
    double s_value = -1.0;
};

// Recovery map selected by estimate.method, with its certificate.
struct Estimator {
    std::string name;
    std::string certificate_scope;
    std::function<Estimate(const Observation&)> recover;
    json info;
};

Estimator make_estimator(Context& ctx)
{
    const ExperimentConfig& cfg = ctx.cfg;
    Estimator e;
    e.name = name_of(kMethodNames, cfg.estimate.method);
    switch (cfg.estimate.method) {
    case EstimateMethod::one_space: {
        auto pm = std::make_shared<PoorMansResult>(poor_mans(ctx, run_greedy(ctx, cfg.greedy.n_max)));
        e.certificate_scope = "mu * eps_n over the training set";
        e.info = {{"n", pm->n_star}, {"mu", pm->map.mu()}, {"certificate", pm->map.certify()}};
        e.recover = [pm](const Observation& w) {
            const double noise = w.noise == NoiseKind::bounded ? w.noise_level : 0.0;
            return Estimate{pm->map.recover(w), pm->map.certify(noise)};
        };
        break;
    }
    case EstimateMethod::affine: {
        auto map = std::make_shared<AffineRecoveryMap>(
            cfg.inputs.map.empty() ? fit_affine_map(ctx).map : load_affine_map(cfg.inputs.map, ctx.system_hash));
        e.certificate_scope = "net objective + sqrt(1 + |B|^2) net delta";
        e.info = {{"p", map->p()}, {"training_objective", map->training_objective}, {"certificate", map->certificate()}};
        const MeasurementSystem* system = &ctx.system;
        e.recover = [map, system](const Observation& w) { return Estimate{apply(*map, *system, w), map->certificate()}; };
        break;
    }
    case EstimateMethod::piecewise: {
        auto pm = std::make_shared<PartitionedModel>(cfg.inputs.map.empty()
                                                         ? build_partition(ctx.model, ctx.system, partition_config(ctx))
                                                         : load_partition(cfg.inputs.map, ctx.system, ctx.system_hash));
        e.certificate_scope = "certificate of the selected cell";
        e.info = {{"cells", pm->k()}, {"complete", pm->complete}, {"worst_certificate", pm->worst_certificate}};
        const ParametricModel* model = &ctx.model;
        e.recover = [pm, model](const Observation& w) {
            const PiecewiseRecovery r = recover_pw(*model, *pm, w);
            return Estimate{r.u_star, pm->cells[r.k_star].certificate, static_cast<long long>(r.k_star),
                            r.diagnostics[r.k_star].s_value};
        };
        break;
    }
    }
    return e;
}

json projection_record(const ProjectionResult& p, double chain_bound)
{
    return {{"y_bar", to_std(p.y_bar)},
            {"s_value", p.s_value},
            {"chain_bound", chain_bound},
            {"kkt_residual", p.kkt_residual},
            {"converged", p.converged}};
}

// --- tasks -------------------------------------------------------------------

json task_greedy_decay(Context& ctx)
{
    const GreedyResult g = run_greedy(ctx, ctx.cfg.greedy.n_max);
    const PoorMansResult pm = poor_mans(ctx, g);
    Table decay({"n", "surrogate_max", "eps", "beta", "mu", "product"});
    for (std::size_t n = 0; n < g.trace.eps_history.size(); ++n) {
        decay.row().add(n).add(g.trace.surrogate_max_history[n]).add(g.trace.eps_history[n]);
        if (n < pm.table.size()) decay.add(pm.table[n].beta).add(pm.table[n].mu).add(pm.table[n].product);
        else decay.add(0.0).add(kInfinity).add(kInfinity);
    }
    ctx.table("decay.csv", decay);
    ctx.matrix("basis.csv", g.space.basis);
    json selected = json::array();
    for (const Param& y : g.trace.selected_params) selected.push_back(to_std(y));
    return {{"n", g.space.n()},
            {"training_size", greedy_training(ctx).points.size()},
            {"gamma", g.trace.gamma_used},
            {"selected_params", selected},
            {"events", g.trace.events},
            {"poor_mans", {{"n", pm.n_star}, {"mu", pm.map.mu()}, {"certificate", pm.map.certify()}}}};
}

json task_fit_affine(Context& ctx)
{
    const AffineFit fit = fit_affine_map(ctx);
    save_affine_map(ctx.out / "map", fit.map, ctx.system_hash);
    for (const std::string& f : affine_map_files()) ctx.artifacts.push_back("map/" + f);

    const Mat held_out = solve_all(ctx.model, random_params(ctx, ctx.cfg.affine.held_out, kHeldOut));
    const HeldOutReport rep = evaluate_held_out(fit.map, ctx.system, fit.net, held_out);
    const double width = width_lower_bound(ctx.model.space(), fit.net.states, ctx.system.m());

    Table cmp({"method", "net_objective"});
    cmp.row().add(std::string("optimal-affine")).add(fit.map.training_objective);
    json summary{{"net_size", fit.net.size()},
                 {"net_delta", fit.net.delta},
                 {"net_delta_estimated", fit.net.delta_estimated},
                 {"u_l_dim", fit.u_l.space.n()},
                 {"eta", fit.map.eta},
                 {"objective", fit.map.training_objective},
                 {"dual", fit.map.diagnostics.dual},
                 {"certified", fit.map.diagnostics.certified},
                 {"iterations", fit.map.diagnostics.iterations},
                 {"b_norm", fit.map.b_norm()},
                 {"width_lower_bound", width},
                 {"held_out",
                  {{"count", held_out.cols()},
                   {"max_error", rep.max_error},
                   {"delta", rep.delta},
                   {"stated_bound", rep.stated_bound},
                   {"lipschitz_bound", rep.lipschitz_bound}}}};
    if (ctx.cfg.affine.poor_mans_competitor) {
        const PoorMansResult pm = poor_mans(ctx, fit.u_l);
        double wc = 0.0;
        for (Index i = 0; i < fit.net.size(); ++i) {
            const Vec u = fit.net.states.col(i);
            wc = std::max(wc, ctx.model.space().norm(u - pm.map.recover(observe(ctx.system, u))));
        }
        cmp.row().add(std::string("one-space(poor-mans)")).add(wc);
        summary["poor_mans"] = {{"n", pm.n_star}, {"net_objective", wc},
                                {"dominated", fit.map.training_objective <= wc}};
    }
    ctx.table("comparison.csv", cmp);
    Table hist({"iteration", "objective"});
    const auto& h = fit.map.diagnostics.objective_history;
    for (std::size_t i = 0; i < h.size(); ++i) hist.row().add(i).add(h[i]);
    ctx.table("objective_history.csv", hist);
    return summary;
}

json task_build_pw(Context& ctx)
{
    const PartitionedModel pm = build_partition(ctx.model, ctx.system, partition_config(ctx));
    save_partition(ctx.out / "partition", pm, ctx.system_hash);
    for (const std::string& f : partition_files(pm)) ctx.artifacts.push_back("partition/" + f);
    std::vector<std::string> header{"cell", "depth", "n", "eps", "mu", "certificate", "accepted", "training_size"};
    for (const auto& s : indexed("lo", ctx.model.d_y())) header.push_back(s);
    for (const auto& s : indexed("hi", ctx.model.d_y())) header.push_back(s);
    Table cells(header);
    for (Index k = 0; k < pm.k(); ++k) {
        const Cell& c = pm.cells[k];
        cells.row().add(static_cast<long long>(k)).add(c.depth).add(static_cast<long long>(c.local_space.n()))
            .add(c.local_space.eps).add(c.local_map ? c.local_map->mu() : kInfinity).add(c.certificate)
            .add(c.accepted).add(c.training_size);
        for (Index j = 0; j < c.box.dim(); ++j) cells.add(c.box.lo(j));
        for (Index j = 0; j < c.box.dim(); ++j) cells.add(c.box.hi(j));
    }
    ctx.table("cells.csv", cells);
    return {{"cells", pm.k()},
            {"complete", pm.complete},
            {"target_eps", pm.target_eps},
            {"worst_certificate", pm.worst_certificate},
            {"volume", pm.total_volume()},
            {"splits", pm.split_trace.size()}};
}

json task_estimate_state(Context& ctx)
{
    const Samples samples = load_samples(ctx);
    const Estimator est = make_estimator(ctx);
    const std::size_t count = samples.observations.size();
    std::vector<Estimate> results(count);
    for (std::size_t i = 0; i < count; ++i) results[i] = est.recover(samples.observations[i]);

    Table t({"sample", "certificate", "error", "cell", "s_value"});
    Mat states(ctx.model.space().dim(), static_cast<Index>(count));
    double max_error = 0.0;
    std::size_t violations = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const Estimate& r = results[i];
        states.col(static_cast<Index>(i)) = r.u;
        t.row().add(i).add(r.certificate);
        if (samples.synthetic()) {
            const double err = ctx.model.space().norm(samples.states.col(static_cast<Index>(i)) - r.u);
            max_error = std::max(max_error, err);
            violations += err > r.certificate;
            t.add(err);
        } else {
            t.add(std::string());
        }
        t.add(r.cell);
        r.s_value < 0 ? t.add(std::string()) : t.add(r.s_value);
    }
    ctx.table("estimates.csv", t);
    ctx.matrix("states.csv", states);
    json summary{{"method", est.name}, {"certificate_scope", est.certificate_scope}, {"map", est.info}, {"samples", count}};
    if (samples.synthetic()) {
        summary["max_error"] = max_error;
        summary["certificate_violations"] = violations;
    }
    return summary;
}

json task_estimate_param(Context& ctx)
{
    const ExperimentConfig& cfg = ctx.cfg;
    const int d = ctx.model.d_y();
    json records = json::array();
    std::vector<std::string> header{"sample"};
    for (const auto& s : indexed("y_bar_", d)) header.push_back(s);
    for (const std::string s : {"s_value", "chain_bound", "kkt_residual", "converged", "realized_error"})
        header.push_back(s);
    Table t(header);
    const auto emit = [&](std::size_t i, const ParameterEstimate& p, const Vec* truth) {
        json rec = projection_record(p.projection, p.chain_bound);
        t.row().add(i);
        for (Index j = 0; j < d; ++j) t.add(p.projection.y_bar(j));
        t.add(p.projection.s_value).add(p.chain_bound).add(p.projection.kkt_residual).add(p.projection.converged);
        if (truth) {
            const double err = ctx.model.space().norm(*truth - solve(ctx.model, p.projection.y_bar));
            rec["realized_error"] = err;
            t.add(err);
        } else {
            t.add(std::string());
        }
        records.push_back(rec);
    };

    json summary;
    if (!cfg.inputs.state.empty()) {
        const Mat states = read_matrix(cfg.inputs.state);
        if (states.rows() != ctx.model.space().dim())
            throw InvalidInput(cfg.inputs.state + ": expected " + std::to_string(ctx.model.space().dim()) +
                               " rows, found " + std::to_string(states.rows()));
        std::vector<ParameterEstimate> out(states.cols());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = estimate_parameter(ctx.model, states.col(static_cast<Index>(i)), 0.0, cfg.least_squares);
        for (std::size_t i = 0; i < out.size(); ++i) emit(i, out[i], nullptr);
        summary = {{"source", "state"}, {"samples", out.size()}};
    } else {
        const Samples samples = load_samples(ctx);
        const Estimator est = make_estimator(ctx);
        std::vector<ParameterEstimate> out(samples.observations.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const Estimate e = est.recover(samples.observations[i]);
            out[i] = estimate_parameter(ctx.model, e.u, e.certificate, cfg.least_squares);
        }
        std::size_t violations = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (samples.synthetic()) {
                const Vec truth = samples.states.col(static_cast<Index>(i));
                emit(i, out[i], &truth);
                violations += records.back()["realized_error"].get<double>() > out[i].chain_bound;
            } else {
                emit(i, out[i], nullptr);
            }
        }
        summary = {{"source", "observations"}, {"method", est.name}, {"certificate_scope", est.certificate_scope},
                   {"map", est.info}, {"samples", out.size()}};
        if (samples.synthetic()) summary["chain_violations"] = violations;
    }
    ctx.table("params.csv", t);
    ctx.document("results.json", records);
    return summary;
}

struct OracleRun {
    OracleNet net;
    NetGeometry geometry;
    double eps_slice = 0.0;
    std::vector<DeltaResult> deltas;
};

OracleRun run_oracle(const Context& ctx, const std::vector<double>& eps)
{
    OracleRun o;
    o.net = manifold_net(ctx.model, ctx.cfg.oracle.grid, cache_dir());
    o.geometry = net_geometry(o.net, ctx.system);
    o.eps_slice = ctx.cfg.oracle.eps_slice >= 0 ? ctx.cfg.oracle.eps_slice : default_eps_slice(o.geometry);
    for (double e : eps) o.deltas.push_back(delta_eps_bruteforce(o.geometry, e, o.eps_slice));
    return o;
}

RecoveryFn as_fn(const PoorMansResult& pm)
{
    return [&pm](const Observation& w) { return pm.map.recover(w); };
}

Table delta_table(const OracleRun& o)
{
    Table t({"eps", "delta_lb", "eps_slice", "pairs_checked", "truncated"});
    for (const DeltaResult& d : o.deltas)
        t.row().add(d.eps).add(d.delta_lb).add(d.eps_slice).add(d.pairs_checked).add(d.truncated);
    return t;
}

json task_bench_oracle(Context& ctx)
{
    const OracleRun o = run_oracle(ctx, ctx.cfg.oracle.eps);
    const PoorMansResult pm = poor_mans(ctx, run_greedy(ctx, ctx.cfg.greedy.n_max));

    std::vector<double> radii;
    const int slices = std::max(0, ctx.cfg.oracle.slices);
    for (int s = 0; s < slices && o.net.size() > 0; ++s) {
        const Index i = static_cast<Index>((static_cast<long long>(s) * o.net.size()) / slices);
        radii.push_back(slice_and_radius(o.geometry, o.geometry.w.col(i), o.eps_slice).radius_lb);
    }
    const WcResult one_space = wc_error_bruteforce(o.net, ctx.system, as_fn(pm));
    const WcResult nearest = wc_error_bruteforce(o.net, ctx.system, nearest_member_map(o.net, ctx.system));

    json reports = json::array();
    for (const DeltaResult& d : o.deltas) {
        BenchmarkReport rep;
        rep.eps = d.eps;
        rep.delta_eps = d.delta_lb;
        rep.delta = d;
        rep.rad_slices = radii;
        rep.wc_errors = {{"one-space(poor-mans)", one_space.wc_lb}, {"nearest-member", nearest.wc_lb}};
        rep.certificates = {{"one-space(poor-mans)", pm.map.certify()}};
        rep.grid_per_dim = o.net.grid_per_dim;
        rep.net_size = o.net.size();
        rep.slice_tol = o.eps_slice;
        reports.push_back(rep.to_json());
    }
    ctx.document("benchmark.json", {{"reports", reports}});
    ctx.table("delta.csv", delta_table(o));
    Table wc({"method", "certificate", "wc_lb"});
    wc.row().add(std::string("one-space(poor-mans)")).add(pm.map.certify()).add(one_space.wc_lb);
    wc.row().add(std::string("nearest-member")).add(std::string()).add(nearest.wc_lb);
    ctx.table("wc.csv", wc);
    return {{"net_size", o.net.size()}, {"from_cache", o.net.from_cache}, {"eps_slice", o.eps_slice}};
}

json task_compare_all(Context& ctx)
{
    const PoorMansResult pm = poor_mans(ctx, run_greedy(ctx, ctx.cfg.greedy.n_max));
    const AffineFit fit = fit_affine_map(ctx);
    const PiecewiseConfig pc = partition_config(ctx);
    const PartitionedModel part = build_partition(ctx.model, ctx.system, pc);

    const OracleRun o = run_oracle(ctx, {ctx.model.kappa() * pc.eps});
    const double benchmark = o.deltas.front().delta_lb;
    const WcResult wc_one = wc_error_bruteforce(o.net, ctx.system, as_fn(pm));
    const WcResult wc_affine = wc_error_bruteforce(
        o.net, ctx.system, [&](const Observation& w) { return apply(fit.map, ctx.system, w); });
    const WcResult wc_pw = wc_error_bruteforce(
        o.net, ctx.system, [&](const Observation& w) { return recover_pw(ctx.model, part, w).u_star; });

    Table t({"method", "certificate", "wc_lb", "benchmark"});
    t.row().add(std::string("one-space(poor-mans)")).add(pm.map.certify()).add(wc_one.wc_lb).add(std::string());
    t.row().add(std::string("optimal-affine")).add(fit.map.certificate()).add(wc_affine.wc_lb).add(std::string());
    t.row().add("piecewise(" + format_number(pc.eps) + ")").add(part.worst_certificate).add(wc_pw.wc_lb).add(benchmark);
    ctx.table("compare.csv", t);
    ctx.table("delta.csv", delta_table(o));
    return {{"oracle_net_size", o.net.size()},
            {"eps_slice", o.eps_slice},
            {"kappa", ctx.model.kappa()},
            {"piecewise_cells", part.k()},
            {"piecewise_complete", part.complete},
            {"affine_certified", fit.map.diagnostics.certified},
            {"affine_net_delta_estimated", fit.net.delta_estimated},
            {"notes",
             {{"one-space(poor-mans)", "certificate = mu * eps_n over the greedy training set"},
              {"optimal-affine", "certificate = net objective + sqrt(1 + |B|^2) net delta"},
              {"piecewise", "certificate = worst cell certificate; benchmark = oracle delta_{kappa eps} lower bound"}}}};
}

}  // namespace

std::string to_string(Task task) { return name_of(kTaskNames, task); }

Task parse_task(const std::string& name)
{
    for (const auto& [t, n] : kTaskNames)
        if (n == name) return t;
    throw ConfigError("/task", "'" + name + "' is not one of " + choices(kTaskNames));
}

std::string cache_dir()
{
    const char* dir = std::getenv("PBDW_CACHE_DIR");
    return dir ? dir : "";
}

ExperimentConfig ExperimentConfig::from_json(const json& doc)
{
    ExperimentConfig c;
    Section root(doc, "");

    if (const json* model = root.take("model")) {
        check_keys(*model, ModelConfig{}.to_json(), "/model");
        try {
            c.model = ModelConfig::from_json(*model);
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidInput& e) {
            throw ConfigError("/model", e.what());
        }
    }

    if (const json* sensors = root.take("sensors")) {
        if (sensors->is_array()) {
            for (std::size_t i = 0; i < sensors->size(); ++i) {
                const std::string at = "/sensors/" + std::to_string(i);
                check_keys((*sensors)[i], SensorSpec{}.to_json(), at);
                try {
                    c.sensors.push_back(SensorSpec::from_json((*sensors)[i]));
                } catch (const InvalidInput& e) {
                    throw ConfigError(at, e.what());
                }
            }
        } else {
            Section s(*sensors, "/sensors");
            const json* eq = s.take("equispaced");
            if (!eq) throw ConfigError("/sensors", "expected a list of sensors or {\"equispaced\": {...}}");
            Section e(*eq, "/sensors/equispaced");
            int count = 4;
            double width = 0.1;
            e.integer("count", count, 1);
            e.number("width", width, 0.0, true);
            e.finish();
            s.finish();
            c.sensors = equispaced_sensors(c.model.dx, count, width);
        }
    } else {
        c.sensors = equispaced_sensors(c.model.dx, 4, 0.1);
    }

    if (root.has("task")) {
        std::string name;
        root.text("task", name);
        c.task = parse_task(name);
    }
    root.integer("seed", c.seed, 0);
    root.text("output_dir", c.output_dir);

    if (const json* tol = root.take("tolerances")) {
        Section s(*tol, "/tolerances");
        s.number("kkt", c.least_squares.kkt_tol, 0.0, true);
        s.integer("ls_max_iter", c.least_squares.max_iter, 1);
        s.number("rank", c.rank_tol, 0.0, true);
        s.finish();
    }
    if (const json* g = root.take("greedy")) {
        Section s(*g, "/greedy");
        s.integer("n_max", c.greedy.n_max, 0);
        std::string training = c.greedy.random_training ? "random" : "tensor";
        s.text("training", training);
        if (training != "tensor" && training != "random")
            throw ConfigError("/greedy/training", "'" + training + "' is not one of tensor, random");
        c.greedy.random_training = training == "random";
        s.integer("grid_per_dim", c.greedy.grid_per_dim, 1);
        s.number("train_eps", c.greedy.train_eps, 0.0, true);
        s.number("train_eta", c.greedy.train_eta, 0.0, true);
        s.number("tol", c.greedy.tol, 0.0);
        s.finish();
    }
    if (const json* a = root.take("affine")) {
        Section s(*a, "/affine");
        s.integer("net_grid", c.affine.net_grid, 1);
        s.integer("probe_grid", c.affine.probe_grid, 0);
        s.integer("n_l", c.affine.n_l, 0);
        s.number("tol_opt", c.affine.fit.tol_opt, 0.0, true);
        s.integer("max_iter", c.affine.fit.max_iter, 1);
        s.integer("held_out", c.affine.held_out, 0);
        if (s.has("competitor")) {
            std::string comp;
            s.text("competitor", comp);
            if (comp != "none" && comp != "poor-mans")
                throw ConfigError("/affine/competitor", "'" + comp + "' is not one of none, poor-mans");
            c.affine.poor_mans_competitor = comp == "poor-mans";
        }
        s.finish();
    }
    c.piecewise.eps = 0.05;
    if (const json* p = root.take("piecewise")) {
        Section s(*p, "/piecewise");
        s.number("eps", c.piecewise.eps, 0.0, true);
        s.integer("max_cells", c.piecewise.max_cells, 1);
        s.integer("max_depth", c.piecewise.max_depth, 0);
        s.integer("n_max", c.piecewise.n_max, -1);
        s.integer("grid_per_dim", c.piecewise.grid_per_dim, 1);
        s.number("random_eta", c.piecewise.random_eta, 0.0, true);
        const std::vector<std::pair<SplitRule, std::string>> rules{{SplitRule::surrogate_faces, "surrogate_faces"},
                                                                   {SplitRule::round_robin, "round_robin"}};
        s.choice("split_rule", c.piecewise.split_rule, rules);
        s.finish();
    }
    if (const json* o = root.take("oracle")) {
        Section s(*o, "/oracle");
        s.integer("grid", c.oracle.grid, 1);
        if (const json* eps = s.take("eps")) {
            if (!eps->is_array()) throw ConfigError("/oracle/eps", "expected a list of numbers");
            c.oracle.eps.clear();
            for (std::size_t i = 0; i < eps->size(); ++i) {
                if (!(*eps)[i].is_number() || (*eps)[i].get<double>() < 0)
                    throw ConfigError("/oracle/eps/" + std::to_string(i), "expected a non-negative number");
                c.oracle.eps.push_back((*eps)[i].get<double>());
            }
        }
        s.number("eps_slice", c.oracle.eps_slice);
        s.integer("slices", c.oracle.slices, 0);
        s.finish();
    }
    if (const json* e = root.take("estimate")) {
        Section s(*e, "/estimate");
        s.choice("method", c.estimate.method, kMethodNames);
        s.integer("samples", c.estimate.samples, 1);
        if (const json* n = s.take("noise")) {
            Section ns(*n, "/estimate/noise");
            ns.choice("kind", c.estimate.noise.kind, kNoiseNames);
            ns.number("level", c.estimate.noise.level, 0.0);
            ns.finish();
        }
        s.finish();
    }
    if (const json* in = root.take("inputs")) {
        Section s(*in, "/inputs");
        s.text("observations", c.inputs.observations);
        s.text("state", c.inputs.state);
        s.text("map", c.inputs.map);
        s.finish();
    }
    root.finish();
    return c;
}

json ExperimentConfig::to_json() const
{
    json sensors_doc = json::array();
    for (const SensorSpec& s : sensors) sensors_doc.push_back(s.to_json());
    return {{"model", model.to_json()},
            {"sensors", sensors_doc},
            {"task", to_string(task)},
            {"seed", seed},
            {"output_dir", output_dir},
            {"tolerances", {{"kkt", least_squares.kkt_tol}, {"ls_max_iter", least_squares.max_iter}, {"rank", rank_tol}}},
            {"greedy",
             {{"n_max", greedy.n_max},
              {"training", greedy.random_training ? "random" : "tensor"},
              {"grid_per_dim", greedy.grid_per_dim},
              {"train_eps", greedy.train_eps},
              {"train_eta", greedy.train_eta},
              {"tol", greedy.tol}}},
            {"affine",
             {{"net_grid", affine.net_grid},
              {"probe_grid", affine.probe_grid},
              {"n_l", affine.n_l},
              {"tol_opt", affine.fit.tol_opt},
              {"max_iter", affine.fit.max_iter},
              {"held_out", affine.held_out},
              {"competitor", affine.poor_mans_competitor ? "poor-mans" : "none"}}},
            {"piecewise",
             {{"eps", piecewise.eps},
              {"max_cells", piecewise.max_cells},
              {"max_depth", piecewise.max_depth},
              {"n_max", piecewise.n_max},
              {"grid_per_dim", piecewise.grid_per_dim},
              {"random_eta", piecewise.random_eta},
              {"split_rule", piecewise.split_rule == SplitRule::round_robin ? "round_robin" : "surrogate_faces"}}},
            {"oracle", {{"grid", oracle.grid}, {"eps", oracle.eps}, {"eps_slice", oracle.eps_slice}, {"slices", oracle.slices}}},
            {"estimate",
             {{"method", name_of(kMethodNames, estimate.method)},
              {"samples", estimate.samples},
              {"noise", {{"kind", name_of(kNoiseNames, estimate.noise.kind)}, {"level", estimate.noise.level}}}}},
            {"inputs", {{"observations", inputs.observations}, {"state", inputs.state}, {"map", inputs.map}}}};
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json().dump()); }

RunResult run(const ExperimentConfig& config)
{
    Context ctx(config);
    fs::create_directories(ctx.out);
    json summary;
    switch (config.task) {
    case Task::greedy_decay: summary = task_greedy_decay(ctx); break;
    case Task::fit_affine: summary = task_fit_affine(ctx); break;
    case Task::build_pw: summary = task_build_pw(ctx); break;
    case Task::estimate_state: summary = task_estimate_state(ctx); break;
    case Task::estimate_param: summary = task_estimate_param(ctx); break;
    case Task::bench_oracle: summary = task_bench_oracle(ctx); break;
    case Task::compare_all: summary = task_compare_all(ctx); break;
    }
    summary["task"] = to_string(config.task);
    ctx.document("summary.json", summary);

    json files = json::array();
    for (const std::string& name : ctx.artifacts)
        files.push_back({{"file", name}, {"fnv1a", hex(fnv1a(read_text(ctx.out / name)))}});
    const json manifest{{"version", kVersion},
                        {"task", to_string(config.task)},
                        {"seed", config.seed},
                        {"config_hash", hex(config.hash())},
                        {"config", config.to_json()},
                        {"artifacts", files}};
    write_text(ctx.out / "manifest.json", manifest.dump(2) + "\n");
    ctx.artifacts.push_back("manifest.json");
    return {ctx.artifacts, summary};
}

}  // namespace pbdw
