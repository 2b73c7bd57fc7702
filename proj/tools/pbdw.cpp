// SPDX-License-Identifier: Apache-2.0
//
// pbdw run       --config <json> [--task <name>] [--seed <u64>] [--out <dir>] [--threads <n>] [--competitor poor-mans]
// pbdw oracle bench --config <json> [...]
// pbdw estimate  --config <json> --observations <csv> [--pw] [--map <dir>]
// pbdw invert    --config <json> (--state <matrix csv> | --from-observation <csv> --map <dir>)
#include "pbdw/experiment.hpp"
#include "pbdw/io.hpp"
#include "pbdw/parallel.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace {

using nlohmann::json;

struct Common {
    std::string config;
    std::string task;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    unsigned threads = 1;
};

void add_common(CLI::App& cmd, Common& c, bool with_task)
{
    cmd.add_option("--config", c.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    if (with_task) cmd.add_option("--task", c.task, "task name, overrides the config");
    cmd.add_option_function<std::uint64_t>("--seed", [&c](const std::uint64_t& s) { c.seed = s; c.seed_set = true; },
                                           "master seed, overrides the config");
    cmd.add_option("--out", c.out, "output directory, overrides the config");
    cmd.add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

int report(const std::string& kind, const std::string& message, const std::string& pointer, int status)
{
    json err{{"error", kind}, {"message", message}};
    if (!pointer.empty()) err["pointer"] = pointer;
    std::cerr << err.dump() << '\n';
    return status;
}

int execute(const Common& c, const std::function<void(json&)>& adjust)
{
    try {
        json doc;
        try {
            doc = json::parse(pbdw::read_text(c.config));
        } catch (const json::parse_error& e) {
            return report("config", c.config + ": " + e.what(), "/", 2);
        }
        if (!doc.is_object()) return report("config", "configuration must be a JSON object", "/", 2);
        if (!c.task.empty()) doc["task"] = c.task;
        if (c.seed_set) doc["seed"] = c.seed;
        if (!c.out.empty()) doc["output_dir"] = c.out;
        adjust(doc);
        const pbdw::ExperimentConfig cfg = pbdw::ExperimentConfig::from_json(doc);
        pbdw::thread_count() = c.threads;
        const pbdw::RunResult result = pbdw::run(cfg);
        std::cout << result.summary.dump(2) << '\n';
        return 0;
    } catch (const pbdw::ConfigError& e) {
        return report("config", e.what(), e.pointer(), 2);
    } catch (const pbdw::InvalidInput& e) {
        return report("invalid_input", e.what(), "", 3);
    } catch (const pbdw::NumericalError& e) {
        return report("numerical", e.what(), "", 4);
    } catch (const std::exception& e) {
        return report("internal", e.what(), "", 1);
    }
}

// Piecewise when the directory holds a partition, affine when it holds a fitted map.
std::string method_for_map(const std::string& dir)
{
    if (std::filesystem::exists(std::filesystem::path(dir) / "partition.json")) return "piecewise";
    if (std::filesystem::exists(std::filesystem::path(dir) / "map.json")) return "affine";
    throw pbdw::InvalidInput(dir + ": neither partition.json nor map.json found");
}

void set_estimate(json& doc, const std::string& method)
{
    if (!doc.contains("estimate") || !doc["estimate"].is_object()) doc["estimate"] = json::object();
    doc["estimate"]["method"] = method;
}

void set_input(json& doc, const std::string& key, const std::string& value)
{
    if (!doc.contains("inputs") || !doc["inputs"].is_object()) doc["inputs"] = json::object();
    doc["inputs"][key] = value;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"State and parameter estimation from linear sensor data for parametric elliptic problems"};
    app.require_subcommand(1);

    Common run_opts;
    std::string competitor;
    auto* run = app.add_subcommand("run", "run the task named in the configuration");
    add_common(*run, run_opts, true);
    run->add_option("--competitor", competitor, "fit_affine: also evaluate this competitor")
        ->check(CLI::IsMember({"poor-mans", "none"}));

    Common oracle_opts;
    auto* oracle = app.add_subcommand("oracle", "brute-force benchmarks");
    oracle->require_subcommand(1);
    auto* bench = oracle->add_subcommand("bench", "emit the benchmark report");
    add_common(*bench, oracle_opts, false);

    Common est_opts;
    std::string observations, est_map;
    bool pw = false;
    auto* estimate = app.add_subcommand("estimate", "recover states from an observation CSV");
    add_common(*estimate, est_opts, false);
    estimate->add_option("--observations", observations, "CSV with header sensor_id,value")
        ->required()->check(CLI::ExistingFile);
    estimate->add_flag("--pw", pw, "use the piecewise estimator");
    estimate->add_option("--map", est_map, "directory of a fitted map or partition")->check(CLI::ExistingDirectory);

    Common inv_opts;
    std::string state, from_obs, inv_map;
    auto* invert = app.add_subcommand("invert", "estimate the parameter of a state or observation");
    add_common(*invert, inv_opts, false);
    auto* state_opt = invert->add_option("--state", state, "matrix CSV, one state per column")->check(CLI::ExistingFile);
    auto* obs_opt = invert->add_option("--from-observation", from_obs, "observation CSV")->check(CLI::ExistingFile);
    auto* map_opt = invert->add_option("--map", inv_map, "directory of a fitted map or partition")
                        ->check(CLI::ExistingDirectory);
    state_opt->excludes(obs_opt);
    obs_opt->needs(map_opt);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return execute(run_opts, [&](json& doc) {
            if (competitor.empty()) return;
            if (!doc.contains("affine") || !doc["affine"].is_object()) doc["affine"] = json::object();
            doc["affine"]["competitor"] = competitor;
        });
    if (bench->parsed()) return execute(oracle_opts, [](json& doc) { doc["task"] = "bench_oracle"; });
    if (estimate->parsed())
        return execute(est_opts, [&](json& doc) {
            doc["task"] = "estimate_state";
            set_input(doc, "observations", observations);
            if (!est_map.empty()) {
                set_input(doc, "map", est_map);
                set_estimate(doc, method_for_map(est_map));
            } else if (pw) {
                set_estimate(doc, "piecewise");
            }
            if (pw && !est_map.empty() && method_for_map(est_map) != "piecewise")
                throw pbdw::InvalidInput("--pw given but " + est_map + " holds an affine map");
        });
    if (invert->parsed()) {
        if (state.empty() && from_obs.empty()) {
            std::cerr << "invert: one of --state or --from-observation is required\n";
            return 2;
        }
        return execute(inv_opts, [&](json& doc) {
            doc["task"] = "estimate_param";
            if (!state.empty()) {
                set_input(doc, "state", state);
            } else {
                set_input(doc, "observations", from_obs);
                set_input(doc, "map", inv_map);
                set_estimate(doc, method_for_map(inv_map));
            }
        });
    }
    return 0;
}
