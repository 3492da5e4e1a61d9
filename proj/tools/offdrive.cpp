// offdrive: command-line front end for simulation, dataset generation, training and evaluation.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "offdrive/checkpoint.hpp"
#include "offdrive/config.hpp"
#include "offdrive/dataset.hpp"
#include "offdrive/env.hpp"
#include "offdrive/error.hpp"
#include "offdrive/evaluation.hpp"
#include "offdrive/generate.hpp"
#include "offdrive/ngsim.hpp"
#include "offdrive/policy.hpp"
#include "offdrive/traffic_sim.hpp"
#include "offdrive/training.hpp"

namespace fs = std::filesystem;
using namespace offdrive;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Common {
    std::string config;
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--scenario", c.scenario, "Scenario defaults when no --config: highway, lane_reduction, cut_in");
    cmd->add_option("--seed", c.seed, "Seed for the scenario, training and generation streams");
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    cmd->add_option("--threads", c.threads, "Worker threads for evaluation (0: all cores)");
}

ExperimentConfig resolve_config(const Common& c) {
    ExperimentConfig cfg;
    if (!c.config.empty()) {
        cfg = load_experiment_config(c.config);
        if (!c.scenario.empty() && parse_scenario_kind(c.scenario) != cfg.scenario.scenario)
            throw ConfigError("--scenario " + c.scenario + " contradicts the scenario in " + c.config);
    } else if (!c.scenario.empty()) {
        cfg.scenario = ScenarioConfig::defaults(parse_scenario_kind(c.scenario));
    }
    if (c.seed) {
        cfg.scenario.seed = *c.seed;
        cfg.train.seed = *c.seed;
    }
    cfg.validate();
    return cfg;
}

fs::path ensure_out(const Common& c) {
    fs::path out(c.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("failed writing " + path.string());
}

void say(const std::string& line) { std::cout << line << std::endl; }

std::string rounded(double x) {
    std::ostringstream s;
    s << std::setprecision(6) << x;
    return s.str();
}

// ---- simulate ----------------------------------------------------------------------------

int run_simulate(const Common& c, std::optional<int> steps, const std::string& checkpoint) {
    const ExperimentConfig cfg = resolve_config(c);
    const fs::path out = ensure_out(c);
    std::ofstream trace(out / "trace.csv", std::ios::trunc);
    if (!trace) throw DataError("cannot write " + (out / "trace.csv").string());
    const int n = steps.value_or(cfg.scenario.horizon);

    std::unique_ptr<Policy> policy;
    if (checkpoint.empty())
        policy = std::make_unique<IdmPolicy>(cfg.dynamics);
    else
        policy = std::make_unique<ActorPolicy>(load_checkpoint(checkpoint));

    int accidents = 0, done_steps = 0;
    if (cfg.scenario.agent_count == 0) {
        write_trace_header(trace);
        WorldState world = build_scenario(cfg.scenario, cfg.reward.v_star, cfg.dynamics);
        append_trace(trace, world);
        for (; done_steps < n; ++done_steps) {
            StepResult r = step(world, {}, cfg.dynamics, cfg.scenario.dt);
            accidents += static_cast<int>(r.accidents.size());
            world = std::move(r.world);
            append_trace(trace, world);
        }
    } else {
        write_env_trace_header(trace);
        DrivingEnv env(cfg);
        auto first = env.reset();
        std::map<int, std::vector<float>> obs;
        for (auto& [id, o] : first) obs[id] = o.to_vector();
        append_env_trace(trace, env.world(), nullptr);
        for (; done_steps < n && !env.episode_over(); ++done_steps) {
            std::map<int, Action> actions;
            for (int id : env.agent_ids())
                if (!env.agent_done(id)) {
                    const auto raw = policy->act(PolicyContext{obs[id], env.world(), id});
                    actions[id] = continuous_to_hybrid(raw[0], raw[1], cfg.reward);
                }
            const EnvStep s = env.step(actions);
            for (const auto& [id, a] : s.agents) {
                obs[id] = a.observation.to_vector();
                accidents += a.accident ? 1 : 0;
            }
            append_env_trace(trace, env.world(), &s);
        }
    }
    say("simulate: " + std::to_string(done_steps) + " steps, " + std::to_string(accidents) + " accidents -> " +
        (out / "trace.csv").string());
    return kOk;
}

// ---- train-online ------------------------------------------------------------------------

int run_train_online(const Common& c, std::optional<long long> steps, int eval_seeds, int eval_episodes) {
    const ExperimentConfig cfg = resolve_config(c);
    const fs::path out = ensure_out(c);
    OnlineOptions opt;
    opt.steps = steps.value_or(cfg.train.gradient_steps);
    opt.reference_protocol.seeds = eval_seeds;
    opt.reference_protocol.episodes = eval_episodes;
    opt.threads = c.threads;
    const OnlineResult r = train_online(cfg, opt);
    save_checkpoint(out / "random.ckpt", r.random);
    save_checkpoint(out / "medium.ckpt", r.medium);
    save_checkpoint(out / "final.ckpt", r.final);
    save_references(out / "references.json", r.references);
    write_file(out / "train_log.csv", log_csv(r.log));
    write_file(out / "config.json", to_json(cfg) + "\n");
    const auto& refs = r.references;
    if (!(refs.final >= refs.medium && refs.medium >= refs.random))
        std::cerr << nlohmann::json{{"warning", "reference scores are not ordered final >= medium >= random"},
                                    {"random", refs.random},
                                    {"medium", refs.medium},
                                    {"final", refs.final}}
                         .dump()
                  << std::endl;
    say("train-online: random " + rounded(refs.random) + ", medium " + rounded(refs.medium) + " (step " +
        std::to_string(r.medium.step) + "), final " + rounded(refs.final) + " (step " + std::to_string(r.final.step) +
        ") -> " + out.string());
    return kOk;
}

// ---- gen-dataset -------------------------------------------------------------------------

std::string dataset_name(const ExperimentConfig& cfg, const std::string& flavor) {
    return to_string(cfg.scenario.scenario) + "-" + flavor;
}

LoadedDataset generate_flavor(const ExperimentConfig& cfg, const std::string& flavor, const fs::path& checkpoint,
                              std::uint64_t count, std::uint64_t seed, double noise) {
    GenerateOptions g;
    g.count = count;
    g.seed = seed;
    g.flavor = flavor;
    if (flavor == "human-like") {
        IdmPolicy idm(cfg.dynamics);
        return generate_synthetic(cfg, idm, g);
    }
    const Checkpoint ck = load_checkpoint(checkpoint);
    if (ck.scenario != to_string(cfg.scenario.scenario))
        throw DataError("checkpoint " + checkpoint.string() + " was trained on " + ck.scenario + ", not " +
                        to_string(cfg.scenario.scenario));
    ActorPolicy policy(ck, noise, Rng::derive_key(seed, "gen-noise"));
    g.source_policy = ck.label;
    return generate_synthetic(cfg, policy, g);
}

int run_gen_dataset(const Common& c, const std::string& flavor, const std::string& checkpoint, const std::string& from,
                    const std::vector<std::string>& mix, bool all, std::uint64_t count, double noise,
                    const std::string& name, bool no_order_check) {
    const ExperimentConfig cfg = resolve_config(c);
    const fs::path out = ensure_out(c);
    const std::uint64_t seed = cfg.scenario.seed;

    auto save = [&](const LoadedDataset& d, const std::string& n) {
        write_dataset(out / n, d.data, d.meta);
        say("gen-dataset: " + d.meta.flavor + " " + std::to_string(d.data.size()) + " transitions" +
            (d.meta.behavior_return ? ", behavior return " + rounded(*d.meta.behavior_return) : std::string()) +
            " -> " + (out / n).string() + ".ad4rl");
    };

    if (!mix.empty()) {
        if (mix.size() != 2) throw ConfigError("--mix takes exactly two datasets");
        const LoadedDataset m = mix_datasets(read_dataset(mix[0]), read_dataset(mix[1]), seed);
        save(m, name.empty() ? m.meta.scenario + "-" + m.meta.flavor : name);
        return kOk;
    }
    if (all) {
        if (from.empty()) throw ConfigError("--all needs --from <train-online output directory>");
        std::map<std::string, LoadedDataset> sets;
        for (const std::string f : {"final", "medium", "random"})
            sets[f] = generate_flavor(cfg, f, fs::path(from) / (f + ".ckpt"), count, Rng::derive_key(seed, f), noise);
        sets["human-like"] = generate_flavor(cfg, "human-like", {}, count, Rng::derive_key(seed, "human-like"), 0.0);
        const double rf = *sets["final"].meta.behavior_return, rm = *sets["medium"].meta.behavior_return,
                     rr = *sets["random"].meta.behavior_return;
        if (!(rf >= rm && rm >= rr)) {
            const std::string msg = "behavior returns are not ordered final >= medium >= random (" + rounded(rf) +
                                    ", " + rounded(rm) + ", " + rounded(rr) + ")";
            if (!no_order_check) throw DataError(msg);
            std::cerr << nlohmann::json{{"warning", msg}}.dump() << std::endl;
        }
        sets["final-medium"] = mix_datasets(sets["final"], sets["medium"], Rng::derive_key(seed, "final-medium"));
        sets["final-random"] = mix_datasets(sets["final"], sets["random"], Rng::derive_key(seed, "final-random"));
        for (const auto& [f, d] : sets) save(d, dataset_name(cfg, f));
        return kOk;
    }
    if (flavor.empty()) throw ConfigError("gen-dataset needs --flavor, --mix or --all");
    if (!is_known_flavor(flavor) || flavor == "ngsim" || flavor == "final-medium" || flavor == "final-random")
        throw ConfigError("--flavor must be final, medium, random or human-like (use --mix for blends)");
    fs::path ck = checkpoint;
    if (flavor != "human-like" && ck.empty()) {
        if (from.empty()) throw ConfigError("--flavor " + flavor + " needs --checkpoint or --from");
        ck = fs::path(from) / (flavor + ".ckpt");
    }
    save(generate_flavor(cfg, flavor, ck, count, seed, noise), name.empty() ? dataset_name(cfg, flavor) : name);
    return kOk;
}

// ---- ingest-ngsim ------------------------------------------------------------------------

int run_ingest(const Common& c, const std::string& input, const std::string& name, bool flip, double tolerance) {
    ExperimentConfig cfg = resolve_config(c);
    if (cfg.scenario.scenario != ScenarioKind::Highway)
        throw ConfigError("NGSIM data only applies to the highway scenario");
    const fs::path out = ensure_out(c);
    ngsim::IngestOptions opt;
    opt.reconstruction.flip_orientation = flip;
    opt.consistency_tolerance = tolerance;
    const ngsim::IngestResult r = ngsim::ingest(fs::path(input), cfg, opt);
    const std::string n = name.empty() ? "highway-ngsim" : name;
    write_dataset(out / n, r.dataset.data, r.dataset.meta);
    write_file(out / (n + ".report.json"), r.report_json + "\n");
    say("ingest-ngsim: " + std::to_string(r.dataset.data.size()) + " transitions, consistency " +
        rounded(r.consistency) + ", max Local_Y " + rounded(r.max_local_y_ft) + " ft -> " + (out / n).string() +
        ".ad4rl");
    return kOk;
}

// ---- train-offline -----------------------------------------------------------------------

int run_train_offline(const Common& c, const std::string& algorithm, const std::string& dataset,
                      std::optional<long long> steps, const std::string& name) {
    const ExperimentConfig cfg = resolve_config(c);
    const fs::path out = ensure_out(c);
    const LoadedDataset data = read_dataset(dataset);
    if (data.meta.scenario != to_string(cfg.scenario.scenario))
        throw DataError("dataset " + dataset + " belongs to scenario " + data.meta.scenario + ", config is " +
                        to_string(cfg.scenario.scenario));
    OfflineOptions opt;
    opt.algorithm = algorithm;
    opt.steps = steps.value_or(cfg.train.gradient_steps);
    opt.seed = cfg.train.seed;
    OfflineResult r = train_offline(cfg, data, opt);
    r.checkpoint.label = algorithm + ":" + data.meta.flavor;
    const std::string n = name.empty() ? data.meta.scenario + "-" + data.meta.flavor + "-" + algorithm : name;
    save_checkpoint(out / (n + ".ckpt"), r.checkpoint);
    write_file(out / (n + ".log.csv"), log_csv(r.log));
    say("train-offline: " + algorithm + " on " + data.meta.flavor + ", " + std::to_string(opt.steps) + " steps -> " +
        (out / (n + ".ckpt")).string());
    return kOk;
}

// ---- evaluate ----------------------------------------------------------------------------

int run_evaluate(const Common& c, const std::string& checkpoint, const std::string& references,
                 const std::string& flavor, std::optional<int> seeds, std::optional<int> episodes,
                 const std::string& name) {
    const ExperimentConfig cfg = resolve_config(c);
    const fs::path out = ensure_out(c);
    const Checkpoint ck = load_checkpoint(checkpoint);
    if (ck.scenario != to_string(cfg.scenario.scenario))
        throw DataError("checkpoint " + checkpoint + " was trained on " + ck.scenario + ", config is " +
                        to_string(cfg.scenario.scenario));
    EvalReport rep;
    rep.references = load_references(references);
    if (rep.references.scenario != ck.scenario) throw DataError("references belong to another scenario");
    rep.protocol = rep.references.protocol;
    if (c.seed) rep.protocol.base_seed = *c.seed;
    if (seeds) rep.protocol.seeds = *seeds;
    if (episodes) rep.protocol.episodes = *episodes;
    rep.scenario = ck.scenario;
    rep.algorithm = ck.algorithm;
    rep.label = ck.label;
    // Offline checkpoints carry "algorithm:flavor" labels; behaviour policies score as "online".
    if (!flavor.empty())
        rep.flavor = flavor;
    else if (const auto colon = ck.label.find(':'); colon != std::string::npos)
        rep.flavor = ck.label.substr(colon + 1);
    else
        rep.flavor = ck.algorithm == "ddpg" ? "online" : "unknown";
    rep.train_seed = ck.seed;
    rep.scores = evaluate_protocol(
        cfg, [&] { return std::make_unique<ActorPolicy>(ck); }, rep.protocol, c.threads);
    const std::string n = name.empty() ? "eval-" + rep.scenario + "-" + rep.flavor + "-" + rep.algorithm + "-s" +
                                              std::to_string(rep.train_seed)
                                        : name;
    write_file(out / (n + ".json"), to_json(rep));
    say("evaluate: " + rep.label + " mean return " + rounded(rep.scores.mean()) + " ± " +
        rounded(rep.scores.two_sigma()) + ", normalized " + rounded(rep.normalized_mean()) + " -> " +
        (out / (n + ".json")).string());
    return kOk;
}

// ---- report ------------------------------------------------------------------------------

int run_report(const Common& c, const std::vector<std::string>& inputs) {
    const fs::path out = ensure_out(c);
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::directory_iterator(in))
                if (e.is_regular_file() && e.path().extension() == ".json" &&
                    e.path().filename().string().rfind("eval-", 0) == 0)
                    files.push_back(e.path());
        } else {
            files.emplace_back(in);
        }
    }
    if (files.empty()) throw DataError("report: no evaluation reports found");
    std::vector<EvalReport> reports;
    for (const auto& f : files) reports.push_back(load_eval_report(f));
    const ReportTables t = aggregate_reports(std::move(reports));
    write_file(out / "scores.csv", t.scores_csv);
    write_file(out / "summary.csv", t.summary_csv);
    write_file(out / "table.csv", t.table_csv);
    say("report: " + std::to_string(files.size()) + " reports -> " + (out / "summary.csv").string());
    return kOk;
}

int fail(Exit code, const std::string& kind, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"exit", static_cast<int>(code)}, {"message", message}}.dump()
              << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offdrive: traffic simulation, driving datasets and offline RL baselines"};
    app.require_subcommand(1);
    Common common;

    auto* sim = app.add_subcommand("simulate", "Run a scenario and write a per-step trace CSV");
    add_common(sim, common);
    std::optional<int> sim_steps;
    std::string sim_ckpt;
    sim->add_option("--steps", sim_steps, "Steps to simulate (default: horizon)");
    sim->add_option("--checkpoint", sim_ckpt, "Actor checkpoint for the agents (default: IDM controller)");

    auto* online = app.add_subcommand("train-online", "Train DDPG behaviour policies (random/medium/final)");
    add_common(online, common);
    std::optional<long long> online_steps;
    int ref_seeds = 5, ref_episodes = 10;
    online->add_option("--steps", online_steps, "Environment steps (default: train.gradient_steps)");
    online->add_option("--eval-seeds", ref_seeds, "Reference evaluation seeds")->capture_default_str();
    online->add_option("--eval-episodes", ref_episodes, "Reference evaluation episodes per seed")->capture_default_str();

    auto* gen = app.add_subcommand("gen-dataset", "Generate synthetic dataset flavors or blends");
    add_common(gen, common);
    std::string gen_flavor, gen_ckpt, gen_from, gen_name;
    std::vector<std::string> gen_mix;
    bool gen_all = false, gen_no_order = false;
    std::uint64_t gen_count = 1000000;
    double gen_noise = 0.0;
    gen->add_option("--flavor", gen_flavor, "final, medium, random or human-like");
    gen->add_option("--checkpoint", gen_ckpt, "Behaviour-policy checkpoint")->check(CLI::ExistingFile);
    gen->add_option("--from", gen_from, "train-online output directory")->check(CLI::ExistingDirectory);
    gen->add_option("--mix", gen_mix, "Blend two datasets in equal proportions")->expected(2);
    gen->add_flag("--all", gen_all, "All seven synthetic flavors except ngsim, from --from");
    gen->add_option("--count", gen_count, "Transitions per dataset")->capture_default_str();
    gen->add_option("--noise", gen_noise, "Gaussian action noise (unit space) for checkpoint policies");
    gen->add_option("--name", gen_name, "Output base name");
    gen->add_flag("--no-order-check", gen_no_order, "Warn instead of failing when flavor returns are unordered");

    auto* ing = app.add_subcommand("ingest-ngsim", "Convert an NGSIM US-101 trajectory CSV into a dataset");
    add_common(ing, common);
    std::string ing_input, ing_name;
    bool ing_flip = false;
    double ing_tol = 0.5;
    ing->add_option("--input", ing_input, "NGSIM trajectory CSV")->required()->check(CLI::ExistingFile);
    ing->add_option("--name", ing_name, "Output base name (default highway-ngsim)");
    ing->add_flag("--flip-lanes", ing_flip, "Treat NGSIM lane 1 as the rightmost lane");
    ing->add_option("--tolerance", ing_tol, "Consistency tolerance in metres")->capture_default_str();

    auto* off = app.add_subcommand("train-offline", "Train an offline policy on a dataset");
    add_common(off, common);
    std::string off_algo = "bc", off_data, off_name;
    std::optional<long long> off_steps;
    off->add_option("--algorithm", off_algo, "bc or imitative")->capture_default_str();
    off->add_option("--dataset", off_data, "Dataset (.ad4rl, .meta.json or base name)")->required();
    off->add_option("--steps", off_steps, "Gradient steps (default: train.gradient_steps)");
    off->add_option("--name", off_name, "Output base name");

    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint with the seeds x episodes protocol");
    add_common(ev, common);
    std::string ev_ckpt, ev_refs, ev_flavor, ev_name;
    std::optional<int> ev_seeds, ev_episodes;
    ev->add_option("--checkpoint", ev_ckpt, "Actor checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--references", ev_refs, "references.json from train-online")->required()->check(CLI::ExistingFile);
    ev->add_option("--flavor", ev_flavor, "Dataset flavor the policy was trained on");
    ev->add_option("--seeds", ev_seeds, "Override the number of evaluation seeds");
    ev->add_option("--episodes", ev_episodes, "Override the episodes per seed");
    ev->add_option("--name", ev_name, "Output base name");

    auto* rep = app.add_subcommand("report", "Aggregate evaluation reports into CSV tables");
    add_common(rep, common);
    std::vector<std::string> rep_inputs;
    rep->add_option("inputs", rep_inputs, "Evaluation report files or directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(kUsage, "usage", e.what());
    }

    try {
        if (*sim) return run_simulate(common, sim_steps, sim_ckpt);
        if (*online) return run_train_online(common, online_steps, ref_seeds, ref_episodes);
        if (*gen)
            return run_gen_dataset(common, gen_flavor, gen_ckpt, gen_from, gen_mix, gen_all, gen_count, gen_noise,
                                   gen_name, gen_no_order);
        if (*ing) return run_ingest(common, ing_input, ing_name, ing_flip, ing_tol);
        if (*off) return run_train_offline(common, off_algo, off_data, off_steps, off_name);
        if (*ev) return run_evaluate(common, ev_ckpt, ev_refs, ev_flavor, ev_seeds, ev_episodes, ev_name);
        if (*rep) return run_report(common, rep_inputs);
    } catch (const ConfigError& e) {
        return fail(kUsage, "config", e.what());
    } catch (const DataError& e) {
        return fail(kData, "data", e.what());
    } catch (const std::exception& e) {
        return fail(kInternal, "internal", e.what());
    }
    return fail(kUsage, "usage", "no subcommand");
}
