#include "offdrive/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "offdrive/env.hpp"
#include "offdrive/error.hpp"
#include "offdrive/rng.hpp"

namespace offdrive {

using nlohmann::json;

std::vector<double> evaluate_policy(const ExperimentConfig& config, Policy& policy, int episodes, std::uint64_t seed) {
    if (episodes <= 0) throw ContractError("evaluate_policy: episodes must be positive");
    if (policy.obs_dim() >= 0 && policy.obs_dim() != config.perception.observation_dim())
        throw DataError("policy expects " + std::to_string(policy.obs_dim()) + "-dim observations, environment emits " +
                        std::to_string(config.perception.observation_dim()));
    DrivingEnv env(config);
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
        auto obs = env.reset(Rng::derive_key(seed, "eval-episode-" + std::to_string(e)));
        std::map<int, std::vector<float>> current;
        for (auto& [id, o] : obs) current[id] = o.to_vector();
        std::map<int, double> total;
        for (int id : env.agent_ids()) total[id] = 0.0;
        while (!env.episode_over()) {
            std::map<int, Action> actions;
            for (int id : env.agent_ids()) {
                if (env.agent_done(id)) continue;
                const auto raw = policy.act(PolicyContext{current[id], env.world(), id});
                actions[id] = continuous_to_hybrid(raw[0], raw[1], config.reward);
            }
            const EnvStep s = env.step(actions);
            for (const auto& [id, a] : s.agents) {
                total[id] += a.reward.total;
                current[id] = a.observation.to_vector();
            }
        }
        double sum = 0.0;
        for (const auto& [id, r] : total) sum += r;
        returns.push_back(total.empty() ? 0.0 : sum / static_cast<double>(total.size()));
    }
    return returns;
}

std::vector<double> PolicyScores::seed_means() const {
    std::vector<double> out;
    for (const auto& r : returns) out.push_back(offdrive::mean(r));
    return out;
}

double PolicyScores::mean() const { return offdrive::mean(seed_means()); }
double PolicyScores::two_sigma() const { return 2.0 * sample_stddev(seed_means()); }

PolicyScores evaluate_protocol(const ExperimentConfig& config, const PolicyFactory& make_policy,
                               const EvalProtocol& protocol, int threads) {
    if (protocol.seeds <= 0 || protocol.episodes <= 0) throw ConfigError("evaluation protocol needs positive counts");
    PolicyScores out;
    out.returns.resize(static_cast<std::size_t>(protocol.seeds));
    for (int s = 0; s < protocol.seeds; ++s) out.seeds.push_back(protocol.base_seed + static_cast<std::uint64_t>(s));

    std::vector<std::unique_ptr<Policy>> policies;
    for (int s = 0; s < protocol.seeds; ++s) policies.push_back(make_policy());

    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, protocol.seeds);
    if (workers <= 1) {
        for (int s = 0; s < protocol.seeds; ++s)
            out.returns[s] = evaluate_policy(config, *policies[s], protocol.episodes, out.seeds[s]);
        return out;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(protocol.seeds));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int s = w; s < protocol.seeds; s += workers) {
                try {
                    out.returns[s] = evaluate_policy(config, *policies[s], protocol.episodes, out.seeds[s]);
                } catch (...) {
                    errors[s] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

double normalized_score(double score, double score_random, double score_final) {
    const double denom = score_final - score_random;
    if (!(std::abs(denom) > 1e-12 * std::max({1.0, std::abs(score_final), std::abs(score_random)})))
        throw DataError("normalized score undefined: final and random reference scores coincide");
    return (score - score_random) / denom;
}

namespace {

json protocol_json(const EvalProtocol& p) {
    return {{"seeds", p.seeds}, {"episodes", p.episodes}, {"base_seed", p.base_seed}};
}
EvalProtocol protocol_from(const json& j) {
    return {j.at("seeds").get<int>(), j.at("episodes").get<int>(), j.at("base_seed").get<std::uint64_t>()};
}
json references_json(const References& r) {
    return {{"scenario", r.scenario}, {"protocol", protocol_json(r.protocol)},
            {"random", r.random},     {"medium", r.medium},
            {"final", r.final},       {"config_hash", r.config_hash}};
}
References references_from(const json& j) {
    References r;
    r.scenario = j.at("scenario");
    r.protocol = protocol_from(j.at("protocol"));
    r.random = j.at("random");
    r.medium = j.at("medium");
    r.final = j.at("final");
    r.config_hash = j.at("config_hash");
    return r;
}

std::string read_text(const std::filesystem::path& path, const char* what) {
    std::ifstream f(path);
    if (!f) throw DataError(std::string("cannot open ") + what + " " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("failed writing " + path.string());
}

}  // namespace

void save_references(const std::filesystem::path& path, const References& refs) {
    write_text(path, references_json(refs).dump(2) + "\n");
}

References load_references(const std::filesystem::path& path) {
    try {
        return references_from(json::parse(read_text(path, "references file")));
    } catch (const json::exception& e) {
        throw DataError("malformed references file " + path.string() + ": " + e.what());
    }
}

std::vector<double> EvalReport::normalized_seed_means() const {
    std::vector<double> out;
    for (double m : scores.seed_means()) out.push_back(normalized_score(m, references.random, references.final));
    return out;
}

double EvalReport::normalized_mean() const { return mean(normalized_seed_means()); }
double EvalReport::normalized_two_sigma() const { return 2.0 * sample_stddev(normalized_seed_means()); }

Quartiles EvalReport::normalized_iqr() const {
    std::vector<double> all;
    for (const auto& seed : scores.returns)
        for (double r : seed) all.push_back(normalized_score(r, references.random, references.final));
    return iqr_summary(all);
}

std::string to_json(const EvalReport& r) {
    json j;
    j["format"] = "ad4rl-eval-report";
    j["version"] = 1;
    j["scenario"] = r.scenario;
    j["flavor"] = r.flavor;
    j["algorithm"] = r.algorithm;
    j["label"] = r.label;
    j["train_seed"] = r.train_seed;
    j["protocol"] = protocol_json(r.protocol);
    j["references"] = references_json(r.references);
    j["seeds"] = r.scores.seeds;
    j["returns"] = r.scores.returns;
    j["mean"] = r.scores.mean();
    j["two_sigma"] = r.scores.two_sigma();
    j["normalized"] = r.normalized_mean();
    j["normalized_two_sigma"] = r.normalized_two_sigma();
    const Quartiles q = r.normalized_iqr();
    j["normalized_iqr"] = {q.q1, q.q2, q.q3};
    return j.dump(2) + "\n";
}

EvalReport parse_eval_report(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", std::string()) != "ad4rl-eval-report") throw DataError("not an evaluation report");
        EvalReport r;
        r.scenario = j.at("scenario");
        r.flavor = j.at("flavor");
        r.algorithm = j.at("algorithm");
        r.label = j.at("label");
        r.train_seed = j.at("train_seed");
        r.protocol = protocol_from(j.at("protocol"));
        r.references = references_from(j.at("references"));
        r.scores.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        r.scores.returns = j.at("returns").get<std::vector<std::vector<double>>>();
        if (r.scores.seeds.size() != r.scores.returns.size() || r.scores.seeds.empty())
            throw DataError("evaluation report seeds and returns disagree");
        for (const auto& s : r.scores.returns)
            if (s.empty()) throw DataError("evaluation report has a seed without episodes");
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed evaluation report: ") + e.what());
    }
}

EvalReport load_eval_report(const std::filesystem::path& path) {
    return parse_eval_report(read_text(path, "evaluation report"));
}

namespace {

std::string fmt(double x) {
    std::ostringstream s;
    s << std::setprecision(10) << x;
    return s.str();
}

std::string fixed3(double x) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << x;
    return s.str();
}

}  // namespace

ReportTables aggregate_reports(std::vector<EvalReport> reports) {
    std::sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
        return std::tie(a.scenario, a.flavor, a.algorithm, a.train_seed, a.label) <
               std::tie(b.scenario, b.flavor, b.algorithm, b.train_seed, b.label);
    });
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, std::vector<const EvalReport*>> cells;
    for (const auto& r : reports) cells[{r.scenario, r.flavor, r.algorithm}].push_back(&r);

    ReportTables out;
    std::ostringstream scores, summary;
    scores << "scenario,flavor,algorithm,seed,episode,return\n";
    summary << "scenario,flavor,algorithm,runs,seeds,episodes,mean,two_sigma,normalized,normalized_two_sigma,q1,q2,q3\n";

    std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> table;
    std::set<std::string> algorithms;
    for (const auto& [key, group] : cells) {
        const auto& [scenario, flavor, algorithm] = key;
        std::vector<double> seed_means, normalized_means, normalized_episodes;
        std::size_t episodes = 0;
        for (const EvalReport* r : group) {
            for (std::size_t s = 0; s < r->scores.seeds.size(); ++s)
                for (std::size_t e = 0; e < r->scores.returns[s].size(); ++e) {
                    const double ret = r->scores.returns[s][e];
                    scores << scenario << ',' << flavor << ',' << algorithm << ',' << r->scores.seeds[s] << ',' << e
                           << ',' << fmt(ret) << '\n';
                    normalized_episodes.push_back(normalized_score(ret, r->references.random, r->references.final));
                    ++episodes;
                }
            const auto means = r->scores.seed_means();
            seed_means.insert(seed_means.end(), means.begin(), means.end());
            const auto nm = r->normalized_seed_means();
            normalized_means.insert(normalized_means.end(), nm.begin(), nm.end());
        }
        const Quartiles q = iqr_summary(normalized_episodes);
        const double nmean = mean(normalized_means), n2s = 2.0 * sample_stddev(normalized_means);
        summary << scenario << ',' << flavor << ',' << algorithm << ',' << group.size() << ',' << seed_means.size()
                << ',' << episodes << ',' << fmt(mean(seed_means)) << ',' << fmt(2.0 * sample_stddev(seed_means))
                << ',' << fmt(nmean) << ',' << fmt(n2s) << ',' << fmt(q.q1) << ',' << fmt(q.q2) << ',' << fmt(q.q3)
                << '\n';
        table[{scenario, flavor}][algorithm] = fixed3(nmean) + " ± " + fixed3(n2s);
        algorithms.insert(algorithm);
    }

    std::ostringstream t;
    t << "scenario,flavor";
    for (const auto& a : algorithms) t << ',' << a;
    t << '\n';
    for (const auto& [row, values] : table) {
        t << row.first << ',' << row.second;
        for (const auto& a : algorithms) {
            auto it = values.find(a);
            t << ',' << (it == values.end() ? "" : it->second);
        }
        t << '\n';
    }
    out.scores_csv = scores.str();
    out.summary_csv = summary.str();
    out.table_csv = t.str();
    return out;
}

}  // namespace offdrive
