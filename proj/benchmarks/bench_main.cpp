#include <benchmark/benchmark.h>

#include <filesystem>

#include "offdrive/dataset.hpp"
#include "offdrive/mlp.hpp"
#include "offdrive/observation.hpp"
#include "offdrive/rl.hpp"
#include "offdrive/traffic_sim.hpp"

using namespace offdrive;

namespace {

WorldState scenario_world(ScenarioKind kind) {
    ExperimentConfig cfg;
    cfg.scenario = ScenarioConfig::defaults(kind);
    return build_scenario(cfg.scenario, cfg.reward.v_star, cfg.dynamics);
}

void BM_SimStep(benchmark::State& state) {
    const auto kind = static_cast<ScenarioKind>(state.range(0));
    const DynamicsParams dyn;
    WorldState w = scenario_world(kind);
    const int agent = w.vehicles.back().id;
    for (auto _ : state) {
        StepResult s = step(w, {{agent, Action{0.0, 0}}}, dyn, 0.1);
        if (s.world.find(agent)->crashed) s.world = scenario_world(kind);
        w = std::move(s.world);
        benchmark::DoNotOptimize(w.vehicles.data());
    }
    state.SetLabel(to_string(kind) + ", " + std::to_string(w.vehicles.size()) + " vehicles");
}
BENCHMARK(BM_SimStep)->DenseRange(0, 2);

void BM_Observation(benchmark::State& state) {
    const WorldState w = scenario_world(ScenarioKind::Highway);
    const int agent = w.vehicles.back().id;
    const PerceptionParams p;
    for (auto _ : state) benchmark::DoNotOptimize(observe(w, agent, p, 2.0));
}
BENCHMARK(BM_Observation);

void BM_MlpForwardBackward(benchmark::State& state) {
    const int hidden = static_cast<int>(state.range(0)), batch = 256;
    Rng r(1, "bench");
    nn::Mlp critic = rl::make_critic(19, {hidden, hidden}, r);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(21, batch), g = Eigen::MatrixXd::Random(1, batch);
    nn::Mlp::Cache cache;
    Eigen::VectorXd grad;
    for (auto _ : state) {
        critic.forward(x, cache);
        critic.backward(cache, g, grad);
        benchmark::DoNotOptimize(grad.data());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(256);

void BM_DatasetWrite(benchmark::State& state) {
    const std::size_t n = 100000;
    Dataset d(19);
    std::vector<float> o(19, 1.5f);
    for (std::size_t i = 0; i < n; ++i) d.push(o, {0.5f, 0.0f}, -1.0f, o, DoneFlag::None);
    DatasetMeta meta;
    meta.scenario = "highway";
    meta.flavor = "random";
    const auto path = std::filesystem::temp_directory_path() / "offdrive_bench_dataset";
    for (auto _ : state) write_dataset(path, d, meta);
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * record_size(19)));
}
BENCHMARK(BM_DatasetWrite)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
