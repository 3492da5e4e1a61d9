#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "offdrive/config.hpp"
#include "offdrive/error.hpp"
#include "offdrive/rng.hpp"
#include "offdrive/stats.hpp"
#include "offdrive/types.hpp"

using namespace offdrive;

namespace {

WorldState world_of(int n) {
    WorldState w;
    w.road = RoadGeometry(1000.0, 3, std::nullopt, true);
    for (int i = 0; i < n; ++i) {
        VehicleState v;
        v.id = i;
        v.velocity = 10.0 + i;
        v.position = 20.0 * i;
        v.lane = 1 + i % 3;
        v.kind = background_class(i % 5);
        w.vehicles.push_back(v);
    }
    return w;
}

}  // namespace

TEST(FlattenState, DimensionIsThreePerVehicle) {
    EXPECT_TRUE(flatten_state(world_of(0)).empty());
    EXPECT_EQ(flatten_state(world_of(2)).size(), 6u);
    EXPECT_EQ(flatten_state(world_of(117)).size(), 351u);
}

TEST(FlattenState, StableIdOrder) {
    WorldState w = world_of(3);
    std::swap(w.vehicles[0], w.vehicles[2]);
    w.sort_by_id();
    const auto flat = flatten_state(w);
    EXPECT_DOUBLE_EQ(flat[0], 10.0);
    EXPECT_DOUBLE_EQ(flat[1], 0.0);
    EXPECT_DOUBLE_EQ(flat[3], 11.0);
    EXPECT_DOUBLE_EQ(flat[4], 20.0);
    EXPECT_DOUBLE_EQ(flat[7], 40.0);
}

TEST(SeededRng, SameKeySameStream) {
    Rng a(42, "spawn"), b(42, "spawn");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(SeededRng, SeedAndLabelDecorrelate) {
    Rng a(42, "spawn"), b(43, "spawn"), c(42, "noise");
    int same_b = 0, same_c = 0;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        same_b += x == b.next();
        same_c += x == c.next();
    }
    EXPECT_EQ(same_b, 0);
    EXPECT_EQ(same_c, 0);
}

TEST(SeededRng, StateRoundTrip) {
    Rng a(7, "x");
    for (int i = 0; i < 10; ++i) a.next();
    Rng b(0, "other");
    b.load_state(a.save_state());
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(SeededRng, IndexStaysInRange) {
    Rng r(1, "idx");
    std::set<std::size_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto k = r.index(7);
        ASSERT_LT(k, 7u);
        seen.insert(k);
    }
    EXPECT_EQ(seen.size(), 7u);
}

TEST(Fnv1a, KnownVectors) {
    // Reference values of the 64-bit FNV-1a function.
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(RoadGeometry, RingDistances) {
    RoadGeometry ring(100.0, 2, std::nullopt, true);
    EXPECT_DOUBLE_EQ(ring.wrap(130.0), 30.0);
    EXPECT_DOUBLE_EQ(ring.wrap(-10.0), 90.0);
    EXPECT_DOUBLE_EQ(ring.delta(90.0, 10.0), 20.0);
    EXPECT_DOUBLE_EQ(ring.delta(10.0, 90.0), -20.0);
    EXPECT_DOUBLE_EQ(ring.ahead(10.0, 90.0), 80.0);
}

TEST(RoadGeometry, BottleneckLanes) {
    RoadGeometry road(500.0, 4, Bottleneck{100.0, 200.0, 3}, true);
    EXPECT_EQ(road.lanes_at(50.0), 4);
    EXPECT_EQ(road.lanes_at(100.0), 3);
    EXPECT_EQ(road.lanes_at(199.9), 3);
    EXPECT_EQ(road.lanes_at(200.0), 4);
    EXPECT_FALSE(road.lane_exists(4, 150.0));
    ASSERT_TRUE(road.lane_end_ahead(60.0, 4, 100.0).has_value());
    EXPECT_NEAR(*road.lane_end_ahead(60.0, 4, 100.0), 40.0, 1e-9);
    EXPECT_FALSE(road.lane_end_ahead(60.0, 3, 100.0).has_value());
}

TEST(Config, DefaultsValidate) {
    for (auto k : {ScenarioKind::Highway, ScenarioKind::LaneReduction, ScenarioKind::CutIn}) {
        ExperimentConfig c;
        c.scenario = ScenarioConfig::defaults(k);
        EXPECT_NO_THROW(c.validate()) << to_string(k);
    }
}

TEST(Config, PerceptionDimensions) {
    PerceptionParams p;
    EXPECT_EQ(p.max_observable(), 6);
    EXPECT_EQ(p.observation_dim(), 19);
    p.lateral_range = 2;
    EXPECT_EQ(p.max_observable(), 10);
    EXPECT_EQ(p.observation_dim(), 1 + 20 + 10);
}

TEST(Config, JsonRoundTrip) {
    ExperimentConfig c;
    c.scenario = ScenarioConfig::defaults(ScenarioKind::LaneReduction);
    c.scenario.seed = 123456789012345ULL;
    c.train.hidden = {32, 16};
    const ExperimentConfig back = parse_experiment_config(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(back.scenario.seed, c.scenario.seed);
    ASSERT_TRUE(back.scenario.bottleneck.has_value());
    EXPECT_EQ(back.scenario.bottleneck->lanes, 3);
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(parse_experiment_config(R"({"scenario": {"scenario": "highway", "lanes": 3}})"), ConfigError);
    EXPECT_THROW(parse_experiment_config(R"({"bogus": 1})"), ConfigError);
    EXPECT_THROW(parse_scenario_config(R"({"scenario": "highway", "colour": "red"})"), ConfigError);
}

TEST(Config, InvariantsRejected) {
    auto bad = [](auto mutate) {
        ExperimentConfig c;
        mutate(c);
        return c;
    };
    EXPECT_THROW(bad([](auto& c) { c.scenario.class_speeds = {10, 20, 20, 25, 30}; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.reward.eta = {1, 1, 1, 50, 40}; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.reward.eta[1] = -0.1; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.reward.v_limit = c.reward.v_star; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.reward.a_min = 0.5; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.perception.longitudinal_range = 0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.perception.lateral_range = -1; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.dynamics.idm_delta = 0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.dynamics.lc_cooldown = -1; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.train.gamma = 1.0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.train.tau = 0.0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.train.actor_lr = 0.0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) {
                     c.scenario = ScenarioConfig::defaults(ScenarioKind::LaneReduction);
                     c.scenario.bottleneck->lanes = 4;
                 }).validate(),
                 ConfigError);
    EXPECT_THROW(bad([](auto& c) {
                     c.scenario = ScenarioConfig::defaults(ScenarioKind::LaneReduction);
                     c.scenario.bottleneck->end = c.scenario.road_length + 1;
                 }).validate(),
                 ConfigError);
}

TEST(Config, NgsimDerivedDefaults) {
    const ScenarioConfig h = ScenarioConfig::defaults(ScenarioKind::Highway);
    EXPECT_NEAR(h.road_length, 669.16, 0.01);
    EXPECT_NEAR(h.vehicle_length, 4.45, 0.001);
    EXPECT_EQ(h.vehicle_count, 117);
    RewardWeights w;
    EXPECT_EQ(*std::max_element(w.eta.begin(), w.eta.end()), w.eta[4]);
}

TEST(Stats, Type7Quartiles) {
    const std::vector<double> v{1, 2, 3, 4};
    const Quartiles q = iqr_summary(v);
    EXPECT_DOUBLE_EQ(q.q1, 1.75);
    EXPECT_DOUBLE_EQ(q.q2, 2.5);
    EXPECT_DOUBLE_EQ(q.q3, 3.25);
    const std::vector<double> c(9, 3.5);
    const Quartiles qc = iqr_summary(c);
    EXPECT_DOUBLE_EQ(qc.q1, 3.5);
    EXPECT_DOUBLE_EQ(qc.q2, 3.5);
    EXPECT_DOUBLE_EQ(qc.q3, 3.5);
    EXPECT_THROW(iqr_summary(std::vector<double>{}), ContractError);
}

TEST(Stats, MedianRobustToOutlier) {
    std::vector<double> v;
    Rng r(3, "stats");
    for (int i = 0; i < 100; ++i) v.push_back(r.uniform());
    const double before = iqr_summary(v).q2;
    v.push_back(1e9);
    const double after = iqr_summary(v).q2;
    EXPECT_LT(std::abs(after - before), 1e9);
    EXPECT_LT(std::abs(after - before), 0.05);
}

TEST(Stats, MeanAndStddev) {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    EXPECT_DOUBLE_EQ(mean(v), 5.0);
    EXPECT_NEAR(sample_stddev(v), std::sqrt(32.0 / 7.0), 1e-12);
    EXPECT_DOUBLE_EQ(sample_stddev(std::vector<double>{1.0}), 0.0);
}
