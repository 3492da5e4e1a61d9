#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "offdrive/error.hpp"
#include "offdrive/ngsim.hpp"
#include "offdrive/observation.hpp"

using namespace offdrive;
using namespace offdrive::ngsim;

namespace {

const char* kHeader = "Vehicle_ID,Frame_ID,Total_Frames,Global_Time,Local_X,Local_Y,v_Length,v_Vel,Lane_ID,Preceding,Following\n";

std::string row(int vid, long frame, double y, int lane, double vel, double len = 14.6) {
    std::ostringstream s;
    s << vid << ',' << frame << ",0,0,0," << y << ',' << len << ',' << vel << ',' << lane << ",0,0\n";
    return s.str();
}

VehicleTrajectory ramp(int vid, int frames, double step_ft, double start = 0.0, int lane = 2) {
    VehicleTrajectory t;
    t.vehicle_id = vid;
    for (int f = 0; f < frames; ++f) {
        TrajectoryRow r;
        r.vehicle_id = vid;
        r.frame_id = 100 + f;
        r.local_y = start + step_ft * f;
        r.lane_id = lane;
        r.v_vel = step_ft * 10.0;
        r.v_length = 14.6;
        t.rows.push_back(r);
    }
    return t;
}

}  // namespace

TEST(Parse, HeaderOnly) {
    std::istringstream in(kHeader);
    const ParsedTrajectories p = parse_trajectories(in);
    EXPECT_TRUE(p.vehicles.empty());
    EXPECT_EQ(p.rows, 0u);
}

TEST(Parse, SortsFramesAndGroupsVehicles) {
    std::istringstream in(std::string(kHeader) + row(7, 12, 30, 2, 10) + row(3, 5, 1, 1, 5) + row(7, 10, 10, 2, 10) +
                          row(7, 11, 20, 2, 10));
    const ParsedTrajectories p = parse_trajectories(in);
    ASSERT_EQ(p.vehicles.size(), 2u);
    EXPECT_EQ(p.vehicles[0].vehicle_id, 3);
    ASSERT_EQ(p.vehicles[1].rows.size(), 3u);
    EXPECT_EQ(p.vehicles[1].rows[0].frame_id, 10);
    EXPECT_EQ(p.vehicles[1].rows[2].frame_id, 12);
    EXPECT_DOUBLE_EQ(p.vehicles[1].rows[2].local_y, 30.0);
}

TEST(Parse, CaseInsensitiveAnyOrder) {
    std::istringstream in("lane_id,local_y,VEHICLE_ID,frame_id,V_VEL,v_length,preceding,following\n2,55.5,9,1,33,15,0,0\n");
    const ParsedTrajectories p = parse_trajectories(in);
    ASSERT_EQ(p.vehicles.size(), 1u);
    EXPECT_EQ(p.vehicles[0].rows[0].lane_id, 2);
    EXPECT_DOUBLE_EQ(p.vehicles[0].rows[0].local_y, 55.5);
}

TEST(Parse, MalformedRowsCounted) {
    std::istringstream in(std::string(kHeader) + row(1, 1, 1, 1, 1) + "1,2,0,0,0,abc,14,10,1,0,0\n" + "1,3\n" +
                          row(1, 4, 1, 0, 1));
    const ParsedTrajectories p = parse_trajectories(in);
    EXPECT_EQ(p.rows, 4u);
    EXPECT_EQ(p.malformed_rows, 3u);
    EXPECT_EQ(p.vehicles.at(0).rows.size(), 1u);
}

TEST(Parse, MissingColumnRejected) {
    std::istringstream in("Vehicle_ID,Frame_ID,Local_Y\n1,1,1\n");
    EXPECT_THROW(parse_trajectories(in), DataError);
    std::istringstream empty("");
    EXPECT_THROW(parse_trajectories(empty), DataError);
}

TEST(Correct, ConstantPositionHasZeroVelocity) {
    CorrectionReport rep;
    const auto segs = correct_errors(ramp(1, 20, 0.0, 500.0), CorrectionOptions{}, rep);
    ASSERT_EQ(segs.size(), 1u);
    for (double v : segs[0].velocity) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Correct, LinearRampRecoversVelocity) {
    CorrectionReport rep;
    const auto segs = correct_errors(ramp(1, 30, 10.0), CorrectionOptions{}, rep);
    ASSERT_EQ(segs.size(), 1u);
    const auto& v = segs[0].velocity;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) EXPECT_NEAR(v[i], 100.0, 1e-9) << i;
}

TEST(Correct, SmoothingRemovesJitter) {
    VehicleTrajectory t = ramp(1, 40, 5.0);
    for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i].local_y += (i % 2 ? 0.4 : -0.4);
    CorrectionReport rep;
    const auto segs = correct_errors(t, CorrectionOptions{}, rep);
    const auto& v = segs.at(0).velocity;
    for (std::size_t i = 3; i + 3 < v.size(); ++i) EXPECT_NEAR(v[i], 50.0, 2.0);
}

TEST(Correct, DuplicateFrameDropped) {
    VehicleTrajectory t = ramp(2, 10, 3.0);
    t.rows.insert(t.rows.begin() + 4, t.rows[4]);
    CorrectionReport rep;
    const auto segs = correct_errors(t, CorrectionOptions{}, rep);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].size(), 10u);
    EXPECT_EQ(rep.duplicate_frames, 1u);
}

TEST(Correct, GapSplitsAndShortRunsDiscarded) {
    VehicleTrajectory t = ramp(3, 20, 3.0);
    for (std::size_t i = 10; i < t.rows.size(); ++i) t.rows[i].frame_id += 5;  // gap after frame 10
    t.rows.resize(12);                                                          // second run: 2 frames
    CorrectionReport rep;
    const auto segs = correct_errors(t, CorrectionOptions{}, rep);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].size(), 10u);
    ASSERT_EQ(rep.discarded.size(), 1u);
    EXPECT_EQ(rep.discarded[0].frames, 2u);
}

TEST(Correct, VelocityNeverNegative) {
    VehicleTrajectory t = ramp(4, 15, -2.0, 300.0);
    CorrectionReport rep;
    const std::vector<Segment> segs = correct_errors(t, CorrectionOptions{}, rep);
    ASSERT_FALSE(segs.empty());
    for (double v : segs[0].velocity) EXPECT_GE(v, 0.0);
}

TEST(Metric, FeetToMetres) {
    Segment s;
    s.frames = {1, 2};
    s.position = {100.0, 110.0};
    s.velocity = {100.0, 100.0};
    s.lane = {1, 1};
    s.length = 14.6;
    const Segment m = to_metric(s);
    EXPECT_DOUBLE_EQ(m.position[1], 110.0 * 0.3048);
    EXPECT_DOUBLE_EQ(m.velocity[0], 30.48);
    EXPECT_NEAR(m.length, 4.45, 0.001);
}

TEST(Consistency, RampIsFullyConsistent) {
    CorrectionReport rep;
    std::vector<Segment> segs;
    for (auto& s : correct_errors(ramp(1, 50, 6.0), CorrectionOptions{}, rep)) segs.push_back(to_metric(s));
    EXPECT_DOUBLE_EQ(consistency_fraction(segs, 0.1, 0.5), 1.0);
}

TEST(Lanes, Orientation) {
    ReconstructionOptions o;
    o.lane_count = 5;
    EXPECT_EQ(to_pomdp_lane(1, o), 5);
    EXPECT_EQ(to_pomdp_lane(5, o), 1);
    o.flip_orientation = true;
    EXPECT_EQ(to_pomdp_lane(1, o), 1);
}

namespace {

std::vector<Segment> metric_segments(const std::vector<VehicleTrajectory>& ts) {
    CorrectionReport rep;
    std::vector<Segment> out;
    for (const auto& t : ts)
        for (auto& s : correct_errors(t, CorrectionOptions{}, rep)) out.push_back(to_metric(s));
    return out;
}

}  // namespace

TEST(Reconstruct, LoneCruiserEarnsEtaOne) {
    RewardWeights w;
    w.v_star = 25.0;
    w.c = 0.25;
    const double step_ft = w.v_star / 0.3048 / 10.0;  // v* in ft per frame
    const auto segs = metric_segments({ramp(1, 30, step_ft)});
    ReconstructionReport rep;
    const Dataset d = reconstruct_transitions(segs, PerceptionParams{}, w, ReconstructionOptions{}, rep);
    ASSERT_EQ(d.size(), 29u);
    // Interior frames have exact v* velocity; the ends use one-sided differences on a
    // shrinking window, also exact for a ramp.
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_NEAR(d.reward(i), w.eta[0] + w.c, 1e-4) << i;
        EXPECT_NEAR(d.action(i)[0], 0.0, 1e-3);
        EXPECT_EQ(d.action(i)[1], 0.0f);
    }
    EXPECT_EQ(d.done(d.size() - 1), DoneFlag::Truncated);
    EXPECT_EQ(d.obs_dim(), 19);
}

TEST(Reconstruct, LaneDecreaseIsLeftMove) {
    VehicleTrajectory t = ramp(1, 10, 8.0, 0.0, 3);
    for (std::size_t i = 5; i < t.rows.size(); ++i) t.rows[i].lane_id = 2;
    ReconstructionReport rep;
    const Dataset d = reconstruct_transitions(metric_segments({t}), PerceptionParams{}, RewardWeights{},
                                              ReconstructionOptions{}, rep);
    int moves = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.action(i)[1] != 0.0f) {
            EXPECT_EQ(d.action(i)[1], 1.0f);
            ++moves;
        }
    EXPECT_EQ(moves, 1);
    ReconstructionOptions flipped;
    flipped.flip_orientation = true;
    const Dataset f = reconstruct_transitions(metric_segments({t}), PerceptionParams{}, RewardWeights{}, flipped, rep);
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f.action(i)[1] != 0.0f) EXPECT_EQ(f.action(i)[1], -1.0f);
}

TEST(Reconstruct, NoSuccessorNoTransition) {
    Segment s;
    s.vehicle_id = 1;
    s.frames = {5};
    s.position = {10.0};
    s.velocity = {3.0};
    s.lane = {2};
    s.length = 4.45;
    ReconstructionReport rep;
    EXPECT_EQ(reconstruct_transitions({s}, PerceptionParams{}, RewardWeights{}, ReconstructionOptions{}, rep).size(), 0u);
}

TEST(Reconstruct, AccelClippedAndCounted) {
    VehicleTrajectory t = ramp(1, 12, 5.0);
    for (std::size_t i = 6; i < t.rows.size(); ++i) t.rows[i].local_y += 30.0 * (i - 5);  // violent surge
    ReconstructionReport rep;
    RewardWeights w;
    const Dataset d = reconstruct_transitions(metric_segments({t}), PerceptionParams{}, w, ReconstructionOptions{}, rep);
    EXPECT_GT(rep.accel_clipped, 0u);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_GE(d.action(i)[0], w.a_min);
        EXPECT_LE(d.action(i)[0], w.a_max);
    }
}

TEST(Reconstruct, NeighbourSeenInObservation) {
    // Vehicle 2 drives 20 ft ahead of vehicle 1 in the same lane at the same speed.
    const auto segs = metric_segments({ramp(1, 10, 8.0, 100.0), ramp(2, 10, 8.0, 100.0 + 14.6 + 20.0)});
    ReconstructionReport rep;
    const Dataset d = reconstruct_transitions(segs, PerceptionParams{}, RewardWeights{}, ReconstructionOptions{}, rep);
    bool seen = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto o = d.obs(i);
        // rel_gaps start at index 7; the same-lane leader slot is 7 + 1.
        if (std::abs(o[8] - 20.0 * 0.3048) < 0.05) seen = true;
    }
    EXPECT_TRUE(seen);
}

TEST(Ingest, ReportAndDeterminism) {
    std::string csv = kHeader;
    for (int f = 0; f < 40; ++f) {
        csv += row(1, 1000 + f, 50 + 6.0 * f, 2, 60);
        csv += row(2, 1000 + f, 120 + 7.0 * f, 3, 70);
        csv += row(3, 1000 + f, 200 + 5.0 * f, 7, 50);  // auxiliary lane
    }
    std::istringstream in1(csv), in2(csv);
    ExperimentConfig cfg;
    const IngestResult a = ingest(parse_trajectories(in1), cfg, IngestOptions{});
    const IngestResult b = ingest(parse_trajectories(in2), cfg, IngestOptions{});
    EXPECT_TRUE(a.dataset.data == b.dataset.data);
    EXPECT_EQ(a.dataset.meta.flavor, "ngsim");
    EXPECT_EQ(a.dataset.meta.scenario, "highway");
    EXPECT_EQ(a.dataset.data.size(), 78u);
    const auto rep = nlohmann::json::parse(a.report_json);
    EXPECT_EQ(rep.at("rows_total").get<int>(), 120);
    EXPECT_EQ(rep.at("rows_aux_lane_dropped").get<int>(), 40);
    EXPECT_NEAR(rep.at("extent").at("max_local_y_ft").get<double>(), 200 + 5.0 * 39, 1e-9);
    EXPECT_DOUBLE_EQ(a.max_local_y_ft, 200 + 5.0 * 39);
    EXPECT_GE(a.consistency, 0.99);
}
