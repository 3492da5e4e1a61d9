#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "offdrive/config.hpp"
#include "offdrive/dataset.hpp"

namespace offdrive::ngsim {

// One row of the public NGSIM trajectory table (feet, ft/s, 10 Hz frames).
struct TrajectoryRow {
    int vehicle_id = 0;
    std::int64_t frame_id = 0;
    double local_y = 0.0;
    int lane_id = 0;
    double v_vel = 0.0;
    double v_length = 0.0;
    int preceding_id = 0;
    int following_id = 0;
};

struct VehicleTrajectory {
    int vehicle_id = 0;
    std::vector<TrajectoryRow> rows;  // ascending frame_id
};

struct ParsedTrajectories {
    std::vector<VehicleTrajectory> vehicles;  // ascending vehicle_id
    std::size_t rows = 0;
    std::size_t malformed_rows = 0;
};

// CSV with a header naming at least Vehicle_ID, Frame_ID, Local_Y, Lane_ID, v_Vel,
// v_Length, Preceding and Following (case-insensitive, any column order).
ParsedTrajectories parse_trajectories(std::istream& in);
ParsedTrajectories parse_trajectories(const std::filesystem::path& path);

// Contiguous run of frames after cleaning. Units follow the input until converted.
struct Segment {
    int vehicle_id = 0;
    std::vector<std::int64_t> frames;
    std::vector<double> position;
    std::vector<double> velocity;
    std::vector<int> lane;
    double length = 0.0;

    std::size_t size() const { return frames.size(); }
};

struct DiscardedSegment {
    int vehicle_id = 0;
    std::int64_t first_frame = 0;
    std::size_t frames = 0;
};

struct CorrectionReport {
    std::size_t duplicate_frames = 0;
    std::size_t segments = 0;
    std::vector<DiscardedSegment> discarded;
};

struct CorrectionOptions {
    double dt = 0.1;        // s per frame
    int smoothing_window = 5;  // frames, centered
};

// Drops duplicate frames, splits at frame gaps, discards runs shorter than 3 frames,
// smooths positions with a centered moving average and recomputes velocity by
// finite differences of the smoothed positions (clamped at 0).
std::vector<Segment> correct_errors(const VehicleTrajectory& trajectory, const CorrectionOptions& options,
                                    CorrectionReport& report);

Segment to_metric(Segment segment);

// Fraction of consecutive frame pairs with |dp - v dt| <= tolerance.
double consistency_fraction(const std::vector<Segment>& segments, double dt, double tolerance);

struct ReconstructionOptions {
    double dt = 0.1;
    int lane_count = 5;         // mainline lanes
    bool flip_orientation = false;  // false: NGSIM lane 1 (leftmost) becomes the highest index
};

struct ReconstructionReport {
    std::size_t transitions = 0;
    std::size_t accel_clipped = 0;
    std::size_t lane_jumps_clipped = 0;
};

int to_pomdp_lane(int ngsim_lane, const ReconstructionOptions& options);

// Metric segments in, POMDP-aligned transitions out (ordered by frame, then vehicle id).
Dataset reconstruct_transitions(const std::vector<Segment>& segments, const PerceptionParams& perception,
                                const RewardWeights& weights, const ReconstructionOptions& options,
                                ReconstructionReport& report);

struct IngestOptions {
    CorrectionOptions correction;
    ReconstructionOptions reconstruction;
    int max_mainline_lane = 5;
    double consistency_tolerance = 0.5;  // m
};

struct IngestResult {
    LoadedDataset dataset;
    std::string report_json;
    double consistency = 0.0;
    double max_local_y_ft = 0.0;
};

IngestResult ingest(const ParsedTrajectories& parsed, const ExperimentConfig& config, const IngestOptions& options);
IngestResult ingest(const std::filesystem::path& csv, const ExperimentConfig& config, const IngestOptions& options);

}  // namespace offdrive::ngsim
