#include "offdrive/ngsim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string_view>

#include <json.hpp>

#include "offdrive/error.hpp"
#include "offdrive/observation.hpp"
#include "offdrive/reward.hpp"
#include "offdrive/stats.hpp"

namespace offdrive::ngsim {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

void split(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    if constexpr (std::is_integral_v<T>) {
        // Integer columns are sometimes written as "12.0".
        double d = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(d) || d != std::floor(d)) return false;
        out = static_cast<T>(d);
        return true;
    } else {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
    }
}

struct Columns {
    std::size_t vehicle_id, frame_id, local_y, lane_id, v_vel, v_length, preceding, following;
    std::size_t max_index() const {
        return std::max({vehicle_id, frame_id, local_y, lane_id, v_vel, v_length, preceding, following});
    }
};

Columns resolve_header(const std::vector<std::string_view>& header) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index.emplace(lower(header[i]), i);
    auto find = [&](std::initializer_list<const char*> names) -> std::size_t {
        for (const char* n : names)
            if (auto it = index.find(n); it != index.end()) return it->second;
        throw DataError(std::string("NGSIM trajectory file is missing mandatory column ") + *names.begin());
    };
    return Columns{find({"vehicle_id"}),   find({"frame_id"}), find({"local_y"}),
                   find({"lane_id"}),      find({"v_vel"}),    find({"v_length"}),
                   find({"preceding", "preceeding", "preceding_id"}),
                   find({"following", "following_id"})};
}

}  // namespace

ParsedTrajectories parse_trajectories(std::istream& in) {
    std::string line;
    std::vector<std::string_view> fields;
    do {
        if (!std::getline(in, line)) throw DataError("NGSIM trajectory file is empty (no header)");
    } while (trim(line).empty());
    split(line, fields);
    const Columns cols = resolve_header(fields);

    ParsedTrajectories out;
    std::map<int, std::vector<TrajectoryRow>> by_vehicle;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++out.rows;
        split(line, fields);
        TrajectoryRow r;
        const bool ok = fields.size() > cols.max_index() && parse_number(fields[cols.vehicle_id], r.vehicle_id) &&
                        parse_number(fields[cols.frame_id], r.frame_id) &&
                        parse_number(fields[cols.local_y], r.local_y) &&
                        parse_number(fields[cols.lane_id], r.lane_id) && parse_number(fields[cols.v_vel], r.v_vel) &&
                        parse_number(fields[cols.v_length], r.v_length) &&
                        parse_number(fields[cols.preceding], r.preceding_id) &&
                        parse_number(fields[cols.following], r.following_id) && r.lane_id > 0 && r.v_length > 0.0;
        if (!ok) {
            ++out.malformed_rows;
            continue;
        }
        by_vehicle[r.vehicle_id].push_back(r);
    }
    if (in.bad()) throw DataError("I/O error while reading NGSIM trajectories");
    out.vehicles.reserve(by_vehicle.size());
    for (auto& [id, rows] : by_vehicle) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const TrajectoryRow& a, const TrajectoryRow& b) { return a.frame_id < b.frame_id; });
        out.vehicles.push_back(VehicleTrajectory{id, std::move(rows)});
    }
    return out;
}

ParsedTrajectories parse_trajectories(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open NGSIM trajectory file " + path.string());
    return parse_trajectories(in);
}

std::vector<Segment> correct_errors(const VehicleTrajectory& trajectory, const CorrectionOptions& options,
                                    CorrectionReport& report) {
    std::vector<Segment> out;
    std::vector<const TrajectoryRow*> run;
    const int half = std::max(0, options.smoothing_window / 2);

    auto flush = [&]() {
        if (run.empty()) return;
        if (run.size() < 3) {
            report.discarded.push_back({trajectory.vehicle_id, run.front()->frame_id, run.size()});
            run.clear();
            return;
        }
        const std::size_t n = run.size();
        Segment s;
        s.vehicle_id = trajectory.vehicle_id;
        s.frames.reserve(n);
        s.lane.reserve(n);
        std::vector<double> raw(n);
        std::vector<double> lengths(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.frames.push_back(run[i]->frame_id);
            s.lane.push_back(run[i]->lane_id);
            raw[i] = run[i]->local_y;
            lengths[i] = run[i]->v_length;
        }
        s.length = quantile(lengths, 0.5);
        // Symmetric window that shrinks at the ends, so linear motion is preserved exactly.
        s.position.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = std::min({static_cast<std::size_t>(half), i, n - 1 - i});
            double sum = 0.0;
            for (std::size_t j = i - k; j <= i + k; ++j) sum += raw[j];
            s.position[i] = sum / static_cast<double>(2 * k + 1);
        }
        s.velocity.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v;
            if (i == 0)
                v = (s.position[1] - s.position[0]) / options.dt;
            else if (i == n - 1)
                v = (s.position[n - 1] - s.position[n - 2]) / options.dt;
            else
                v = (s.position[i + 1] - s.position[i - 1]) / (2.0 * options.dt);
            s.velocity[i] = std::max(0.0, v);
        }
        ++report.segments;
        out.push_back(std::move(s));
        run.clear();
    };

    for (const TrajectoryRow& r : trajectory.rows) {
        if (!run.empty()) {
            const std::int64_t last = run.back()->frame_id;
            if (r.frame_id == last) {
                ++report.duplicate_frames;
                continue;
            }
            if (r.frame_id != last + 1) flush();
        }
        run.push_back(&r);
    }
    flush();
    return out;
}

Segment to_metric(Segment s) {
    for (double& p : s.position) p *= kFeetToMeters;
    for (double& v : s.velocity) v *= kFeetToMeters;
    s.length *= kFeetToMeters;
    return s;
}

double consistency_fraction(const std::vector<Segment>& segments, double dt, double tolerance) {
    std::size_t ok = 0, total = 0;
    for (const Segment& s : segments)
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            ++total;
            if (std::abs((s.position[i + 1] - s.position[i]) - s.velocity[i] * dt) <= tolerance) ++ok;
        }
    return total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
}

int to_pomdp_lane(int ngsim_lane, const ReconstructionOptions& options) {
    return options.flip_orientation ? ngsim_lane : options.lane_count + 1 - ngsim_lane;
}

Dataset reconstruct_transitions(const std::vector<Segment>& segments, const PerceptionParams& perception,
                                const RewardWeights& weights, const ReconstructionOptions& options,
                                ReconstructionReport& report) {
    Dataset out(perception.observation_dim());
    if (segments.empty()) return out;

    struct Entry {
        std::int64_t frame;
        int vehicle_id;
        std::size_t segment;
        std::size_t index;
    };
    std::vector<Entry> entries;
    double max_pos = 0.0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        for (std::size_t i = 0; i < segments[s].size(); ++i) {
            entries.push_back({segments[s].frames[i], segments[s].vehicle_id, s, i});
            max_pos = std::max(max_pos, segments[s].position[i]);
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.vehicle_id < b.vehicle_id;
    });
    const RoadGeometry road(max_pos + 2.0 * perception.longitudinal_range + 1.0, options.lane_count, std::nullopt,
                            false);

    struct Snapshot {
        std::int64_t frame = 0;
        WorldState world;
        std::vector<std::pair<std::size_t, std::size_t>> source;  // (segment, index) per vehicle
    };
    auto build = [&](std::size_t begin, std::size_t end) {
        Snapshot snap;
        snap.frame = entries[begin].frame;
        snap.world.road = road;
        snap.world.time_step = snap.frame;
        for (std::size_t k = begin; k < end; ++k) {
            const Entry& e = entries[k];
            if (!snap.world.vehicles.empty() && snap.world.vehicles.back().id == e.vehicle_id) continue;
            const Segment& seg = segments[e.segment];
            VehicleState v;
            v.id = e.vehicle_id;
            v.velocity = seg.velocity[e.index];
            v.position = seg.position[e.index];
            v.lane = to_pomdp_lane(seg.lane[e.index], options);
            v.length = seg.length;
            v.kind = VehicleKind::Class1;
            snap.world.vehicles.push_back(v);
            snap.source.emplace_back(e.segment, e.index);
        }
        return snap;
    };

    std::size_t begin = 0;
    auto next_range = [&](std::size_t from) {
        std::size_t to = from;
        while (to < entries.size() && entries[to].frame == entries[from].frame) ++to;
        return to;
    };
    std::size_t end = next_range(begin);
    Snapshot current = build(begin, end);
    while (end < entries.size()) {
        const std::size_t nbegin = end;
        const std::size_t nend = next_range(nbegin);
        Snapshot next = build(nbegin, nend);
        if (next.frame == current.frame + 1) {
            for (std::size_t k = 0; k < current.world.vehicles.size(); ++k) {
                const auto [seg_idx, i] = current.source[k];
                const Segment& seg = segments[seg_idx];
                if (i + 1 >= seg.size()) continue;
                const VehicleState* after = next.world.find(seg.vehicle_id);
                if (!after) continue;
                const VehicleState& before = current.world.vehicles[k];

                double accel = (after->velocity - before.velocity) / options.dt;
                if (accel < weights.a_min || accel > weights.a_max) ++report.accel_clipped;
                accel = std::clamp(accel, weights.a_min, weights.a_max);
                const int dl = after->lane - before.lane;
                if (std::abs(dl) > 1) ++report.lane_jumps_clipped;
                Action action{accel, (dl > 0) - (dl < 0)};

                const RewardBreakdown r = reward(current.world, action, next.world, seg.vehicle_id, weights, perception);
                const auto o = observe(current.world, seg.vehicle_id, perception, weights.s0).to_vector();
                const auto o2 = observe(next.world, seg.vehicle_id, perception, weights.s0).to_vector();
                const DoneFlag done = (i + 2 == seg.size()) ? DoneFlag::Truncated : DoneFlag::None;
                out.push(o, {static_cast<float>(action.accel), static_cast<float>(action.lane_change)},
                         static_cast<float>(r.total), o2, done);
                ++report.transitions;
            }
        }
        current = std::move(next);
        end = nend;
    }
    return out;
}

IngestResult ingest(const ParsedTrajectories& parsed, const ExperimentConfig& config, const IngestOptions& options) {
    using nlohmann::json;
    std::size_t aux_dropped = 0;
    double min_y = std::numeric_limits<double>::infinity(), max_y = -min_y;
    std::vector<double> lengths_ft, q3_speeds_ft;
    std::map<std::int64_t, std::size_t> per_frame;
    CorrectionReport corr;
    std::vector<Segment> metric;

    for (const VehicleTrajectory& vt : parsed.vehicles) {
        VehicleTrajectory mainline{vt.vehicle_id, {}};
        std::vector<double> speeds;
        for (const TrajectoryRow& r : vt.rows) {
            min_y = std::min(min_y, r.local_y);
            max_y = std::max(max_y, r.local_y);
            speeds.push_back(r.v_vel);
            ++per_frame[r.frame_id];
            if (r.lane_id > options.max_mainline_lane) {
                ++aux_dropped;
                continue;
            }
            mainline.rows.push_back(r);
        }
        if (!vt.rows.empty()) {
            lengths_ft.push_back(vt.rows.front().v_length);
            q3_speeds_ft.push_back(quantile(speeds, 0.75));
        }
        for (Segment& s : correct_errors(mainline, options.correction, corr)) metric.push_back(to_metric(std::move(s)));
    }

    ReconstructionReport rec;
    ReconstructionOptions ropt = options.reconstruction;
    ropt.dt = options.correction.dt;
    ropt.lane_count = options.max_mainline_lane;
    IngestResult result;
    result.dataset.data = reconstruct_transitions(metric, config.perception, config.reward, ropt, rec);
    result.consistency = consistency_fraction(metric, options.correction.dt, options.consistency_tolerance);
    result.max_local_y_ft = parsed.rows > parsed.malformed_rows ? max_y : 0.0;

    DatasetMeta& meta = result.dataset.meta;
    meta.scenario = "highway";
    meta.flavor = "ngsim";
    meta.obs_dim = config.perception.observation_dim();
    meta.transition_count = result.dataset.data.size();
    meta.seed = config.scenario.seed;
    meta.normalization = compute_normalization(result.dataset.data);
    meta.source_policy = "ngsim-us101";

    json report;
    report["rows_total"] = parsed.rows;
    report["rows_malformed"] = parsed.malformed_rows;
    report["rows_aux_lane_dropped"] = aux_dropped;
    report["duplicate_frames_dropped"] = corr.duplicate_frames;
    report["vehicles"] = parsed.vehicles.size();
    report["segments"] = corr.segments;
    report["segments_discarded"] = corr.discarded.size();
    json discarded = json::array();
    for (std::size_t i = 0; i < corr.discarded.size() && i < 1000; ++i)
        discarded.push_back({{"vehicle_id", corr.discarded[i].vehicle_id},
                             {"first_frame", corr.discarded[i].first_frame},
                             {"frames", corr.discarded[i].frames}});
    report["discarded"] = discarded;
    report["transitions"] = rec.transitions;
    report["accel_clip_rate"] = rec.transitions ? static_cast<double>(rec.accel_clipped) / rec.transitions : 0.0;
    report["lane_jumps_clipped"] = rec.lane_jumps_clipped;
    report["consistency"] = {{"tolerance_m", options.consistency_tolerance}, {"fraction_ok", result.consistency}};
    if (!lengths_ft.empty()) {
        report["extent"] = {{"min_local_y_ft", min_y},
                            {"max_local_y_ft", max_y},
                            {"longitudinal_extent_ft", max_y - min_y}};
        report["mean_vehicle_length_ft"] = mean(lengths_ft);
        std::vector<double> counts;
        for (const auto& [f, c] : per_frame) counts.push_back(static_cast<double>(c));
        report["vehicles_per_frame"] = {{"mean", mean(counts)},
                                        {"max", *std::max_element(counts.begin(), counts.end())}};
        const std::array<double, 5> qs{0.0, 0.25, 0.5, 0.75, 1.0};
        json q3 = json::array(), classes = json::array();
        for (double q : qs) {
            const double v = quantile(q3_speeds_ft, q);
            q3.push_back(v);
            classes.push_back(v * kFeetToMeters);
        }
        report["q3_velocity_ft_s"] = {{"min", q3[0]}, {"q1", q3[1]}, {"q2", q3[2]}, {"q3", q3[3]}, {"max", q3[4]}};
        report["suggested_class_speeds_m_s"] = classes;
    }
    result.report_json = report.dump(2);
    return result;
}

IngestResult ingest(const std::filesystem::path& csv, const ExperimentConfig& config, const IngestOptions& options) {
    return ingest(parse_trajectories(csv), config, options);
}

}  // namespace offdrive::ngsim
