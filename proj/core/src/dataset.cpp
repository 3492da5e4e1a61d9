#include "offdrive/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "offdrive/error.hpp"
#include "offdrive/rng.hpp"

namespace offdrive {

using nlohmann::json;

namespace {

void put_f32(std::vector<char>& buf, float x) {
    const auto u = std::bit_cast<std::uint32_t>(x);
    for (int k = 0; k < 4; ++k) buf.push_back(static_cast<char>((u >> (8 * k)) & 0xFF));
}

float get_f32(const unsigned char* p) {
    const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(u);
}

json meta_to_json(const DatasetMeta& m) {
    json j;
    j["format"] = "ad4rl-transitions";
    j["version"] = 1;
    j["scenario"] = m.scenario;
    j["flavor"] = m.flavor;
    j["obs_dim"] = m.obs_dim;
    j["transition_count"] = m.transition_count;
    j["record_bytes"] = record_size(m.obs_dim);
    j["seed"] = m.seed;
    j["normalization"] = {{"mean", m.normalization.mean}, {"scale", m.normalization.scale}};
    j["source_policy"] = m.source_policy;
    j["behavior_return"] = m.behavior_return ? json(*m.behavior_return) : json(nullptr);
    j["episodes"] = m.episodes;
    return j;
}

DatasetMeta meta_from_json(const json& j) {
    try {
        if (j.value("format", std::string()) != "ad4rl-transitions") throw DataError("not a transition dataset");
        if (j.at("version").get<int>() != 1) throw DataError("unsupported dataset version");
        DatasetMeta m;
        m.scenario = j.at("scenario").get<std::string>();
        m.flavor = j.at("flavor").get<std::string>();
        m.obs_dim = j.at("obs_dim").get<int>();
        m.transition_count = j.at("transition_count").get<std::uint64_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.normalization.mean = j.at("normalization").at("mean").get<std::vector<double>>();
        m.normalization.scale = j.at("normalization").at("scale").get<std::vector<double>>();
        m.source_policy = j.at("source_policy").get<std::string>();
        if (j.contains("behavior_return") && !j.at("behavior_return").is_null())
            m.behavior_return = j.at("behavior_return").get<double>();
        m.episodes = j.value("episodes", std::uint64_t{0});
        if (m.obs_dim < 0) throw DataError("negative obs_dim");
        if (!is_known_flavor(m.flavor)) throw DataError("unknown dataset flavor '" + m.flavor + "'");
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed dataset metadata: ") + e.what());
    }
}

}  // namespace

Normalization Normalization::identity(int dim) {
    return Normalization{std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                         std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
}

bool is_known_flavor(const std::string& flavor) {
    return std::find(kFlavors.begin(), kFlavors.end(), flavor) != kFlavors.end();
}

namespace {

void check_lane(float lane) {
    if (lane != -1.0f && lane != 0.0f && lane != 1.0f)
        throw DataError("lane-change action must be -1, 0 or 1, got " + std::to_string(lane));
}

}  // namespace

void Dataset::reserve(std::size_t n) {
    const auto d = static_cast<std::size_t>(obs_dim_);
    obs_.reserve(n * d);
    next_obs_.reserve(n * d);
    actions_.reserve(2 * n);
    rewards_.reserve(n);
    done_.reserve(n);
}

void Dataset::push(std::span<const float> obs, std::array<float, 2> action, float reward,
                   std::span<const float> next_obs, DoneFlag done) {
    const auto d = static_cast<std::size_t>(obs_dim_);
    if (obs.size() != d || next_obs.size() != d)
        throw DataError("transition dimension " + std::to_string(obs.size()) + "/" + std::to_string(next_obs.size()) +
                        " does not match dataset dimension " + std::to_string(d));
    check_lane(action[1]);
    obs_.insert(obs_.end(), obs.begin(), obs.end());
    next_obs_.insert(next_obs_.end(), next_obs.begin(), next_obs.end());
    actions_.push_back(action[0]);
    actions_.push_back(action[1]);
    rewards_.push_back(reward);
    done_.push_back(static_cast<std::uint8_t>(done));
}

void Dataset::assign(std::size_t i, std::span<const float> obs, std::array<float, 2> action, float reward,
                     std::span<const float> next_obs, DoneFlag done) {
    const auto d = static_cast<std::size_t>(obs_dim_);
    if (i >= size()) throw ContractError("Dataset::assign: row out of range");
    if (obs.size() != d || next_obs.size() != d) throw DataError("transition dimension does not match dataset");
    std::copy(obs.begin(), obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(i * d));
    std::copy(next_obs.begin(), next_obs.end(), next_obs_.begin() + static_cast<std::ptrdiff_t>(i * d));
    actions_[2 * i] = action[0];
    actions_[2 * i + 1] = action[1];
    rewards_[i] = reward;
    done_[i] = static_cast<std::uint8_t>(done);
}

void Dataset::push(const Transition& t) { push(t.obs, t.action, t.reward, t.next_obs, t.done); }

std::span<const float> Dataset::obs(std::size_t i) const {
    const auto d = static_cast<std::size_t>(obs_dim_);
    return {obs_.data() + i * d, d};
}

std::span<const float> Dataset::next_obs(std::size_t i) const {
    const auto d = static_cast<std::size_t>(obs_dim_);
    return {next_obs_.data() + i * d, d};
}

Transition Dataset::at(std::size_t i) const {
    Transition t;
    const auto o = obs(i);
    const auto n = next_obs(i);
    t.obs.assign(o.begin(), o.end());
    t.next_obs.assign(n.begin(), n.end());
    t.action = action(i);
    t.reward = reward(i);
    t.done = done(i);
    return t;
}

DatasetPaths dataset_paths(const std::filesystem::path& any) {
    std::string s = any.string();
    for (const std::string suffix : {".meta.json", ".ad4rl"}) {
        if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
            s.resize(s.size() - suffix.size());
            break;
        }
    }
    return {s + ".ad4rl", s + ".meta.json"};
}

void write_dataset(const std::filesystem::path& name, const Dataset& data, DatasetMeta meta) {
    if (!is_known_flavor(meta.flavor)) throw DataError("unknown dataset flavor '" + meta.flavor + "'");
    if (meta.obs_dim != 0 && meta.obs_dim != data.obs_dim())
        throw DataError("dataset metadata obs_dim does not match the transitions");
    meta.obs_dim = data.obs_dim();
    meta.transition_count = data.size();
    const DatasetPaths paths = dataset_paths(name);
    if (paths.payload.has_parent_path()) std::filesystem::create_directories(paths.payload.parent_path());

    std::ofstream out(paths.payload, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + paths.payload.string());
    const std::size_t rec = record_size(data.obs_dim());
    std::vector<char> buf;
    constexpr std::size_t kChunk = 4096;
    buf.reserve(rec * kChunk);
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (float x : data.obs(i)) put_f32(buf, x);
        const auto a = data.action(i);
        put_f32(buf, a[0]);
        put_f32(buf, a[1]);
        put_f32(buf, data.reward(i));
        for (float x : data.next_obs(i)) put_f32(buf, x);
        buf.push_back(static_cast<char>(data.done(i)));
        if (buf.size() >= rec * kChunk) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("short write to " + paths.payload.string());

    std::ofstream mo(paths.meta, std::ios::trunc);
    if (!mo) throw DataError("cannot write " + paths.meta.string());
    mo << meta_to_json(meta).dump(2) << '\n';
}

DatasetMeta read_dataset_meta(const std::filesystem::path& name) {
    const DatasetPaths paths = dataset_paths(name);
    std::ifstream mi(paths.meta);
    if (!mi) throw DataError("cannot open dataset metadata " + paths.meta.string());
    json j;
    try {
        mi >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed dataset metadata " + paths.meta.string() + ": " + e.what());
    }
    return meta_from_json(j);
}

LoadedDataset read_dataset(const std::filesystem::path& name) {
    const DatasetPaths paths = dataset_paths(name);
    LoadedDataset out{read_dataset_meta(name), Dataset(0)};
    const int d = out.meta.obs_dim;
    out.data = Dataset(d);

    std::ifstream in(paths.payload, std::ios::binary);
    if (!in) throw DataError("cannot open dataset payload " + paths.payload.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t rec = record_size(d);
    if (bytes.size() % rec != 0)
        throw DataError("truncated dataset payload: " + std::to_string(bytes.size()) + " bytes is not a multiple of " +
                        std::to_string(rec));
    const std::size_t count = bytes.size() / rec;
    if (count != out.meta.transition_count)
        throw DataError("dataset metadata declares " + std::to_string(out.meta.transition_count) +
                        " transitions but the payload holds " + std::to_string(count));

    out.data.reserve(count);
    std::vector<float> o(static_cast<std::size_t>(d)), n(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned char* p = bytes.data() + i * rec;
        for (int k = 0; k < d; ++k, p += 4) o[static_cast<std::size_t>(k)] = get_f32(p);
        const float a0 = get_f32(p);
        const float a1 = get_f32(p + 4);
        const float r = get_f32(p + 8);
        p += 12;
        for (int k = 0; k < d; ++k, p += 4) n[static_cast<std::size_t>(k)] = get_f32(p);
        const std::uint8_t done = *p;
        if (done > 2) throw DataError("corrupt done flag in record " + std::to_string(i));
        out.data.push(o, {a0, a1}, r, n, static_cast<DoneFlag>(done));
    }
    return out;
}

Normalization compute_normalization(const Dataset& data) {
    const auto d = static_cast<std::size_t>(data.obs_dim());
    Normalization norm = Normalization::identity(data.obs_dim());
    if (data.empty()) return norm;
    std::vector<double> sum(d, 0.0), sq(d, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto o = data.obs(i);
        for (std::size_t k = 0; k < d; ++k) sum[k] += o[k];
    }
    const double n = static_cast<double>(data.size());
    for (std::size_t k = 0; k < d; ++k) norm.mean[k] = sum[k] / n;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto o = data.obs(i);
        for (std::size_t k = 0; k < d; ++k) {
            const double c = o[k] - norm.mean[k];
            sq[k] += c * c;
        }
    }
    for (std::size_t k = 0; k < d; ++k) {
        const double sd = std::sqrt(sq[k] / n);
        norm.scale[k] = sd > 1e-6 ? sd : 1.0;
    }
    return norm;
}

LoadedDataset mix_datasets(const LoadedDataset& a, const LoadedDataset& b, std::uint64_t seed) {
    if (a.meta.obs_dim != b.meta.obs_dim || a.data.obs_dim() != b.data.obs_dim())
        throw DataError("mix_datasets: observation dimensions differ");
    if (a.meta.scenario != b.meta.scenario) throw DataError("mix_datasets: scenarios differ");
    const std::string flavor = a.meta.flavor == b.meta.flavor ? a.meta.flavor : a.meta.flavor + "-" + b.meta.flavor;
    if (!is_known_flavor(flavor)) throw DataError("mix_datasets: '" + flavor + "' is not a dataset flavor");

    const std::size_t half = std::min(a.data.size(), b.data.size()) / 2;
    Rng rng(seed, "mix");
    auto pick = [&](std::size_t n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        idx.resize(half);
        return idx;
    };
    const auto ia = pick(a.data.size());
    const auto ib = pick(b.data.size());
    std::vector<std::pair<int, std::size_t>> rows;
    rows.reserve(2 * half);
    for (std::size_t i : ia) rows.emplace_back(0, i);
    for (std::size_t i : ib) rows.emplace_back(1, i);
    std::shuffle(rows.begin(), rows.end(), rng.engine());

    LoadedDataset out{a.meta, Dataset(a.data.obs_dim())};
    out.data.reserve(rows.size());
    for (const auto& [src, i] : rows) {
        const Dataset& d = src == 0 ? a.data : b.data;
        out.data.push(d.obs(i), d.action(i), d.reward(i), d.next_obs(i), d.done(i));
    }
    out.meta.flavor = flavor;
    out.meta.seed = seed;
    out.meta.source_policy = a.meta.source_policy + "+" + b.meta.source_policy;
    out.meta.transition_count = out.data.size();
    out.meta.normalization = compute_normalization(out.data);
    if (a.meta.behavior_return && b.meta.behavior_return)
        out.meta.behavior_return = 0.5 * (*a.meta.behavior_return + *b.meta.behavior_return);
    else
        out.meta.behavior_return.reset();
    out.meta.episodes = a.meta.episodes + b.meta.episodes;
    return out;
}

void export_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    const int d = data.obs_dim();
    for (int k = 0; k < d; ++k) out << "obs_" << k << ',';
    out << "accel,lane_change,reward";
    for (int k = 0; k < d; ++k) out << ",next_obs_" << k;
    out << ",done\n";
    out << std::setprecision(9);
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (float x : data.obs(i)) out << x << ',';
        const auto a = data.action(i);
        out << a[0] << ',' << a[1] << ',' << data.reward(i);
        for (float x : data.next_obs(i)) out << ',' << x;
        out << ',' << static_cast<int>(data.done(i)) << '\n';
    }
}

}  // namespace offdrive
