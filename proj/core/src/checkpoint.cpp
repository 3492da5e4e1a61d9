#include "offdrive/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "offdrive/error.hpp"
#include "offdrive/rng.hpp"

namespace offdrive {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'O', 'D', '4', 'R', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class U>
void put_le(std::string& out, U value) {
    for (std::size_t k = 0; k < sizeof(U); ++k) out.push_back(static_cast<char>((value >> (8 * k)) & 0xFF));
}

template <class U>
U get_le(const std::string& in, std::size_t at) {
    U value = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k)
        value |= static_cast<U>(static_cast<unsigned char>(in[at + k])) << (8 * k);
    return value;
}

json describe(const nn::Mlp& net, std::size_t offset) {
    return {{"sizes", net.sizes()},
            {"hidden_activation", nn::to_string(net.hidden_activation())},
            {"output_activation", nn::to_string(net.output_activation())},
            {"offset", offset},
            {"count", net.parameter_count()}};
}

nn::Mlp restore(const json& j, const std::string& blob, std::size_t blob_start) {
    nn::Mlp net(j.at("sizes").get<std::vector<int>>(), nn::parse_activation(j.at("hidden_activation")),
                nn::parse_activation(j.at("output_activation")));
    const auto offset = j.at("offset").get<std::size_t>();
    const auto count = j.at("count").get<std::size_t>();
    if (count != static_cast<std::size_t>(net.parameter_count()))
        throw DataError("checkpoint parameter count does not match its layer sizes");
    if (blob_start + (offset + count) * 8 > blob.size()) throw DataError("checkpoint parameter block is truncated");
    for (std::size_t i = 0; i < count; ++i)
        net.parameters()[static_cast<Eigen::Index>(i)] =
            std::bit_cast<double>(get_le<std::uint64_t>(blob, blob_start + (offset + i) * 8));
    return net;
}

}  // namespace

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a64(to_json(config)); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    std::string params;
    auto append = [&](const nn::Mlp& net) {
        for (Eigen::Index i = 0; i < net.parameter_count(); ++i)
            put_le(params, std::bit_cast<std::uint64_t>(net.parameters()[i]));
    };
    json header;
    header["label"] = c.label;
    header["algorithm"] = c.algorithm;
    header["scenario"] = c.scenario;
    header["actor"] = describe(c.actor, 0);
    append(c.actor);
    if (c.critic) {
        header["critic"] = describe(*c.critic, static_cast<std::size_t>(c.actor.parameter_count()));
        append(*c.critic);
    }
    header["normalization"] = {{"mean", c.normalization.mean}, {"scale", c.normalization.scale}};
    header["action_scale"] = {{"accel_min", c.action_scale.accel_min}, {"accel_max", c.action_scale.accel_max}};
    header["config_hash"] = c.config_hash;
    header["seed"] = c.seed;
    header["step"] = c.step;
    header["rng_state"] = c.rng_state;
    header["checksum"] = fnv1a64(params);
    const std::string text = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put_le(out, kVersion);
    put_le(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    out += params;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path.string());
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string where = " in checkpoint " + path.string();
    if (in.size() < 20 || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0)
        throw DataError("bad magic" + where);
    const auto version = get_le<std::uint32_t>(in, 8);
    if (version != kVersion) throw DataError("unsupported version " + std::to_string(version) + where);
    const auto header_len = get_le<std::uint64_t>(in, 12);
    if (20 + header_len > in.size()) throw DataError("truncated header" + where);
    try {
        const json h = json::parse(in.substr(20, header_len));
        const std::size_t blob_start = 20 + header_len;
        if (fnv1a64(std::string_view(in).substr(blob_start)) != h.at("checksum").get<std::uint64_t>())
            throw DataError("checksum mismatch" + where);
        Checkpoint c;
        c.label = h.at("label");
        c.algorithm = h.at("algorithm");
        c.scenario = h.at("scenario");
        c.actor = restore(h.at("actor"), in, blob_start);
        std::size_t expected = static_cast<std::size_t>(c.actor.parameter_count());
        if (h.contains("critic")) {
            c.critic = restore(h.at("critic"), in, blob_start);
            expected += static_cast<std::size_t>(c.critic->parameter_count());
        }
        if (blob_start + expected * 8 != in.size()) throw DataError("trailing or missing parameter bytes" + where);
        c.normalization.mean = h.at("normalization").at("mean").get<std::vector<double>>();
        c.normalization.scale = h.at("normalization").at("scale").get<std::vector<double>>();
        if (static_cast<int>(c.normalization.mean.size()) != c.actor.input_dim() ||
            c.normalization.scale.size() != c.normalization.mean.size())
            throw DataError("normalization dimension does not match the actor" + where);
        c.action_scale.accel_min = h.at("action_scale").at("accel_min");
        c.action_scale.accel_max = h.at("action_scale").at("accel_max");
        c.config_hash = h.at("config_hash");
        c.seed = h.at("seed");
        c.step = h.at("step");
        c.rng_state = h.at("rng_state");
        if (c.actor.output_dim() != 2) throw DataError("actor must have two outputs" + where);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed header") + where + ": " + e.what());
    } catch (const ContractError& e) {
        throw DataError(std::string("invalid network") + where + ": " + e.what());
    }
}

}  // namespace offdrive
