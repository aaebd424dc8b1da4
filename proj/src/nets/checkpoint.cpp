#include "uat/nets/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "uat/error.hpp"

namespace uat::nets {

using adiff::Shape;
using adiff::Tensor;

namespace {

constexpr char kMagic[8] = {'U', 'A', 'T', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::vector<char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

nlohmann::json network_json(const NetworkSpec& spec, const NetworkWeights& w) {
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < w.tensors.size(); ++i) {
        params.push_back({{"name", w.names[i]}, {"shape", w.tensors[i].shape()}});
    }
    return {{"role", to_string(w.role)}, {"spec", spec_to_json(spec)}, {"parameters", params}};
}

}  // namespace

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    return {{"arch", to_string(spec.arch)},
            {"hidden_layers", spec.hidden_layers},
            {"widths", spec.widths},
            {"activation", to_string(spec.activation)}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    try {
        s.arch = parse_arch(j.at("arch").get<std::string>());
        s.hidden_layers = j.at("hidden_layers").get<std::size_t>();
        s.widths = j.at("widths").get<std::vector<std::size_t>>();
        s.activation = parse_activation(j.at("activation").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad network spec: ") + e.what());
    }
    s.validate();
    return s;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const nlohmann::json header = {
        {"epoch", ckpt.epoch},
        {"seed", ckpt.seed},
        {"meta", ckpt.meta},
        {"networks", {network_json(ckpt.policy_spec, ckpt.policy),
                      network_json(ckpt.multiplier_spec, ckpt.multiplier)}}};
    const std::string text = header.dump();

    std::vector<char> out(kMagic, kMagic + 8);
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
    out.insert(out.end(), text.begin(), text.end());
    for (const NetworkWeights* w : {&ckpt.policy, &ckpt.multiplier}) {
        for (const Tensor& t : w->tensors) {
            for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw IoError("not a checkpoint file: " + path.string());
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    if (bytes.size() < 12 + static_cast<std::size_t>(len)) throw IoError("checkpoint header is truncated");

    Checkpoint ckpt;
    std::size_t at = 12 + len;
    try {
        const auto h = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
        ckpt.epoch = h.at("epoch").get<std::uint64_t>();
        ckpt.seed = h.at("seed").get<std::uint64_t>();
        ckpt.meta = h.at("meta");
        const auto& nets = h.at("networks");
        if (nets.size() != 2) throw IoError("checkpoint must hold a policy and a multiplier network");
        for (std::size_t n = 0; n < 2; ++n) {
            NetworkSpec& spec = n == 0 ? ckpt.policy_spec : ckpt.multiplier_spec;
            NetworkWeights& w = n == 0 ? ckpt.policy : ckpt.multiplier;
            spec = spec_from_json(nets[n].at("spec"));
            w.role = parse_role(nets[n].at("role").get<std::string>());
            for (const auto& p : nets[n].at("parameters")) {
                const Shape shape = p.at("shape").get<Shape>();
                Tensor t(shape);
                if (bytes.size() < at + t.size() * 8) throw IoError("checkpoint payload is truncated");
                for (std::size_t i = 0; i < t.size(); ++i, at += 8) {
                    t[i] = std::bit_cast<double>(get_u64(bytes.data() + at));
                }
                w.names.push_back(p.at("name").get<std::string>());
                w.tensors.push_back(std::move(t));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw IoError(std::string("malformed checkpoint header: ") + e.what());
    }
    if (at != bytes.size()) throw IoError("checkpoint has trailing bytes");
    return ckpt;
}

}  // namespace uat::nets
