#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "uat/nets/network.hpp"

namespace uat::nets {

struct Checkpoint {
    NetworkSpec policy_spec;
    NetworkWeights policy;
    NetworkSpec multiplier_spec;
    NetworkWeights multiplier;
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
    /// Free-form metadata restored verbatim (problem configuration, method, ...).
    nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

/// File layout: magic "UATCKPT1"; u32 LE header length; JSON header listing
/// both networks' specs and parameter names and shapes; every parameter as f64
/// LE in header order. Throws IoError on any read/write or format failure.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace uat::nets
