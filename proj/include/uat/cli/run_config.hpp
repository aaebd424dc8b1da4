#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "uat/channels/channels.hpp"
#include "uat/nets/network.hpp"
#include "uat/problems/precoding.hpp"
#include "uat/train/train.hpp"

namespace uat::cli {

/// Training-set description; `path` wins over generation when set.
struct DataConfig {
    channels::Family family = channels::Family::Rayleigh;
    double kappa_db = 10.0;
    double rho_u = 0.0;
    double rho_a = 0.0;
    int n_paths = 4;
    std::size_t count = 20000;
    double snr_min_db = 0.0;
    double snr_max_db = 20.0;
    std::uint64_t seed = 1;
    std::string path;

    channels::ChannelModelSpec model() const;
};

struct SweepConfig {
    std::string preset = "rician";
    std::size_t n_test = 2000;
    double snr_db = 10.0;
    std::uint64_t seed = 7;
    double tau = 1e-6;
};

/// Every tunable of a run. Key names in the JSON document match the field names.
struct RunConfig {
    problems::PrecodingConfig precoding = problems::PrecodingConfig::uniform(8, 4, 3, 1.0);
    nets::NetworkSpec policy{nets::Arch::EdgeGNN, 3, {32, 32, 32}, nets::Activation::Relu};
    nets::NetworkSpec multiplier{nets::Arch::EdgeGNN, 2, {16, 16}, nets::Activation::Relu};
    train::TrainConfig train = default_train();
    DataConfig data;
    SweepConfig sweep;
    std::size_t threads = 1;

    static train::TrainConfig default_train();
    void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Fields absent from j keep the values already in `base`.
RunConfig merge_json(RunConfig base, const nlohmann::json& j);
/// Reads a JSON config file; IoError if unreadable, ConfigError if malformed.
nlohmann::json read_json_file(const std::string& path);

}  // namespace uat::cli
