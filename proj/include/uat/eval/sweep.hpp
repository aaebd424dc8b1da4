#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uat/channels/channels.hpp"
#include "uat/eval/metrics.hpp"
#include "uat/nets/checkpoint.hpp"
#include "uat/problems/precoding.hpp"

namespace uat::eval {

nlohmann::json to_json(const problems::PrecodingConfig& cfg);
problems::PrecodingConfig precoding_config_from_json(const nlohmann::json& j);

/// One test distribution of a sweep.
struct TestSpec {
    channels::ChannelModelSpec model;
    std::string param_name;  ///< "kappa_db", "rho_u", "rho_a", "n_paths" or "none"
    double param_value = 0.0;
};

/// Named grids: "rician" (κ ∈ {0,5,10,15,20} dB), "correlated" (ρ_U then ρ_A
/// over {0.2,0.4,0.6,0.8}, the other held at 0), "sparse" (L ∈ {5,4,3,2}) and
/// "rayleigh". Throws ConfigError for other names.
std::vector<TestSpec> preset(std::string_view name);

struct MethodEntry {
    std::string model;   ///< row label; taken from the checkpoint when empty
    std::string method;  ///< row label; taken from the checkpoint when empty
    std::filesystem::path checkpoint;
};

struct SweepSpec {
    std::vector<TestSpec> tests;
    std::size_t n_test = 2000;
    double snr_db = 10.0;
    std::uint64_t seed = 7;
    double tau = kDefaultViolationTol;
    std::vector<MethodEntry> methods;

    void validate() const;
};

struct SweepRow {
    std::string model;
    std::string method;
    std::string family;
    std::string param_name;
    double param_value = 0.0;
    double snr_db = 0.0;
    std::size_t n_test = 0;
    double asr = 0.0;
    double vr = 0.0;
    double asr_rel_reference = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<MethodEntry> absent;  ///< checkpoints that could not be loaded
};

/// Test set i of a sweep: n_test samples at a fixed snr_db from substream (seed, i).
std::vector<channels::ChannelSample> sweep_test_set(const problems::PrecodingConfig& cfg,
                                                   const SweepSpec& spec, std::size_t i);

/// Scores every loadable checkpoint and the ZF reference on every test set.
/// Checkpoints whose precoding configuration differs from cfg are rejected
/// with ConfigError.
SweepResult ood_sweep(const problems::PrecodingConfig& cfg, const SweepSpec& spec);

std::string sweep_csv(const SweepResult& r);
/// One table per (family, parameter): rows model × method, columns parameter
/// values, cells "ASR (VR %)".
std::string sweep_markdown(const SweepResult& r);

/// Long-form CSV (run, epoch, method, mean_lagrangian, mean_F, id_asr, id_vr,
/// updates_so_far) from JSON-lines training logs.
std::string epoch_curves_csv(const std::vector<std::pair<std::string, std::filesystem::path>>& logs);

/// Policy metrics of a checkpoint on samples.
MetricsReport evaluate_checkpoint(const problems::PrecodingConfig& cfg, const nets::Checkpoint& ckpt,
                                  std::span<const channels::ChannelSample> samples,
                                  double tau = kDefaultViolationTol, bool keep_per_sample = false);

}  // namespace uat::eval
