#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uat/adiff/ops.hpp"
#include "uat/nets/network.hpp"
#include "uat/problems/problem.hpp"

namespace uat::train {

enum class Method { PDL, UAT, PGDBaseline };
enum class CostMode { ObjectiveOnly, ObjectivePlusViolation };

std::string to_string(Method m);
std::string to_string(CostMode m);
Method parse_method(std::string_view s);
CostMode parse_cost_mode(std::string_view s);

struct PgdSettings {
    std::size_t steps = 7;
    double step_size = 2.0 / 64.0;
    double radius = 8.0 / 64.0;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batches = 0;  ///< 0: as many full batches as the data holds
    std::size_t batch_size = 100;
    double lr_policy = 1e-3;
    double lr_multiplier = 1e-3;
    std::optional<std::size_t> at_start_epoch;  ///< E_A, 1-based; defaults to E/2
    std::size_t adv_iters = 5;
    double perturb_range = 5.0 / 64.0;
    std::uint64_t seed = 1;
    Method method = Method::PDL;
    CostMode cost_mode = CostMode::ObjectiveOnly;
    PgdSettings pgd;
    std::size_t id_eval_samples = 500;  ///< leading training samples scored each epoch

    void validate() const;
    std::size_t ea() const;
    std::size_t resolved_batches(std::size_t data_size) const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Inputs x [N, ...] with one side scalar per sample [N].
struct Data {
    adiff::Tensor x;
    adiff::Tensor side;

    std::size_t size() const { return x.rank() == 0 ? 0 : x.dim(0); }
    Data select(const std::vector<std::size_t>& idx) const;
    Data head(std::size_t n) const;
};

/// Policy and multiplier networks bound to a problem.
struct Model {
    const problems::ConstrainedProblem* problem = nullptr;
    nets::Network policy;
    nets::Network multiplier;
};

/// Per-tensor first and second moment estimates.
struct Adam {
    std::vector<adiff::Tensor> m;
    std::vector<adiff::Tensor> v;
    std::uint64_t t = 0;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    /// w ← w − lr·m̂/(√v̂ + eps), or + when ascending.
    void step(nets::NetworkWeights& w, const std::vector<adiff::Tensor>& grads, double lr, bool ascend);
    bool operator==(const Adam&) const = default;
};

struct TrainState {
    nets::NetworkWeights theta;
    nets::NetworkWeights xi;
    Adam adam_theta;
    Adam adam_xi;
    std::size_t epoch = 0;  ///< epochs completed
    std::uint64_t updates = 0;

    bool operator==(const TrainState&) const = default;
};

TrainState initial_state(const Model& model, std::uint64_t seed);

/// mean over samples of F + Σ_i λ_i G_i. f [N], g and lambda [N, N_C].
adiff::Var lagrangian(const adiff::Var& f, const adiff::Var& g, const adiff::Var& lambda);

/// The batch Lagrangian of the current networks.
double lagrangian_value(const Model& model, const TrainState& s, const Data& batch);

struct StepStats {
    double lagrangian = 0.0;
    double mean_f = 0.0;
};

/// One descent step on θ and one ascent step on ξ.
StepStats pdl_step(const Model& model, TrainState& s, const Data& batch, double lr_policy,
                   double lr_multiplier);

struct Directions {
    adiff::Tensor d;             ///< unit rows where valid, zero rows elsewhere
    std::vector<bool> valid;     ///< false where the numerator norm fell below 1e-12
};

inline constexpr double kDegenerateNorm = 1e-12;

/// normalize(∂F/∂y·∂f_y/∂x − Σ λ_i ∂G_i/∂x) per sample, with y and λ from the
/// current networks. The G term holds y fixed.
Directions adversarial_directions(const Model& model, const TrainState& s, const Data& batch,
                                  CostMode mode = CostMode::ObjectiveOnly);

/// x̃ = proj(x + ε·d) for valid rows; other rows are returned unchanged.
Data adversarial_examples(const Model& model, const Data& batch, const Directions& d, double eps);

/// Repeated normalized ascent on F(x, f_y(x)) with projection onto the ball
/// around the starting batch and the problem's input projection after each step.
Data pgd_baseline_examples(const Model& model, const TrainState& s, const Data& batch,
                           const PgdSettings& pgd);

/// T chained refinements of one batch, each followed by an update.
void uat_rounds(const Model& model, TrainState& s, const Data& batch, const TrainConfig& cfg);

struct EpochLog {
    std::size_t epoch = 0;
    Method method = Method::PDL;
    double mean_lagrangian = 0.0;
    double mean_f = 0.0;
    double id_asr = 0.0;
    double id_vr = 0.0;
    std::uint64_t updates_so_far = 0;
    double wall_ms = 0.0;
    bool adversarial = false;
};

nlohmann::json to_json(const EpochLog& e);

using EpochCallback = std::function<void(const EpochLog&, const TrainState&)>;

/// Runs epochs s.epoch+1 .. until (default cfg.epochs). Starting from a state
/// saved after epoch e of a run with the same seed reproduces that run.
TrainState train(const Model& model, const Data& data, const TrainConfig& cfg, TrainState state,
                 const EpochCallback& on_epoch = {}, std::optional<std::size_t> until = {});

/// Epoch e's batch order: a permutation of [0, data_size) from (seed, e).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t data_size);

}  // namespace uat::train
