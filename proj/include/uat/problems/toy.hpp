#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>

#include "uat/problems/problem.hpp"

namespace uat::problems {

/// Power allocation max Σ log2(1 + p_k g_k) s.t. Σ p_k ≤ budget, p ≥ 0.
/// Small enough to solve exactly, so it serves as ground truth for
/// optimal-value sensitivities.
struct ToyPowerProblem {
    Eigen::VectorXd gains;
    double budget = 1.0;
};

struct ToySolution {
    Eigen::VectorXd powers;
    double water_level = 0.0;  ///< μ
    double multiplier = 0.0;   ///< λ* = 1/(μ ln 2) for the budget constraint
    double sum_rate = 0.0;     ///< optimal Σ log2(1 + p_k g_k)
};

/// Water-filling: p_k = max(0, μ − 1/g_k) with Σ p_k = budget.
ToySolution toy_optimal(const ToyPowerProblem& p);

/// d(optimal sum-rate)/d g_k via the envelope theorem. The budget constraint
/// does not involve g, so only the objective partial survives.
Eigen::VectorXd toy_envelope_gradient(const ToyPowerProblem& p);

struct EnvelopeCheck {
    std::size_t instances = 0;
    double max_rel_error = 0.0;  ///< |envelope − fd| / max(|fd|, 1e-6) over all gains
};

/// Random instances (K cycling through 2..8, log-uniform gains, random budget):
/// toy_envelope_gradient against central differences of the re-solved optimum.
EnvelopeCheck toy_envelope_check(std::size_t instances, std::uint64_t seed);

double toy_sum_rate(const Eigen::VectorXd& gains, const Eigen::VectorXd& powers);

/// The toy program in minimization form for learning: x = gains [N, K],
/// y = powers [N, K] (softplus of the raw output), F = −Σ log2(1 + p g),
/// G = Σ p − budget, shape [N, 1].
class WaterFillingProblem final : public ConstrainedProblem {
public:
    WaterFillingProblem(std::size_t k, double budget);

    std::size_t users() const noexcept { return k_; }
    double budget() const noexcept { return budget_; }

    std::string name() const override { return "water_filling"; }
    std::size_t n_constraints() const override { return 1; }
    adiff::Shape input_shape() const override { return {k_}; }
    std::size_t raw_output_dim() const override { return k_; }
    adiff::Var realize(const adiff::Var& raw) const override;
    adiff::Var objective(const adiff::Var& x, const adiff::Var& y,
                         const adiff::Tensor& side) const override;
    adiff::Var constraints(const adiff::Var& x, const adiff::Var& y,
                           const adiff::Tensor& side) const override;
    bool constraints_depend_on_input() const override { return false; }
    /// Clamps gains to at least kMinGain so perturbed inputs stay valid.
    adiff::Tensor project_input(const adiff::Tensor& x) const override;

    static constexpr double kMinGain = 1e-3;

private:
    std::size_t k_;
    double budget_;
};

/// Gains [count, k], log-uniform on [lo, hi], one substream per sample.
adiff::Tensor toy_gains(std::size_t k, std::size_t count, std::uint64_t seed, double lo = 0.25,
                        double hi = 4.0);

}  // namespace uat::problems
