#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "uat/channels/channels.hpp"
#include "uat/problems/problem.hpp"

namespace uat::problems {

using channels::CMatrix;
using channels::ChannelSample;

struct PrecodingConfig {
    std::size_t n_t = 16;
    std::size_t n_rf = 6;
    std::size_t k = 4;
    std::vector<double> gamma;  ///< per-user rate requirement, bits/s/Hz

    /// Equal requirement γ for every user.
    static PrecodingConfig uniform(std::size_t n_t, std::size_t n_rf, std::size_t k, double gamma);

    /// Throws ConfigError unless k ≤ n_rf ≤ n_t, gamma has k positive entries.
    void validate() const;
};

/// Hybrid precoder: W_RF = e^{iΦ} (N_T × N_RF) and baseband W_BB (N_RF × K).
struct PrecoderPair {
    Eigen::MatrixXd phases;
    CMatrix w_bb;

    CMatrix w_rf() const;
};

/// Scales w_bb so that ‖W_RF W_BB‖_F² = 1. Throws DomainError if the product is zero.
PrecoderPair project_power(const PrecodingConfig& cfg, const PrecoderPair& y);

/// Per-user rates in canonical form: unit-norm channel, P_tot = 1, noise 1/snr.
Eigen::VectorXd rates(const PrecodingConfig& cfg, const ChannelSample& sample,
                      const PrecoderPair& y);

/// Rates for an arbitrary channel, full precoder product and noise power.
Eigen::VectorXd rates_raw(const CMatrix& h, const CMatrix& w, double noise_power);

/// F = −Σ_k R_k.
double objective_F(const PrecodingConfig& cfg, const ChannelSample& sample,
                   const PrecoderPair& y);

/// G_k = γ_k − R_k.
Eigen::VectorXd constraints_G(const PrecodingConfig& cfg, const ChannelSample& sample,
                              const PrecoderPair& y);

/// QoS-constrained sum-rate maximization over hybrid precoders.
///
/// x is the normalized channel, [N, K, N_T, 2]; side is the linear SNR, [N].
/// y is flat, [N, N_T·N_RF + N_RF·K·2]: the phases Φ row-major followed by
/// W_BB as interleaved (re, im) pairs row-major. realize() applies the power
/// projection; the unit-modulus constraint holds through the phase form.
class PrecodingProblem final : public ConstrainedProblem {
public:
    explicit PrecodingProblem(PrecodingConfig cfg);

    const PrecodingConfig& config() const noexcept { return cfg_; }

    std::string name() const override { return "hybrid_precoding"; }
    std::size_t n_constraints() const override { return cfg_.k; }
    adiff::Shape input_shape() const override { return {cfg_.k, cfg_.n_t, 2}; }
    std::size_t raw_output_dim() const override { return phase_dim() + bb_dim(); }
    adiff::Var realize(const adiff::Var& raw) const override;
    adiff::Var objective(const adiff::Var& x, const adiff::Var& y,
                         const adiff::Tensor& side) const override;
    adiff::Var constraints(const adiff::Var& x, const adiff::Var& y,
                           const adiff::Tensor& side) const override;
    bool constraints_depend_on_input() const override { return true; }
    /// Per-sample normalization to unit Frobenius norm.
    adiff::Tensor project_input(const adiff::Tensor& x) const override;

    /// Per-user rates [N, K].
    adiff::Var rates(const adiff::Var& x, const adiff::Var& y, const adiff::Tensor& side) const;

    /// W_RF as [N, N_T, N_RF, 2] and W_BB as [N, N_RF, K, 2].
    adiff::Var analog(const adiff::Var& y) const;
    adiff::Var baseband(const adiff::Var& y) const;

    std::size_t phase_dim() const noexcept { return cfg_.n_t * cfg_.n_rf; }
    std::size_t bb_dim() const noexcept { return cfg_.n_rf * cfg_.k * 2; }

private:
    PrecodingConfig cfg_;
};

/// Packs normalized channels into the x layout [N, K, N_T, 2].
adiff::Tensor pack_channels(std::span<const ChannelSample> samples);
/// Linear SNRs, [N].
adiff::Tensor pack_snr(std::span<const ChannelSample> samples);
/// Inverse of pack_channels for sample n.
CMatrix unpack_channel(const adiff::Tensor& x, std::size_t n);

/// Decision layout helpers shared with PrecodingProblem.
adiff::Tensor pack_precoders(const PrecodingConfig& cfg, std::span<const PrecoderPair> pairs);
PrecoderPair unpack_precoder(const PrecodingConfig& cfg, const adiff::Tensor& y, std::size_t n);

}  // namespace uat::problems
