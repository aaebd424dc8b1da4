#pragma once

#include <Eigen/Dense>
#include <span>

#include "uat/channels/channels.hpp"
#include "uat/eval/metrics.hpp"
#include "uat/problems/precoding.hpp"

namespace uat::eval {

/// Singular values at or below this are dropped from the pseudo-inverse.
inline constexpr double kPinvThreshold = 1e-10;

/// Fully digital zero-forcing precoder (N_T × K) for a normalized channel:
/// columns of the pseudo-inverse of conj(H), each scaled to power 1/K.
/// Throws ConfigError when K > N_T.
channels::CMatrix zf_precoder(const channels::CMatrix& h);

/// Per-user rates of the ZF reference; the analog stage is bypassed.
Eigen::VectorXd zf_rates(const channels::ChannelSample& sample);

/// ZF reference scored with the same ASR/VR rule as learned policies.
MetricsReport zf_reference(const problems::PrecodingConfig& cfg,
                           std::span<const channels::ChannelSample> samples,
                           double tau = kDefaultViolationTol);

}  // namespace uat::eval
