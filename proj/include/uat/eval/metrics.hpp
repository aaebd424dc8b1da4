#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "uat/adiff/tensor.hpp"
#include "uat/nets/network.hpp"
#include "uat/problems/problem.hpp"

namespace uat::eval {

inline constexpr double kDefaultViolationTol = 1e-6;

struct MetricsReport {
    double asr = 0.0;  ///< mean of (−F if feasible else 0); the sum-rate for precoding
    double vr = 0.0;   ///< fraction of samples with some G_i > τ
    std::size_t n_samples = 0;
    double violation_tol = kDefaultViolationTol;
    /// Row n = (−F_n, G_n1, ..., G_nC).
    std::optional<Eigen::MatrixXd> per_sample;
};

/// Aggregates per-sample F [N] and G [N, N_C]. A sample violates iff any G_i > τ.
MetricsReport asr_vr(const adiff::Tensor& f, const adiff::Tensor& g, double tau,
                     bool keep_per_sample = false);

/// Runs the policy over (x, side) in chunks and aggregates.
MetricsReport asr_vr(const problems::ConstrainedProblem& problem, const nets::Network& policy,
                     const nets::NetworkWeights& theta, const adiff::Tensor& x,
                     const adiff::Tensor& side, double tau = kDefaultViolationTol,
                     bool keep_per_sample = false);

/// Per-sample ASR terms (−F if feasible else 0) from a report kept per sample.
Eigen::VectorXd asr_terms(const MetricsReport& r);

struct BootstrapInterval {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap interval for mean(a − b) with samples resampled in pairs.
BootstrapInterval paired_bootstrap(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                   std::size_t reps = 2000, std::uint64_t seed = 1,
                                   double level = 0.95);

/// Rows [begin, end) of a tensor along the leading axis.
adiff::Tensor rows(const adiff::Tensor& t, std::size_t begin, std::size_t end);

}  // namespace uat::eval
