#include "uat/eval/reference.hpp"

#include <cmath>

#include "uat/error.hpp"

namespace uat::eval {

using channels::CMatrix;

CMatrix zf_precoder(const CMatrix& h) {
    const Eigen::Index k = h.rows();
    if (k == 0 || k > h.cols()) throw ConfigError("zero-forcing needs 1 <= K <= N_T");
    // rates use gains conj(H)·W, so W = pinv(conj(H))
    const Eigen::JacobiSVD<CMatrix> svd(h.conjugate(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > kPinvThreshold) inv[i] = 1.0 / s[i];
    }
    CMatrix w = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
    const double per_user = 1.0 / static_cast<double>(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double norm = w.col(i).norm();
        if (norm > 0.0) w.col(i) *= std::sqrt(per_user) / norm;
    }
    return w;
}

Eigen::VectorXd zf_rates(const channels::ChannelSample& sample) {
    return problems::rates_raw(sample.h_norm, zf_precoder(sample.h_norm), 1.0 / sample.snr);
}

MetricsReport zf_reference(const problems::PrecodingConfig& cfg,
                           std::span<const channels::ChannelSample> samples, double tau) {
    cfg.validate();
    const std::size_t n = samples.size();
    if (n == 0) throw ConfigError("metrics need at least one sample");
    adiff::Tensor f({n});
    adiff::Tensor g({n, cfg.k});
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(samples[i].h_norm.rows()) != cfg.k ||
            static_cast<std::size_t>(samples[i].h_norm.cols()) != cfg.n_t) {
            throw ShapeError("channel does not match the precoding configuration");
        }
        const Eigen::VectorXd r = zf_rates(samples[i]);
        f[i] = -r.sum();
        for (std::size_t c = 0; c < cfg.k; ++c) g[i * cfg.k + c] = cfg.gamma[c] - r[static_cast<Eigen::Index>(c)];
    }
    return asr_vr(f, g, tau);
}

}  // namespace uat::eval
