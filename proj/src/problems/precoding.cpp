#include "uat/problems/precoding.hpp"

#include <cmath>

#include "uat/error.hpp"

namespace uat::problems {

using adiff::Shape;
using adiff::Tensor;
using adiff::Var;

namespace {

constexpr double kPowerTolerance = 1e-6;

void require_feasible_power(const PrecoderPair& y) {
    const double power = (y.w_rf() * y.w_bb).squaredNorm();
    if (std::abs(power - 1.0) > kPowerTolerance) {
        throw DomainError("precoder violates the power constraint (‖W_RF W_BB‖² = " +
                          std::to_string(power) + ")");
    }
}

}  // namespace

PrecodingConfig PrecodingConfig::uniform(std::size_t n_t, std::size_t n_rf, std::size_t k,
                                         double gamma) {
    return PrecodingConfig{n_t, n_rf, k, std::vector<double>(k, gamma)};
}

void PrecodingConfig::validate() const {
    if (k == 0 || n_rf == 0 || n_t == 0) throw ConfigError("precoding dimensions must be positive");
    if (n_rf > n_t) throw ConfigError("n_rf must not exceed n_t");
    if (k > n_rf) throw ConfigError("k must not exceed n_rf");
    if (gamma.size() != k) throw ConfigError("gamma needs one entry per user");
    for (double g : gamma) {
        if (!(g > 0.0)) throw ConfigError("rate requirements must be positive");
    }
}

CMatrix PrecoderPair::w_rf() const {
    CMatrix w(phases.rows(), phases.cols());
    for (Eigen::Index i = 0; i < phases.size(); ++i) w(i) = std::polar(1.0, phases(i));
    return w;
}

PrecoderPair project_power(const PrecodingConfig&, const PrecoderPair& y) {
    const double norm = (y.w_rf() * y.w_bb).norm();
    if (!(norm > 0.0)) throw DomainError("cannot project a zero precoder onto the power sphere");
    return PrecoderPair{y.phases, y.w_bb / norm};
}

Eigen::VectorXd rates_raw(const CMatrix& h, const CMatrix& w, double noise_power) {
    // gains(k, i) = h_kᴴ w_i
    const CMatrix gains = h.conjugate() * w;
    Eigen::VectorXd r(h.rows());
    for (Eigen::Index k = 0; k < h.rows(); ++k) {
        const double signal = std::norm(gains(k, k));
        double interference = 0.0;
        for (Eigen::Index i = 0; i < gains.cols(); ++i) {
            if (i != k) interference += std::norm(gains(k, i));
        }
        r[k] = std::log2(1.0 + signal / (interference + noise_power));
    }
    return r;
}

Eigen::VectorXd rates(const PrecodingConfig& cfg, const ChannelSample& sample,
                      const PrecoderPair& y) {
    if (static_cast<std::size_t>(sample.h_norm.rows()) != cfg.k ||
        static_cast<std::size_t>(sample.h_norm.cols()) != cfg.n_t) {
        throw ShapeError("channel does not match the precoding configuration");
    }
    require_feasible_power(y);
    return rates_raw(sample.h_norm, y.w_rf() * y.w_bb, 1.0 / sample.snr);
}

double objective_F(const PrecodingConfig& cfg, const ChannelSample& sample,
                   const PrecoderPair& y) {
    return -rates(cfg, sample, y).sum();
}

Eigen::VectorXd constraints_G(const PrecodingConfig& cfg, const ChannelSample& sample,
                              const PrecoderPair& y) {
    const Eigen::VectorXd r = rates(cfg, sample, y);
    return Eigen::Map<const Eigen::VectorXd>(cfg.gamma.data(), static_cast<Eigen::Index>(cfg.k)) - r;
}

PrecodingProblem::PrecodingProblem(PrecodingConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Var PrecodingProblem::analog(const Var& y) const {
    const std::size_t n = y.dim(0);
    const Var phases = adiff::reshape(adiff::slice(y, 1, 0, phase_dim()), {n, cfg_.n_t, cfg_.n_rf});
    return adiff::complex_exp_i(phases);
}

Var PrecodingProblem::baseband(const Var& y) const {
    const std::size_t n = y.dim(0);
    return adiff::reshape(adiff::slice(y, 1, phase_dim(), phase_dim() + bb_dim()),
                          {n, cfg_.n_rf, cfg_.k, 2});
}

Var PrecodingProblem::realize(const Var& raw) const {
    if (raw.shape().size() != 2 || raw.dim(1) != raw_output_dim()) {
        throw ShapeError("precoding policy output must be [N, " + std::to_string(raw_output_dim()) +
                         "], got " + adiff::shape_string(raw.shape()));
    }
    const std::size_t n = raw.dim(0);
    const Var phases = adiff::slice(raw, 1, 0, phase_dim());
    const Var w_bb = baseband(raw);
    const Var w = adiff::complex_matmul(analog(raw), w_bb);
    const Var power = adiff::sum(adiff::square(adiff::reshape(w, {n, cfg_.n_t * cfg_.k * 2})), 1);
    const Var inv_norm = adiff::div(raw.tape()->constant(Tensor(power.shape(), 1.0)), adiff::sqrt(power));
    const Var scaled = adiff::mul(w_bb, adiff::reshape(inv_norm, {n, 1, 1, 1}));
    return adiff::concat({phases, adiff::reshape(scaled, {n, bb_dim()})}, 1);
}

Var PrecodingProblem::rates(const Var& x, const Var& y, const Tensor& side) const {
    const std::size_t n = x.dim(0);
    if (x.shape() != Shape{n, cfg_.k, cfg_.n_t, 2}) {
        throw ShapeError("channel batch must be [N, K, N_T, 2], got " + adiff::shape_string(x.shape()));
    }
    if (side.size() != n) throw ShapeError("need one SNR per sample");
    adiff::Tape& tape = *x.tape();

    const Var w = adiff::complex_matmul(analog(y), baseband(y));              // [N, N_T, K, 2]
    const Var gains = adiff::complex_matmul(adiff::complex_conj(x), w);       // [N, K, K, 2]
    const Var power = adiff::complex_abs2(gains);                             // [N, K, K]

    Tensor diag({cfg_.k, cfg_.k}, 0.0);
    Tensor off({cfg_.k, cfg_.k}, 1.0);
    for (std::size_t k = 0; k < cfg_.k; ++k) {
        diag[k * cfg_.k + k] = 1.0;
        off[k * cfg_.k + k] = 0.0;
    }
    Tensor noise({n, 1});
    for (std::size_t i = 0; i < n; ++i) noise[i] = 1.0 / side[i];

    const Var signal = adiff::sum(adiff::mul(power, tape.constant(diag)), 2);
    const Var interference = adiff::sum(adiff::mul(power, tape.constant(off)), 2);
    const Var floor = adiff::add(interference, tape.constant(noise));          // [N, K]
    return adiff::sub(adiff::log2(adiff::add(floor, signal)), adiff::log2(floor));
}

Var PrecodingProblem::objective(const Var& x, const Var& y, const Tensor& side) const {
    return adiff::neg(adiff::sum(rates(x, y, side), 1));
}

Var PrecodingProblem::constraints(const Var& x, const Var& y, const Tensor& side) const {
    const Var r = rates(x, y, side);
    return adiff::sub(r.tape()->constant(Tensor({cfg_.k}, cfg_.gamma)), r);
}

Tensor PrecodingProblem::project_input(const Tensor& x) const {
    Tensor out = x;
    const std::size_t n = x.dim(0);
    const std::size_t per = x.size() / n;
    for (std::size_t i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < per; ++j) norm2 += x[i * per + j] * x[i * per + j];
        if (!(norm2 > 0.0)) throw DomainError("cannot normalize a zero channel");
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t j = 0; j < per; ++j) out[i * per + j] *= inv;
    }
    return out;
}

Tensor pack_channels(std::span<const ChannelSample> samples) {
    if (samples.empty()) throw ShapeError("empty sample batch");
    const auto k = static_cast<std::size_t>(samples.front().h_norm.rows());
    const auto n_t = static_cast<std::size_t>(samples.front().h_norm.cols());
    Tensor x({samples.size(), k, n_t, 2});
    std::size_t p = 0;
    for (const ChannelSample& s : samples) {
        if (static_cast<std::size_t>(s.h_norm.rows()) != k ||
            static_cast<std::size_t>(s.h_norm.cols()) != n_t) {
            throw ShapeError("samples in a batch must share K and N_T");
        }
        for (Eigen::Index r = 0; r < s.h_norm.rows(); ++r) {
            for (Eigen::Index c = 0; c < s.h_norm.cols(); ++c) {
                x[p++] = s.h_norm(r, c).real();
                x[p++] = s.h_norm(r, c).imag();
            }
        }
    }
    return x;
}

Tensor pack_snr(std::span<const ChannelSample> samples) {
    Tensor snr({samples.size()});
    for (std::size_t i = 0; i < samples.size(); ++i) snr[i] = samples[i].snr;
    return snr;
}

CMatrix unpack_channel(const Tensor& x, std::size_t n) {
    const std::size_t k = x.dim(1);
    const std::size_t n_t = x.dim(2);
    CMatrix h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n_t));
    const double* p = x.data() + n * k * n_t * 2;
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < n_t; ++c, p += 2) {
            h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {p[0], p[1]};
        }
    }
    return h;
}

Tensor pack_precoders(const PrecodingConfig& cfg, std::span<const PrecoderPair> pairs) {
    const std::size_t dim = cfg.n_t * cfg.n_rf + cfg.n_rf * cfg.k * 2;
    Tensor y({pairs.size(), dim});
    std::size_t p = 0;
    for (const PrecoderPair& pair : pairs) {
        for (std::size_t r = 0; r < cfg.n_t; ++r) {
            for (std::size_t c = 0; c < cfg.n_rf; ++c) {
                y[p++] = pair.phases(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            }
        }
        for (std::size_t r = 0; r < cfg.n_rf; ++r) {
            for (std::size_t c = 0; c < cfg.k; ++c) {
                const auto v = pair.w_bb(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                y[p++] = v.real();
                y[p++] = v.imag();
            }
        }
    }
    return y;
}

PrecoderPair unpack_precoder(const PrecodingConfig& cfg, const Tensor& y, std::size_t n) {
    PrecoderPair pair{Eigen::MatrixXd(cfg.n_t, cfg.n_rf), CMatrix(cfg.n_rf, cfg.k)};
    const double* p = y.data() + n * y.dim(1);
    for (std::size_t r = 0; r < cfg.n_t; ++r) {
        for (std::size_t c = 0; c < cfg.n_rf; ++c) {
            pair.phases(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *p++;
        }
    }
    for (std::size_t r = 0; r < cfg.n_rf; ++r) {
        for (std::size_t c = 0; c < cfg.k; ++c, p += 2) {
            pair.w_bb(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {p[0], p[1]};
        }
    }
    return pair;
}

}  // namespace uat::problems
