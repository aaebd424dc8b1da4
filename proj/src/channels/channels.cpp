#include "uat/channels/channels.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "uat/error.hpp"

namespace uat::channels {

std::string to_string(Family family) {
    switch (family) {
        case Family::Rayleigh:
            return "rayleigh";
        case Family::Rician:
            return "rician";
        case Family::Correlated:
            return "correlated";
        case Family::Sparse:
            return "sparse";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    if (name == "rayleigh") return Family::Rayleigh;
    if (name == "rician") return Family::Rician;
    if (name == "correlated") return Family::Correlated;
    if (name == "sparse") return Family::Sparse;
    throw ConfigError("unknown channel family '" + std::string(name) + "'");
}

ChannelModelSpec ChannelModelSpec::rician_db(double kappa_db) {
    ChannelModelSpec s;
    s.family = Family::Rician;
    s.kappa = std::pow(10.0, kappa_db / 10.0);
    return s;
}

ChannelModelSpec ChannelModelSpec::correlated(double rho_u, double rho_a) {
    ChannelModelSpec s;
    s.family = Family::Correlated;
    s.rho_u = rho_u;
    s.rho_a = rho_a;
    return s;
}

ChannelModelSpec ChannelModelSpec::sparse(int n_paths) {
    ChannelModelSpec s;
    s.family = Family::Sparse;
    s.n_paths = n_paths;
    return s;
}

void ChannelModelSpec::validate() const {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
        throw ConfigError("Rician factor must be finite and nonnegative");
    }
    if (!(rho_a >= 0.0 && rho_a < 1.0) || !(rho_u >= 0.0 && rho_u < 1.0)) {
        throw ConfigError("correlation coefficients must lie in [0, 1); rho = 1 gives a "
                          "singular correlation matrix");
    }
    if (n_paths < 1) throw ConfigError("sparse channel needs at least one path");
}

CVector array_response(double phi, std::size_t n_t) {
    CVector a(static_cast<Eigen::Index>(n_t));
    const double step = std::numbers::pi * std::sin(phi);
    for (std::size_t m = 0; m < n_t; ++m) {
        a[static_cast<Eigen::Index>(m)] = std::polar(1.0, step * static_cast<double>(m));
    }
    return a;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& r) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    Eigen::VectorXd values = eig.eigenvalues();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        values[i] = values[i] < 1e-12 ? 0.0 : std::sqrt(values[i]);
    }
    return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

CMatrix complex_gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
    const double s = std::sqrt(0.5);
    CMatrix z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double re = rng.normal(0.0, s);
            const double im = rng.normal(0.0, s);
            z(i, j) = {re, im};
        }
    }
    return z;
}

CMatrix sample_rician(double kappa, std::size_t k, std::size_t n_t, Rng& rng,
                      std::optional<double> pinned_aod) {
    const double los = std::sqrt(kappa / (kappa + 1.0));
    const double nlos = std::sqrt(1.0 / (kappa + 1.0));
    CMatrix h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n_t));
    for (std::size_t u = 0; u < k; ++u) {
        const double phi = pinned_aod ? *pinned_aod : rng.uniform(0.0, 2.0 * std::numbers::pi);
        const CMatrix z = complex_gaussian(1, n_t, rng);
        h.row(static_cast<Eigen::Index>(u)) =
            los * array_response(phi, n_t).transpose() + nlos * z;
    }
    return h;
}

ChannelSampler::ChannelSampler(const ChannelModelSpec& spec, std::size_t k, std::size_t n_t)
    : spec_(spec), k_(k), n_t_(n_t) {
    if (k == 0 || n_t == 0) throw ConfigError("channel dimensions must be positive");
    spec_.validate();
    if (spec_.family == Family::Correlated) {
        const auto ki = static_cast<Eigen::Index>(k);
        const auto ni = static_cast<Eigen::Index>(n_t);
        Eigen::MatrixXd ru = Eigen::MatrixXd::Constant(ki, ki, spec_.rho_u);
        ru.diagonal().setOnes();
        Eigen::MatrixXd ra(ni, ni);
        for (Eigen::Index i = 0; i < ni; ++i) {
            for (Eigen::Index j = 0; j < ni; ++j) {
                ra(i, j) = std::pow(spec_.rho_a, static_cast<double>(std::abs(i - j)));
            }
        }
        for (const Eigen::MatrixXd* r : {&ru, &ra}) {
            if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(*r).eigenvalues().minCoeff() <= 0.0) {
                throw DomainError("correlation matrix is not positive definite");
            }
        }
        sqrt_ru_ = psd_sqrt(ru);
        sqrt_ra_ = psd_sqrt(ra);
    }
}

CMatrix ChannelSampler::operator()(Rng& rng) const {
    switch (spec_.family) {
        case Family::Rayleigh:
            return complex_gaussian(k_, n_t_, rng);
        case Family::Rician:
            return sample_rician(spec_.kappa, k_, n_t_, rng);
        case Family::Correlated: {
            const CMatrix z = complex_gaussian(k_, n_t_, rng);
            return sqrt_ru_.cast<std::complex<double>>() * z * sqrt_ra_.cast<std::complex<double>>();
        }
        case Family::Sparse: {
            const double gain = std::sqrt(static_cast<double>(n_t_) / spec_.n_paths);
            CMatrix h = CMatrix::Zero(static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(n_t_));
            for (std::size_t u = 0; u < k_; ++u) {
                for (int l = 0; l < spec_.n_paths; ++l) {
                    const std::complex<double> alpha = complex_gaussian(1, 1, rng)(0, 0);
                    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
                    h.row(static_cast<Eigen::Index>(u)) +=
                        gain * alpha * array_response(phi, n_t_).transpose();
                }
            }
            return h;
        }
    }
    throw ConfigError("unknown channel family");
}

CMatrix sample(const ChannelModelSpec& spec, std::size_t k, std::size_t n_t, Rng& rng) {
    return ChannelSampler(spec, k, n_t)(rng);
}

ChannelSample normalize_and_attach_snr(const CMatrix& h, double p_tot_over_sigma2_db) {
    const double fro2 = h.squaredNorm();
    if (!(fro2 > 0.0)) throw DomainError("cannot normalize a zero channel matrix");
    return ChannelSample{h / std::sqrt(fro2), fro2 * std::pow(10.0, p_tot_over_sigma2_db / 10.0)};
}

}  // namespace uat::channels
