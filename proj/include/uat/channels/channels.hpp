#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "uat/rng.hpp"

namespace uat::channels {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

enum class Family { Rayleigh, Rician, Correlated, Sparse };

std::string to_string(Family family);
/// Accepts the lowercase names produced by to_string; throws ConfigError otherwise.
Family parse_family(std::string_view name);

/// Parameters of a channel distribution. Only the fields used by `family` are read.
struct ChannelModelSpec {
    Family family = Family::Rayleigh;
    double kappa = 0.0;  ///< Rician factor, linear scale
    double rho_a = 0.0;  ///< antenna correlation
    double rho_u = 0.0;  ///< user correlation
    int n_paths = 1;     ///< sparse-channel path count L

    static ChannelModelSpec rayleigh() { return {}; }
    static ChannelModelSpec rician_db(double kappa_db);
    static ChannelModelSpec correlated(double rho_u, double rho_a);
    static ChannelModelSpec sparse(int n_paths);

    /// Throws ConfigError when rho_a/rho_u leave [0, 1), kappa < 0 or n_paths < 1.
    void validate() const;

    bool operator==(const ChannelModelSpec&) const = default;
};

/// Normalized channel H/‖H‖_F (K × N_T) with SNR = ‖H‖_F² P_tot/σ² in linear scale.
struct ChannelSample {
    CMatrix h_norm;
    double snr = 1.0;

    bool operator==(const ChannelSample&) const = default;
};

/// Uniform linear array response a(φ) with half-wavelength spacing.
CVector array_response(double phi, std::size_t n_t);

/// Symmetric PSD square root via eigendecomposition; eigenvalues below 1e-12
/// are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& r);

/// Draws unnormalized channels from one distribution. Correlation square
/// roots are computed once at construction.
class ChannelSampler {
public:
    ChannelSampler(const ChannelModelSpec& spec, std::size_t k, std::size_t n_t);

    CMatrix operator()(Rng& rng) const;

    const ChannelModelSpec& spec() const noexcept { return spec_; }

private:
    ChannelModelSpec spec_;
    std::size_t k_;
    std::size_t n_t_;
    Eigen::MatrixXd sqrt_ru_;
    Eigen::MatrixXd sqrt_ra_;
};

CMatrix sample(const ChannelModelSpec& spec, std::size_t k, std::size_t n_t, Rng& rng);

/// Rician channel; with `pinned_aod` every user's LOS angle is fixed instead of
/// drawn from U(0, 2π).
CMatrix sample_rician(double kappa, std::size_t k, std::size_t n_t, Rng& rng,
                      std::optional<double> pinned_aod = std::nullopt);

/// Circularly-symmetric complex Gaussian matrix with unit-variance entries.
CMatrix complex_gaussian(std::size_t rows, std::size_t cols, Rng& rng);

/// h/‖h‖_F with snr = ‖h‖_F² · 10^{ratio_db/10}. Throws DomainError for h = 0.
ChannelSample normalize_and_attach_snr(const CMatrix& h, double p_tot_over_sigma2_db);

}  // namespace uat::channels
