#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "uat/channels/channels.hpp"
#include "uat/error.hpp"
#include "uat/problems/precoding.hpp"
#include "uat/problems/toy.hpp"
#include "uat/rng.hpp"

using namespace uat;
using namespace uat::problems;
using adiff::Tape;
using adiff::Tensor;

namespace {

PrecoderPair random_pair(const PrecodingConfig& cfg, Rng& rng) {
    PrecoderPair p{Eigen::MatrixXd(cfg.n_t, cfg.n_rf), channels::complex_gaussian(cfg.n_rf, cfg.k, rng)};
    for (Eigen::Index i = 0; i < p.phases.size(); ++i) p.phases(i) = rng.uniform(-3.0, 3.0);
    return project_power(cfg, p);
}

ChannelSample random_sample(const PrecodingConfig& cfg, Rng& rng, double snr_db) {
    return channels::normalize_and_attach_snr(channels::complex_gaussian(cfg.k, cfg.n_t, rng), snr_db);
}

// Exhaustive search over the budget simplex for K = 2 or 3.
double grid_best(const Eigen::VectorXd& g, double budget, double step) {
    const auto steps = static_cast<int>(std::lround(budget / step));
    double best = 0.0;
    if (g.size() == 2) {
        for (int i = 0; i <= steps; ++i) {
            const double p0 = i * step;
            const double p1 = budget - p0;
            best = std::max(best, std::log2(1 + p0 * g[0]) + std::log2(1 + p1 * g[1]));
        }
    } else {
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; i + j <= steps; ++j) {
                const double p0 = i * step;
                const double p1 = j * step;
                const double p2 = budget - p0 - p1;
                best = std::max(best, std::log2(1 + p0 * g[0]) + std::log2(1 + p1 * g[1]) +
                                          std::log2(1 + p2 * g[2]));
            }
        }
    }
    return best;
}

}  // namespace

TEST(Rates, SingleUserUnitGainIsOneBit) {
    CMatrix h(1, 1);
    h(0, 0) = 1.0;
    CMatrix w(1, 1);
    w(0, 0) = 1.0;
    EXPECT_NEAR(rates_raw(h, w, 1.0)[0], 1.0, 1e-15);
}

TEST(Rates, VanishWhenSnrGoesToZero) {
    const auto cfg = PrecodingConfig::uniform(4, 2, 2, 0.5);
    Rng rng(3);
    const ChannelSample s = random_sample(cfg, rng, -200.0);
    const auto r = rates(cfg, s, random_pair(cfg, rng));
    EXPECT_LT(r.maxCoeff(), 1e-15);
}

TEST(Rates, OrthogonalUsersHaveNoInterference) {
    CMatrix h = CMatrix::Identity(2, 2);
    CMatrix w = CMatrix::Identity(2, 2) * std::sqrt(0.5);
    const auto r = rates_raw(h, w, 0.1);
    EXPECT_NEAR(r[0], std::log2(1.0 + 0.5 / 0.1), 1e-14);
    EXPECT_NEAR(r[1], r[0], 1e-15);
}

TEST(Rates, ConstraintPlusRateIsRequirement) {
    auto cfg = PrecodingConfig::uniform(6, 3, 3, 1.0);
    cfg.gamma = {0.5, 1.0, 2.5};
    Rng rng(9);
    const ChannelSample s = random_sample(cfg, rng, 10.0);
    const PrecoderPair y = random_pair(cfg, rng);
    const auto r = rates(cfg, s, y);
    const auto g = constraints_G(cfg, s, y);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(g[k] + r[k], cfg.gamma[static_cast<std::size_t>(k)]);
    EXPECT_DOUBLE_EQ(objective_F(cfg, s, y), -r.sum());
}

TEST(Rates, InfeasiblePowerRejected) {
    const auto cfg = PrecodingConfig::uniform(4, 2, 2, 0.5);
    Rng rng(1);
    PrecoderPair y = random_pair(cfg, rng);
    y.w_bb *= 1.1;
    EXPECT_THROW(rates(cfg, random_sample(cfg, rng, 0.0), y), DomainError);
}

TEST(Rates, CanonicalFormMatchesGeneralForm) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const CMatrix h = channels::complex_gaussian(cfg.k, cfg.n_t, rng) * rng.uniform(0.1, 10.0);
        const double p_tot = rng.uniform(0.01, 100.0);
        const double sigma2 = rng.uniform(1e-3, 10.0);
        const PrecoderPair unit = random_pair(cfg, rng);
        const CMatrix w = unit.w_rf() * unit.w_bb * std::sqrt(p_tot);
        const auto general = rates_raw(h, w, sigma2);

        const double db = 10.0 * std::log10(p_tot / sigma2);
        const auto canonical = rates(cfg, channels::normalize_and_attach_snr(h, db), unit);
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(general[k], canonical[k], 1e-10);
    }
}

TEST(Projection, HalvesDoublePower) {
    const auto cfg = PrecodingConfig::uniform(4, 2, 2, 0.5);
    Rng rng(4);
    PrecoderPair y = random_pair(cfg, rng);
    PrecoderPair big{y.phases, y.w_bb * 2.0};
    const PrecoderPair back = project_power(cfg, big);
    EXPECT_LT((back.w_bb - y.w_bb).norm(), 1e-14);
    EXPECT_LT((project_power(cfg, back).w_bb - back.w_bb).norm(), 1e-15);
}

TEST(Projection, ZeroPrecoderRejected) {
    const auto cfg = PrecodingConfig::uniform(4, 2, 2, 0.5);
    PrecoderPair y{Eigen::MatrixXd::Zero(4, 2), CMatrix::Zero(2, 2)};
    EXPECT_THROW(project_power(cfg, y), DomainError);
}

TEST(Projection, RealizedDecisionsAreFeasible) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    const PrecodingProblem prob(cfg);
    Rng rng(5);
    Tensor raw({64, prob.raw_output_dim()});
    for (double& v : raw.values()) v = rng.normal(0.0, 3.0);
    Tape tape;
    const Tensor y = prob.realize(tape.input(raw)).value();
    for (std::size_t n = 0; n < 64; ++n) {
        const PrecoderPair p = unpack_precoder(cfg, y, n);
        const CMatrix w_rf = p.w_rf();
        for (Eigen::Index i = 0; i < w_rf.size(); ++i) EXPECT_NEAR(std::abs(w_rf(i)), 1.0, 1e-12);
        EXPECT_NEAR((w_rf * p.w_bb).squaredNorm(), 1.0, 1e-9);
    }
}

TEST(Config, Validation) {
    EXPECT_THROW(PrecodingConfig::uniform(4, 5, 2, 1.0).validate(), ConfigError);
    EXPECT_THROW(PrecodingConfig::uniform(4, 2, 3, 1.0).validate(), ConfigError);
    EXPECT_THROW(PrecodingConfig::uniform(4, 2, 2, 0.0).validate(), ConfigError);
    auto cfg = PrecodingConfig::uniform(4, 2, 2, 1.0);
    cfg.gamma.pop_back();
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PrecodingProblem, TapeMatchesValuePath) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    const PrecodingProblem prob(cfg);
    Rng rng(21);
    std::vector<ChannelSample> samples;
    std::vector<PrecoderPair> pairs;
    for (int i = 0; i < 10; ++i) {
        samples.push_back(random_sample(cfg, rng, rng.uniform(-5.0, 20.0)));
        pairs.push_back(random_pair(cfg, rng));
    }
    Tape tape;
    const auto x = tape.input(pack_channels(samples));
    const auto y = tape.input(pack_precoders(cfg, pairs));
    const Tensor snr = pack_snr(samples);
    const Tensor r = prob.rates(x, y, snr).value();
    const Tensor f = prob.objective(x, y, snr).value();
    const Tensor g = prob.constraints(x, y, snr).value();
    ASSERT_EQ(g.shape(), (adiff::Shape{10, 3}));
    for (std::size_t n = 0; n < 10; ++n) {
        const auto ref = rates(cfg, samples[n], pairs[n]);
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_NEAR(r[n * 3 + k], ref[static_cast<Eigen::Index>(k)], 1e-12);
            EXPECT_NEAR(g[n * 3 + k], 1.0 - ref[static_cast<Eigen::Index>(k)], 1e-12);
        }
        EXPECT_NEAR(f[n], -ref.sum(), 1e-12);
    }
}

TEST(PrecodingProblem, PackRoundTrip) {
    const auto cfg = PrecodingConfig::uniform(4, 3, 2, 1.0);
    Rng rng(2);
    std::vector<ChannelSample> samples{random_sample(cfg, rng, 3.0), random_sample(cfg, rng, 7.0)};
    const Tensor x = pack_channels(samples);
    EXPECT_LT((unpack_channel(x, 1) - samples[1].h_norm).norm(), 1e-15);
    std::vector<PrecoderPair> pairs{random_pair(cfg, rng)};
    const PrecoderPair back = unpack_precoder(cfg, pack_precoders(cfg, pairs), 0);
    EXPECT_EQ(back.phases, pairs[0].phases);
    EXPECT_EQ(back.w_bb, pairs[0].w_bb);
}

TEST(PrecodingProblem, ProjectInputNormalizesEachSample) {
    const PrecodingProblem prob(PrecodingConfig::uniform(4, 2, 2, 1.0));
    Tensor x({3, 2, 4, 2});
    Rng rng(8);
    for (double& v : x.values()) v = rng.normal();
    const Tensor p = prob.project_input(x);
    for (std::size_t n = 0; n < 3; ++n) {
        double s = 0.0;
        for (std::size_t j = 0; j < 16; ++j) s += p[n * 16 + j] * p[n * 16 + j];
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
    EXPECT_THROW(prob.project_input(Tensor({1, 2, 4, 2})), DomainError);
}

TEST(WaterFilling, EqualGainsSplitEvenly) {
    const ToySolution s = toy_optimal({Eigen::Vector2d(1.0, 1.0), 2.0});
    EXPECT_NEAR(s.powers[0], 1.0, 1e-14);
    EXPECT_NEAR(s.powers[1], 1.0, 1e-14);
    EXPECT_NEAR(s.water_level, 2.0, 1e-14);
    EXPECT_NEAR(s.multiplier, 1.0 / (2.0 * std::numbers::ln2), 1e-14);
    const Eigen::VectorXd grad = toy_envelope_gradient({Eigen::Vector2d(1.0, 1.0), 2.0});
    EXPECT_NEAR(grad[0], 1.0 / (2.0 * std::numbers::ln2), 1e-14);
}

TEST(WaterFilling, WeakUserGetsNothing) {
    const ToyPowerProblem p{Eigen::Vector2d(10.0, 0.01), 0.1};
    const ToySolution s = toy_optimal(p);
    EXPECT_NEAR(s.powers[0], 0.1, 1e-14);
    EXPECT_EQ(s.powers[1], 0.0);
    EXPECT_EQ(toy_envelope_gradient(p)[1], 0.0);
}

TEST(WaterFilling, RejectsBadInput) {
    EXPECT_THROW(toy_optimal({Eigen::Vector2d(1.0, 0.0), 1.0}), ConfigError);
    EXPECT_THROW(toy_optimal({Eigen::Vector2d(1.0, 1.0), 0.0}), ConfigError);
    EXPECT_THROW(toy_optimal({Eigen::VectorXd(), 1.0}), ConfigError);
}

TEST(WaterFilling, MatchesGridSearch) {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const int k = trial % 2 == 0 ? 2 : 3;
        Eigen::VectorXd g(k);
        for (int i = 0; i < k; ++i) g[i] = std::exp(rng.uniform(-2.0, 2.0));
        const double budget = rng.uniform(0.2, 2.0);
        const double step = 1e-3;
        const double grid = grid_best(g, std::round(budget / step) * step, step);
        const ToySolution s = toy_optimal({g, std::round(budget / step) * step});
        EXPECT_GE(s.sum_rate, grid - 1e-12);
        EXPECT_NEAR(s.sum_rate, grid, 1e-3);
        EXPECT_NEAR(s.powers.sum(), std::round(budget / step) * step, 1e-12);
    }
}

TEST(WaterFilling, EnvelopeMatchesFiniteDifferenceOfResolvedOptimum) {
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + trial % 7;
        ToyPowerProblem p{Eigen::VectorXd(k), rng.uniform(0.1, 5.0)};
        for (int i = 0; i < k; ++i) p.gains[i] = std::exp(rng.uniform(-2.0, 2.0));
        const Eigen::VectorXd grad = toy_envelope_gradient(p);
        for (int i = 0; i < k; ++i) {
            const double h = 1e-6 * p.gains[i];
            ToyPowerProblem up = p;
            ToyPowerProblem dn = p;
            up.gains[i] += h;
            dn.gains[i] -= h;
            const double fd = (toy_optimal(up).sum_rate - toy_optimal(dn).sum_rate) / (2 * h);
            EXPECT_NEAR(grad[i], fd, 1e-3 * std::max(std::abs(fd), 1e-6)) << "trial " << trial;
        }
    }
}

TEST(WaterFillingProblem, TapeObjectiveAndConstraint) {
    const WaterFillingProblem prob(2, 2.0);
    Tape tape;
    const auto x = tape.input(Tensor({1, 2}, {1.0, 1.0}));
    const auto raw = tape.input(Tensor({1, 2}, {0.0, 0.0}));
    const auto y = prob.realize(raw);
    EXPECT_NEAR(y.value()[0], std::numbers::ln2, 1e-15);
    const Tensor f = prob.objective(x, y, Tensor({1}, 0.0)).value();
    EXPECT_NEAR(f[0], -2.0 * std::log2(1.0 + std::numbers::ln2), 1e-14);
    const Tensor g = prob.constraints(x, y, Tensor({1}, 0.0)).value();
    ASSERT_EQ(g.shape(), (adiff::Shape{1, 1}));
    EXPECT_NEAR(g[0], 2.0 * std::numbers::ln2 - 2.0, 1e-14);
    EXPECT_FALSE(prob.constraints_depend_on_input());
}
