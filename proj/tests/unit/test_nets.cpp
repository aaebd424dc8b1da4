#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "uat/error.hpp"
#include "uat/nets/checkpoint.hpp"
#include "uat/nets/network.hpp"
#include "uat/rng.hpp"

using namespace uat;
using namespace uat::nets;
using adiff::Tape;
using adiff::Tensor;
using problems::PrecodingConfig;
using problems::PrecodingProblem;

namespace {

NetworkSpec gnn(Activation act = Activation::Relu) { return {Arch::EdgeGNN, 2, {8, 8}, act}; }
NetworkSpec mlp(Activation act = Activation::Tanh) { return {Arch::MLP, 2, {16, 16}, act}; }

channels::ChannelSample random_sample(const PrecodingConfig& cfg, Rng& rng) {
    return channels::normalize_and_attach_snr(channels::complex_gaussian(cfg.k, cfg.n_t, rng),
                                              rng.uniform(0.0, 20.0));
}

double sum_rate(const PrecodingConfig& cfg, const channels::ChannelSample& s,
                const problems::PrecoderPair& y) {
    return problems::rates(cfg, s, y).sum();
}

}  // namespace

TEST(Encode, SnrFeature) {
    EXPECT_DOUBLE_EQ(snr_feature(100.0), 1.0);
    EXPECT_DOUBLE_EQ(snr_feature(1.0), 0.0);
    EXPECT_THROW(snr_feature(0.0), DomainError);
}

TEST(Encode, Shapes) {
    Rng rng(1);
    const auto cfg = PrecodingConfig::uniform(16, 6, 4, 1.0);
    const auto s = random_sample(cfg, rng);
    EXPECT_EQ(encode_input(s, Arch::MLP).shape(), (adiff::Shape{129}));
    EXPECT_EQ(encode_input(s, Arch::EdgeGNN).shape(), (adiff::Shape{4, 16, 3}));
}

TEST(Encode, RealChannelHasZeroImaginaryFeatures) {
    channels::CMatrix h(2, 3);
    h << 1, 2, 3, 4, 5, 6;
    const auto s = channels::normalize_and_attach_snr(h, 0.0);
    const Tensor t = encode_input(s, Arch::MLP);
    for (std::size_t i = 1; i < 12; i += 2) EXPECT_EQ(t[i], 0.0);
    EXPECT_NEAR(t[12], snr_feature(s.snr), 1e-15);
    const Tensor g = encode_input(s, Arch::EdgeGNN);
    for (std::size_t e = 0; e < 6; ++e) {
        EXPECT_EQ(g[e * 3 + 1], 0.0);
        EXPECT_EQ(g[e * 3 + 2], t[12]);
    }
}

TEST(Spec, WidthsMustMatchLayers) {
    NetworkSpec s{Arch::MLP, 3, {8, 8}, Activation::Relu};
    EXPECT_THROW(s.validate(), ConfigError);
    EXPECT_THROW(Network(s, Role::Policy, Layout::plain(2, 2)), ConfigError);
    EXPECT_THROW(Network(gnn(), Role::Policy, Layout::plain(2, 2)), ConfigError);
}

TEST(Spec, NameRoundTrip) {
    EXPECT_EQ(parse_arch(to_string(Arch::EdgeGNN)), Arch::EdgeGNN);
    EXPECT_EQ(parse_activation("tanh"), Activation::Tanh);
    EXPECT_THROW(parse_arch("cnn"), ConfigError);
}

TEST(Policy, OutputsAreFeasibleForRandomWeights) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    const PrecodingProblem prob(cfg);
    Rng rng(2);
    for (const NetworkSpec& spec : {gnn(), mlp()}) {
        const Network net(spec, Role::Policy, Layout::precoding_policy(cfg));
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const NetworkWeights w = net.init(seed);
            ASSERT_TRUE(w.all_finite());
            const auto y = forward_policy(net, w, prob, random_sample(cfg, rng));
            const auto w_rf = y.w_rf();
            for (Eigen::Index i = 0; i < w_rf.size(); ++i) EXPECT_NEAR(std::abs(w_rf(i)), 1.0, 1e-12);
            EXPECT_NEAR((w_rf * y.w_bb).squaredNorm(), 1.0, 1e-9);
        }
    }
}

TEST(Policy, WrongWeightsRejected) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    const Network a(gnn(), Role::Policy, Layout::precoding_policy(cfg));
    const Network b(mlp(), Role::Policy, Layout::precoding_policy(cfg));
    EXPECT_THROW(b.check(a.init(0)), ShapeError);
    NetworkWeights w = a.init(0);
    w.tensors[0] = Tensor({1, 1});
    EXPECT_THROW(a.check(w), ShapeError);
}

TEST(Policy, EdgeGnnIsUserPermutationEquivariant) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    const PrecodingProblem prob(cfg);
    const Network net(gnn(Activation::Tanh), Role::Policy, Layout::precoding_policy(cfg));
    const NetworkWeights w = net.init(11);
    Rng rng(12);
    const std::vector<Eigen::Index> perm{2, 0, 1};
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_sample(cfg, rng);
        channels::ChannelSample p = s;
        for (Eigen::Index k = 0; k < 3; ++k) p.h_norm.row(k) = s.h_norm.row(perm[static_cast<std::size_t>(k)]);
        const auto y = forward_policy(net, w, prob, s);
        const auto yp = forward_policy(net, w, prob, p);
        // RF chain k < K travels with user k; the spare chain stays put
        std::vector<Eigen::Index> chain{0, 1, 2, 3};
        for (Eigen::Index k = 0; k < 3; ++k) chain[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(k)];
        for (Eigen::Index r = 0; r < 4; ++r) {
            const Eigen::Index src = chain[static_cast<std::size_t>(r)];
            EXPECT_LT((yp.phases.col(r) - y.phases.col(src)).norm(), 1e-12);
            for (Eigen::Index k = 0; k < 3; ++k) {
                EXPECT_LT(std::abs(yp.w_bb(r, k) - y.w_bb(src, perm[static_cast<std::size_t>(k)])), 1e-10);
            }
        }
        EXPECT_NEAR(sum_rate(cfg, s, y), sum_rate(cfg, p, yp), 1e-9);
    }
}

TEST(Multiplier, NonnegativeAndSized) {
    const auto cfg = PrecodingConfig::uniform(16, 6, 4, 1.0);
    Rng rng(3);
    for (const NetworkSpec& spec : {gnn(), mlp()}) {
        const Network net(spec, Role::Multiplier, Layout::precoding_multiplier(cfg));
        const auto lam = forward_multiplier(net, net.init(4), random_sample(cfg, rng));
        ASSERT_EQ(lam.size(), 4);
        EXPECT_GE(lam.minCoeff(), 0.0);
    }
}

TEST(Multiplier, ZeroHeadGivesLn2) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    Rng rng(5);
    for (const NetworkSpec& spec : {gnn(), mlp()}) {
        const Network net(spec, Role::Multiplier, Layout::precoding_multiplier(cfg));
        NetworkWeights w = net.init(1);
        for (std::size_t i = w.tensors.size() - 2; i < w.tensors.size(); ++i) {
            for (double& v : w.tensors[i].values()) v = 0.0;
        }
        const auto lam = forward_multiplier(net, w, random_sample(cfg, rng));
        for (Eigen::Index k = 0; k < lam.size(); ++k) EXPECT_NEAR(lam[k], std::numbers::ln2, 1e-15);
    }
}

TEST(InputGradient, ZeroCotangentGivesZero) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    const Network net(gnn(), Role::Policy, Layout::precoding_policy(cfg));
    Rng rng(6);
    std::vector<channels::ChannelSample> s{random_sample(cfg, rng)};
    const Tensor g = grad_output_wrt_input(net, net.init(0), problems::pack_channels(s),
                                           problems::pack_snr(s), Tensor({1, net.layout().outputs}));
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(InputGradient, LinearPolicyGivesTransposedWeights) {
    const auto cfg = PrecodingConfig::uniform(4, 2, 2, 1.0);
    const Network net({Arch::MLP, 0, {}, Activation::Relu}, Role::Policy, Layout::precoding_policy(cfg));
    const NetworkWeights w = net.init(9);
    const Tensor& weight = w.tensors[0];  // [2·K·N_T + 1, D]
    const std::size_t d = net.layout().outputs;
    Rng rng(7);
    std::vector<channels::ChannelSample> s{random_sample(cfg, rng)};
    Tensor c({1, d});
    for (double& v : c.values()) v = rng.normal();
    const Tensor g = grad_output_wrt_input(net, w, problems::pack_channels(s), problems::pack_snr(s), c);
    ASSERT_EQ(g.size(), 16u);
    for (std::size_t i = 0; i < 16; ++i) {
        double expect = 0.0;
        for (std::size_t j = 0; j < d; ++j) expect += weight[i * d + j] * c[j];
        EXPECT_NEAR(g[i], expect, 1e-14);
    }
}

TEST(InputGradient, MatchesDirectionalFiniteDifferences) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    Rng rng(8);
    for (const NetworkSpec& spec : {gnn(Activation::Tanh), mlp()}) {
        const Network net(spec, Role::Policy, Layout::precoding_policy(cfg));
        const NetworkWeights w = net.init(10);
        std::vector<channels::ChannelSample> s{random_sample(cfg, rng)};
        const Tensor x = problems::pack_channels(s);
        const Tensor snr = problems::pack_snr(s);
        Tensor c({1, net.layout().outputs});
        for (double& v : c.values()) v = rng.normal();
        const Tensor g = grad_output_wrt_input(net, w, x, snr, c);

        auto value = [&](const Tensor& at) {
            Tape tape;
            const auto p = net.bind(tape, w, false);
            const Tensor out = net.forward(p, tape.constant(at), snr).value();
            return std::inner_product(out.values().begin(), out.values().end(), c.values().begin(), 0.0);
        };
        for (int dir = 0; dir < 10; ++dir) {
            Tensor v(x.shape());
            for (double& e : v.values()) e = rng.normal();
            const double h = 1e-5;
            Tensor up = x;
            Tensor dn = x;
            for (std::size_t i = 0; i < x.size(); ++i) {
                up[i] += h * v[i];
                dn[i] -= h * v[i];
            }
            const double fd = (value(up) - value(dn)) / (2 * h);
            const double an = std::inner_product(g.values().begin(), g.values().end(), v.values().begin(), 0.0);
            EXPECT_LT(std::abs(fd - an) / (std::abs(an) + 1e-12), 1e-4) << to_string(spec.arch);
        }
    }
}

TEST(Checkpoint, RoundTripAndCorruption) {
    const auto cfg = PrecodingConfig::uniform(8, 4, 3, 1.0);
    const Network pol(gnn(), Role::Policy, Layout::precoding_policy(cfg));
    const Network mul(mlp(), Role::Multiplier, Layout::precoding_multiplier(cfg));
    Checkpoint c{gnn(), pol.init(1), mlp(), mul.init(1), 7, 1, {{"method", "uat"}}};
    const auto path = std::filesystem::temp_directory_path() / "uat_test_ckpt.bin";
    save_checkpoint(c, path);
    const Checkpoint back = load_checkpoint(path);
    EXPECT_EQ(back.policy, c.policy);
    EXPECT_EQ(back.multiplier, c.multiplier);
    EXPECT_EQ(back.policy_spec, c.policy_spec);
    EXPECT_EQ(back.multiplier_spec, c.multiplier_spec);
    EXPECT_EQ(back.epoch, 7u);
    EXPECT_EQ(back.meta.at("method"), "uat");

    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 3);
    EXPECT_THROW(load_checkpoint(path), IoError);
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << "NOTACKPTxxxx";
    }
    EXPECT_THROW(load_checkpoint(path), IoError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), IoError);
}
