#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "uat/channels/channels.hpp"
#include "uat/error.hpp"
#include "uat/eval/metrics.hpp"
#include "uat/eval/reference.hpp"
#include "uat/eval/sweep.hpp"
#include "uat/nets/checkpoint.hpp"
#include "uat/rng.hpp"

using namespace uat;
using namespace uat::eval;
using adiff::Tensor;

namespace {

Tensor vec(std::initializer_list<double> v) {
    Tensor t({v.size()});
    std::copy(v.begin(), v.end(), t.values().begin());
    return t;
}

Tensor mat(std::size_t r, std::size_t c, std::initializer_list<double> v) {
    Tensor t({r, c});
    std::copy(v.begin(), v.end(), t.values().begin());
    return t;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("uat_eval_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST(Metrics, AllViolating) {
    const auto r = asr_vr(vec({-3, -4}), mat(2, 2, {0.5, -1, -1, 0.1}), 1e-6);
    EXPECT_EQ(r.asr, 0.0);
    EXPECT_EQ(r.vr, 1.0);
    EXPECT_EQ(r.n_samples, 2u);
}

TEST(Metrics, NoViolationConstantRate) {
    const auto r = asr_vr(vec({-5, -5, -5}), mat(3, 1, {-1, -0.2, 0}), 1e-6);
    EXPECT_DOUBLE_EQ(r.asr, 5.0);
    EXPECT_EQ(r.vr, 0.0);
}

TEST(Metrics, DegenerateTolerance) {
    Rng rng(3);
    Tensor f({50});
    Tensor g({50, 3});
    double mean = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        f[i] = -rng.uniform(1, 10);
        mean += -f[i] / 50.0;
        for (std::size_t c = 0; c < 3; ++c) g[i * 3 + c] = rng.uniform(-2, 2);
    }
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_NEAR(asr_vr(f, g, inf).asr, mean, 1e-12);
    EXPECT_EQ(asr_vr(f, g, inf).vr, 0.0);
    EXPECT_EQ(asr_vr(f, g, -inf).asr, 0.0);
    EXPECT_EQ(asr_vr(f, g, -inf).vr, 1.0);
}

TEST(Metrics, BoundaryUsesStrictComparison) {
    // R = γ − τ exactly is not a violation; slightly below is
    EXPECT_EQ(asr_vr(vec({-2}), mat(1, 1, {1e-6}), 1e-6).vr, 0.0);
    EXPECT_EQ(asr_vr(vec({-2}), mat(1, 1, {1.1e-6}), 1e-6).vr, 1.0);
}

TEST(Metrics, EmptyRejected) {
    EXPECT_THROW(asr_vr(Tensor({0}), Tensor({0, 1}), 1e-6), ConfigError);
}

TEST(Metrics, AsrTermsAndBootstrap) {
    const auto r = asr_vr(vec({-3, -4, -5}), mat(3, 1, {-1, 1, -1}), 1e-6, true);
    const Eigen::VectorXd t = asr_terms(r);
    EXPECT_EQ(t, Eigen::Vector3d(3, 0, 5));
    EXPECT_NEAR(t.mean(), r.asr, 1e-15);

    Rng rng(5);
    Eigen::VectorXd a(400), b(400);
    for (int i = 0; i < 400; ++i) {
        b[i] = rng.normal();
        a[i] = b[i] + 0.5 + 0.1 * rng.normal();
    }
    const auto ci = paired_bootstrap(a, b, 1000, 9);
    EXPECT_NEAR(ci.mean, (a - b).mean(), 1e-12);
    EXPECT_LT(ci.lo, ci.mean);
    EXPECT_GT(ci.hi, ci.mean);
    EXPECT_GT(ci.lo, 0.4);
    EXPECT_LT(ci.hi, 0.6);
    const auto again = paired_bootstrap(a, b, 1000, 9);
    EXPECT_EQ(again.lo, ci.lo);
    EXPECT_EQ(again.hi, ci.hi);
}

TEST(Reference, SingleUserMatchedFilter) {
    Rng rng(1);
    for (double db : {0.0, 10.0, 20.0}) {
        const auto s = channels::normalize_and_attach_snr(channels::complex_gaussian(1, 8, rng), db);
        const Eigen::VectorXd r = zf_rates(s);
        EXPECT_NEAR(r[0], std::log2(1.0 + s.snr), 1e-10);
        const auto w = zf_precoder(s.h_norm);
        EXPECT_NEAR(std::abs((s.h_norm.conjugate() * w)(0, 0)), 1.0, 1e-10);
    }
}

TEST(Reference, OrthogonalUsersNoInterference) {
    channels::CMatrix h = channels::CMatrix::Zero(3, 6);
    h(0, 0) = {0.6, 0.0};
    h(1, 2) = {0.0, 0.5};
    h(2, 4) = {std::sqrt(0.5 * 0.61), std::sqrt(0.5 * 0.61)};
    h /= h.norm();
    const auto w = zf_precoder(h);
    const channels::CMatrix gains = h.conjugate() * w;
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < 3; ++i) {
            if (i != k) EXPECT_LT(std::abs(gains(k, i)), 1e-10);
        }
    }
}

TEST(Reference, RandomInterferenceAndPower) {
    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        const auto s = channels::normalize_and_attach_snr(channels::complex_gaussian(4, 16, rng), 10.0);
        const auto w = zf_precoder(s.h_norm);
        EXPECT_NEAR(w.squaredNorm(), 1.0, 1e-12);
        for (int k = 0; k < 4; ++k) {
            EXPECT_NEAR(w.col(k).squaredNorm(), 0.25, 1e-12);
            for (int i = 0; i < 4; ++i) {
                // direct evaluation of h_kᴴ w_i
                std::complex<double> acc = 0.0;
                for (int m = 0; m < 16; ++m) acc += std::conj(s.h_norm(k, m)) * w(m, i);
                if (i != k) EXPECT_LT(std::abs(acc), 1e-8);
            }
        }
    }
}

TEST(Reference, RankDeficientHandled) {
    channels::CMatrix h = channels::CMatrix::Zero(2, 4);
    h.row(0) << 1.0, 1.0, 0.0, 0.0;
    h.row(1) = h.row(0);
    h /= h.norm();
    const auto w = zf_precoder(h);
    EXPECT_TRUE(w.allFinite());
    EXPECT_THROW(zf_precoder(channels::CMatrix::Ones(5, 4)), ConfigError);
}

TEST(Sweep, PresetsMatchGrids) {
    const auto ric = preset("rician");
    ASSERT_EQ(ric.size(), 5u);
    EXPECT_EQ(ric[2].param_value, 10.0);
    EXPECT_NEAR(ric[2].model.kappa, 10.0, 1e-12);
    const auto cor = preset("correlated");
    ASSERT_EQ(cor.size(), 8u);
    EXPECT_EQ(cor[3].param_name, "rho_u");
    EXPECT_EQ(cor[3].model.rho_u, 0.8);
    EXPECT_EQ(cor[3].model.rho_a, 0.0);
    EXPECT_EQ(cor[4].param_name, "rho_a");
    EXPECT_EQ(cor[4].model.rho_u, 0.0);
    const auto sp = preset("sparse");
    ASSERT_EQ(sp.size(), 4u);
    EXPECT_EQ(sp.back().model.n_paths, 2);
    EXPECT_THROW(preset("urban"), ConfigError);
}

TEST(Sweep, MissingCheckpointListedAndDeterministic) {
    const auto dir = temp_dir("sweep");
    const auto cfg = problems::PrecodingConfig::uniform(8, 4, 3, 1.0);
    const nets::NetworkSpec spec{nets::Arch::EdgeGNN, 1, {8}, nets::Activation::Relu};
    const nets::Network pol(spec, nets::Role::Policy, nets::Layout::precoding_policy(cfg));
    const nets::Network mul(spec, nets::Role::Multiplier, nets::Layout::precoding_multiplier(cfg));
    nets::Checkpoint ck{spec, pol.init(4), spec, mul.init(4), 3, 4, {{"method", "pdl"}, {"precoding", to_json(cfg)}}};
    nets::save_checkpoint(ck, dir / "a.ckpt");

    SweepSpec s;
    s.tests = preset("sparse");
    s.n_test = 20;
    s.methods = {{"", "", dir / "a.ckpt"}, {"gnn", "uat", dir / "missing.ckpt"}};
    const auto r = ood_sweep(cfg, s);
    ASSERT_EQ(r.absent.size(), 1u);
    EXPECT_EQ(r.absent[0].method, "uat");
    ASSERT_EQ(r.rows.size(), 8u);
    EXPECT_EQ(r.rows[0].method, "reference");
    EXPECT_EQ(r.rows[0].asr_rel_reference, 1.0);
    EXPECT_EQ(r.rows[1].model, "edge_gnn");
    EXPECT_EQ(r.rows[1].method, "pdl");
    for (const auto& row : r.rows) {
        EXPECT_GE(row.vr, 0.0);
        EXPECT_LE(row.vr, 1.0);
        EXPECT_GE(row.asr, 0.0);
    }

    const auto again = ood_sweep(cfg, s);
    EXPECT_EQ(sweep_csv(r), sweep_csv(again));
    const std::string csv = sweep_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "model,method,family,param_name,param_value,snr_db,n_test,asr_bps_hz,vr,asr_rel_reference");
    const std::string md = sweep_markdown(r);
    EXPECT_NE(md.find("| model | method | n_paths=5 |"), std::string::npos);
    EXPECT_NE(md.find("missing.ckpt"), std::string::npos);

    s.methods.clear();
    EXPECT_THROW(ood_sweep(cfg, s), ConfigError);
}

TEST(Sweep, ConfigMismatchRejected) {
    const auto dir = temp_dir("mismatch");
    const auto cfg = problems::PrecodingConfig::uniform(8, 4, 3, 1.0);
    const auto other = problems::PrecodingConfig::uniform(8, 4, 3, 2.0);
    const nets::NetworkSpec spec{nets::Arch::MLP, 1, {8}, nets::Activation::Tanh};
    const nets::Network pol(spec, nets::Role::Policy, nets::Layout::precoding_policy(cfg));
    const nets::Network mul(spec, nets::Role::Multiplier, nets::Layout::precoding_multiplier(cfg));
    nets::Checkpoint ck{spec, pol.init(1), spec, mul.init(1), 0, 1, {{"precoding", to_json(other)}}};
    nets::save_checkpoint(ck, dir / "b.ckpt");
    SweepSpec s;
    s.tests = preset("rayleigh");
    s.n_test = 5;
    s.methods = {{"", "", dir / "b.ckpt"}};
    EXPECT_THROW(ood_sweep(cfg, s), ConfigError);
}

TEST(Sweep, EpochCurves) {
    const auto dir = temp_dir("curves");
    std::ofstream(dir / "log.jsonl") << R"({"epoch":1,"method":"pdl","mean_lagrangian":-1.5,"mean_F":-2,"id_asr":2,"id_vr":0.25,"updates_so_far":10,"wall_ms":3})"
                                     << "\n";
    const auto csv = epoch_curves_csv({{"run1", dir / "log.jsonl"}});
    EXPECT_EQ(csv, "run,epoch,method,mean_lagrangian,mean_F,id_asr,id_vr,updates_so_far\nrun1,1,pdl,-1.5,-2,2,0.25,10\n");
    EXPECT_THROW(epoch_curves_csv({{"x", dir / "nope.jsonl"}}), IoError);
}

TEST(Sweep, PrecodingJsonRoundTrip) {
    const auto cfg = problems::PrecodingConfig::uniform(16, 6, 4, 1.0);
    const auto back = precoding_config_from_json(to_json(cfg));
    EXPECT_EQ(back.n_t, 16u);
    EXPECT_EQ(back.n_rf, 6u);
    EXPECT_EQ(back.gamma, cfg.gamma);
    EXPECT_THROW(precoding_config_from_json(nlohmann::json{{"n_t", 2}}), ConfigError);
}
