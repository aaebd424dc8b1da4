#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "uat/channels/channels.hpp"
#include "uat/channels/dataset.hpp"

namespace uat::channels {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("uat_test_" + name);
}

TEST(ArrayResponse, BroadsideIsAllOnes) {
    const CVector a = array_response(0.0, 4);
    for (Eigen::Index m = 0; m < 4; ++m) EXPECT_NEAR(std::abs(a[m] - 1.0), 0.0, 1e-15);
}

TEST(ArrayResponse, EndfireAlternates) {
    const CVector a = array_response(std::numbers::pi / 2, 2);
    EXPECT_NEAR(std::abs(a[0] - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(a[1] + 1.0), 0.0, 1e-15);
}

TEST(ArrayResponse, UnitModulus) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const CVector a = array_response(rng.uniform(0.0, 2 * std::numbers::pi), 16);
        for (Eigen::Index m = 0; m < a.size(); ++m) EXPECT_NEAR(std::abs(a[m]), 1.0, 1e-12);
    }
}

TEST(Sampler, RicianLineOfSightLimit) {
    Rng rng(2);
    const double phi = 0.7;
    const CMatrix h = sample_rician(1e12, 3, 8, rng, phi);
    const CVector a = array_response(phi, 8);
    for (Eigen::Index k = 0; k < 3; ++k) {
        EXPECT_LT((h.row(k).transpose() - a).norm() / a.norm(), 1e-5);
    }
    // Unpinned: each row is still a steering vector, so entries have unit modulus.
    const CMatrix free = sample(ChannelModelSpec{Family::Rician, 1e12}, 3, 8, rng);
    for (Eigen::Index i = 0; i < free.size(); ++i) {
        EXPECT_NEAR(std::abs(free(i)), 1.0, 1e-5);
    }
}

TEST(Sampler, RicianMeanMatchesLineOfSight) {
    Rng rng(3);
    const double kappa = 10.0;
    const double phi = 1.1;
    const std::size_t n_t = 4;
    const int draws = 100000;
    CVector acc = CVector::Zero(n_t);
    for (int i = 0; i < draws; ++i) acc += sample_rician(kappa, 1, n_t, rng, phi).row(0).transpose();
    acc /= draws;
    const CVector expected = std::sqrt(kappa / (kappa + 1.0)) * array_response(phi, n_t);
    EXPECT_LT((acc - expected).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Sampler, UncorrelatedCovarianceIsIdentity) {
    Rng rng(4);
    const ChannelSampler sampler(ChannelModelSpec::correlated(0.0, 0.0), 2, 4);
    const int n = 8;
    const int draws = 100000;
    CMatrix cov = CMatrix::Zero(n, n);
    for (int i = 0; i < draws; ++i) {
        const CMatrix h = sampler(rng);
        const CVector v = h.reshaped();
        cov += v * v.adjoint();
    }
    cov /= draws;
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
        EXPECT_NEAR(cov(i, i).real(), 1.0, 0.05);
        for (int j = 0; j < n; ++j) {
            if (i != j) off = std::max(off, std::abs(cov(i, j)));
        }
    }
    EXPECT_LT(off, 0.05);
}

TEST(Sampler, AntennaCovarianceConvergesToToeplitz) {
    Rng rng(5);
    const double rho_a = 0.6;
    const std::size_t n_t = 6;
    const ChannelSampler sampler(ChannelModelSpec::correlated(0.0, rho_a), 1, n_t);
    const int draws = 100000;
    CMatrix cov = CMatrix::Zero(n_t, n_t);
    for (int i = 0; i < draws; ++i) {
        const CVector h = sampler(rng).row(0).transpose();
        cov += h * h.adjoint();
    }
    cov /= draws;
    double dev = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n_t); ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n_t); ++j) {
            dev = std::max(dev, std::abs(cov(i, j) - std::pow(rho_a, std::abs(i - j))));
        }
    }
    EXPECT_LT(dev, 0.05);
}

TEST(Sampler, SinglePathSparseHasConstantModulusRows) {
    Rng rng(6);
    const CMatrix h = sample(ChannelModelSpec::sparse(1), 4, 16, rng);
    for (Eigen::Index k = 0; k < h.rows(); ++k) {
        const double first = std::abs(h(k, 0));
        for (Eigen::Index m = 1; m < h.cols(); ++m) EXPECT_NEAR(std::abs(h(k, m)), first, 1e-12);
    }
}

TEST(Sampler, UnitCorrelationRejected) {
    Rng rng(7);
    EXPECT_THROW(sample(ChannelModelSpec::correlated(1.0, 0.0), 2, 4, rng), Error);
    EXPECT_THROW(sample(ChannelModelSpec::correlated(0.0, 1.0), 2, 4, rng), Error);
    EXPECT_THROW(sample(ChannelModelSpec::sparse(0), 2, 4, rng), Error);
}

TEST(Sampler, NearUnitCorrelationStillSamples) {
    Rng rng(8);
    const CMatrix h = sample(ChannelModelSpec::correlated(0.999, 0.999), 4, 16, rng);
    EXPECT_TRUE(h.allFinite());
}

TEST(Sampler, AllFamiliesFinite) {
    Rng rng(9);
    for (const auto& spec : {ChannelModelSpec::rayleigh(), ChannelModelSpec::rician_db(10),
                             ChannelModelSpec::correlated(0.8, 0.4), ChannelModelSpec::sparse(3)}) {
        for (int i = 0; i < 100; ++i) {
            const CMatrix h = sample(spec, 4, 16, rng);
            EXPECT_TRUE(h.allFinite());
            EXPECT_NEAR(normalize_and_attach_snr(h, 10).h_norm.norm(), 1.0, 1e-9);
        }
    }
}

TEST(Normalize, SnrArithmetic) {
    CMatrix h = CMatrix::Zero(2, 2);
    h(0, 0) = 2.0;
    const ChannelSample s = normalize_and_attach_snr(h, 0.0);
    EXPECT_DOUBLE_EQ(s.snr, 4.0);
    EXPECT_NEAR(s.h_norm.norm(), 1.0, 1e-9);

    CMatrix unit = CMatrix::Zero(1, 2);
    unit(0, 1) = std::complex<double>(0.6, 0.8);
    EXPECT_NEAR(normalize_and_attach_snr(unit, 10.0).snr, 10.0, 1e-12);
}

TEST(Normalize, ZeroMatrixRejected) {
    EXPECT_THROW(normalize_and_attach_snr(CMatrix::Zero(2, 3), 0.0), DomainError);
}

TEST(Dataset, DeterministicGivenSeed) {
    const auto a = generate_dataset(ChannelModelSpec::rician_db(10), 4, 16, 50, {0, 20}, 42);
    const auto b = generate_dataset(ChannelModelSpec::rician_db(10), 4, 16, 50, {0, 20}, 42);
    EXPECT_EQ(a, b);
    const auto c = generate_dataset(ChannelModelSpec::rician_db(10), 4, 16, 50, {0, 20}, 43);
    EXPECT_NE(a.samples, c.samples);
}

TEST(Dataset, PrefixStableAcrossCounts) {
    // Per-index substreams: the first n samples do not depend on the total count.
    const auto small = generate_dataset(ChannelModelSpec::rayleigh(), 3, 8, 10, {0, 20}, 5);
    const auto large = generate_dataset(ChannelModelSpec::rayleigh(), 3, 8, 40, {0, 20}, 5);
    for (std::size_t i = 0; i < small.samples.size(); ++i) EXPECT_EQ(small.samples[i], large.samples[i]);
}

TEST(Dataset, SamplesRespectInvariantsAndSnrRange) {
    const auto d = generate_dataset(ChannelModelSpec::rayleigh(), 4, 16, 2000, {0, 20}, 1);
    EXPECT_EQ(d.samples.size(), 2000u);
    for (const auto& s : d.samples) {
        EXPECT_NEAR(s.h_norm.norm(), 1.0, 1e-9);
        EXPECT_GT(s.snr, 0.0);
        EXPECT_EQ(s.h_norm.rows(), 4);
        EXPECT_EQ(s.h_norm.cols(), 16);
    }
    EXPECT_THROW(generate_dataset(ChannelModelSpec::rayleigh(), 4, 16, 0, {0, 20}, 1), ConfigError);
}

TEST(DatasetFile, RoundTrip) {
    const auto d = generate_dataset(ChannelModelSpec::correlated(0.4, 0.2), 3, 8, 25, {0, 20}, 9);
    const auto path = temp_file("roundtrip.uatds");
    save_dataset(d, path);
    EXPECT_EQ(load_dataset(path), d);
    fs::remove(path);
}

TEST(DatasetFile, CrcCheckValue) {
    const std::string msg = "123456789";
    EXPECT_EQ(crc64(msg.data(), msg.size()), 0x995DC9BBDF1939FAULL);
}

class CorruptedFile : public ::testing::Test {
protected:
    void SetUp() override {
        const auto d = generate_dataset(ChannelModelSpec::rayleigh(), 2, 4, 5, {0, 20}, 3);
        save_dataset(d, path_);
        std::ifstream in(path_, std::ios::binary);
        bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    void TearDown() override { fs::remove(path_); }

    void write(const std::vector<char>& bytes) {
        std::ofstream out(path_, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }

    DatasetErrorKind load_error() {
        try {
            load_dataset(path_);
        } catch (const DatasetError& e) {
            return e.kind();
        }
        ADD_FAILURE() << "load succeeded";
        return DatasetErrorKind::Io;
    }

    fs::path path_ = temp_file("corrupt.uatds");
    std::vector<char> bytes_;
};

TEST_F(CorruptedFile, WrongMagic) {
    bytes_[3] = 'X';
    write(bytes_);
    EXPECT_EQ(load_error(), DatasetErrorKind::MalformedHeader);
}

TEST_F(CorruptedFile, GarbledHeaderJson) {
    bytes_[12] = '#';
    write(bytes_);
    EXPECT_EQ(load_error(), DatasetErrorKind::MalformedHeader);
}

TEST_F(CorruptedFile, TruncatedPayload) {
    bytes_.resize(bytes_.size() - 40);
    write(bytes_);
    EXPECT_EQ(load_error(), DatasetErrorKind::TruncatedPayload);
}

TEST_F(CorruptedFile, FlippedPayloadBit) {
    bytes_[bytes_.size() - 20] ^= 0x01;
    write(bytes_);
    EXPECT_EQ(load_error(), DatasetErrorKind::ChecksumMismatch);
}

TEST_F(CorruptedFile, MissingFile) {
    fs::remove(path_);
    EXPECT_EQ(load_error(), DatasetErrorKind::Io);
}

}  // namespace
}  // namespace uat::channels
