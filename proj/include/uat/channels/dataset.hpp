#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "uat/channels/channels.hpp"
#include "uat/error.hpp"

namespace uat::channels {

struct Dataset {
    ChannelModelSpec spec;
    std::size_t k = 0;
    std::size_t n_t = 0;
    std::uint64_t seed = 0;
    std::pair<double, double> snr_range_db{0.0, 0.0};
    std::vector<ChannelSample> samples;

    bool operator==(const Dataset&) const = default;
};

/// Sample i is drawn from the substream (seed, i): first its P_tot/σ² in dB,
/// uniform over snr_range_db, then the channel.
Dataset generate_dataset(const ChannelModelSpec& spec, std::size_t k, std::size_t n_t,
                         std::size_t count, std::pair<double, double> snr_range_db,
                         std::uint64_t seed);

enum class DatasetErrorKind { Io, MalformedHeader, TruncatedPayload, ChecksumMismatch };

class DatasetError : public Error {
public:
    DatasetError(DatasetErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    DatasetErrorKind kind() const noexcept { return kind_; }

private:
    DatasetErrorKind kind_;
};

/// File layout: magic "UATDS001"; u32 LE header length; JSON header; per
/// sample K·N_T interleaved (re, im) f64 LE values row-major then the snr as
/// f64 LE; trailing u64 LE CRC-64/XZ of the payload.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// CRC-64/XZ (ECMA-182 polynomial, reflected, all-ones init and xor-out).
std::uint64_t crc64(const void* data, std::size_t size);

}  // namespace uat::channels
