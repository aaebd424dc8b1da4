#include "uat/channels/dataset.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace uat::channels {

namespace {

constexpr char kMagic[8] = {'U', 'A', 'T', 'D', 'S', '0', '0', '1'};

void put_u64(std::vector<char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<char>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

double get_f64(const char* p) { return std::bit_cast<double>(get_u64(p)); }

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

nlohmann::json header_json(const Dataset& d) {
    return {
        {"family", to_string(d.spec.family)},
        {"kappa", d.spec.kappa},
        {"rho_a", d.spec.rho_a},
        {"rho_u", d.spec.rho_u},
        {"n_paths", d.spec.n_paths},
        {"k", d.k},
        {"n_t", d.n_t},
        {"count", d.samples.size()},
        {"snr_range_db", {d.snr_range_db.first, d.snr_range_db.second}},
        {"seed", d.seed},
    };
}

[[noreturn]] void fail(DatasetErrorKind kind, const std::string& what) {
    throw DatasetError(kind, what);
}

}  // namespace

std::uint64_t crc64(const void* data, std::size_t size) {
    boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
    crc.process_bytes(data, size);
    return crc.checksum();
}

Dataset generate_dataset(const ChannelModelSpec& spec, std::size_t k, std::size_t n_t,
                         std::size_t count, std::pair<double, double> snr_range_db,
                         std::uint64_t seed) {
    if (count == 0) throw ConfigError("dataset count must be at least 1");
    if (snr_range_db.first > snr_range_db.second) throw ConfigError("snr range is reversed");
    const ChannelSampler sampler(spec, k, n_t);
    Dataset d{spec, k, n_t, seed, snr_range_db, {}};
    d.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = Rng::substream(seed, i);
        const double snr_db = rng.uniform(snr_range_db.first, snr_range_db.second);
        d.samples.push_back(normalize_and_attach_snr(sampler(rng), snr_db));
    }
    return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    const std::string header = header_json(d).dump();
    std::vector<char> payload;
    payload.reserve(d.samples.size() * (d.k * d.n_t * 2 + 1) * 8);
    for (const ChannelSample& s : d.samples) {
        if (static_cast<std::size_t>(s.h_norm.rows()) != d.k ||
            static_cast<std::size_t>(s.h_norm.cols()) != d.n_t) {
            throw ShapeError("dataset sample does not match the declared K x N_T");
        }
        for (Eigen::Index r = 0; r < s.h_norm.rows(); ++r) {
            for (Eigen::Index c = 0; c < s.h_norm.cols(); ++c) {
                put_f64(payload, s.h_norm(r, c).real());
                put_f64(payload, s.h_norm(r, c).imag());
            }
        }
        put_f64(payload, s.snr);
    }

    std::vector<char> out(kMagic, kMagic + 8);
    const auto len = static_cast<std::uint32_t>(header.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), payload.begin(), payload.end());
    put_u64(out, crc64(payload.data(), payload.size()));

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) fail(DatasetErrorKind::Io, "cannot open " + path.string() + " for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) fail(DatasetErrorKind::Io, "write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) fail(DatasetErrorKind::Io, "cannot open " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        fail(DatasetErrorKind::MalformedHeader, "malformed header: bad magic in " + path.string());
    }
    const std::uint32_t header_len = get_u32(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
        fail(DatasetErrorKind::MalformedHeader, "malformed header: length exceeds file size");
    }

    Dataset d;
    std::size_t count = 0;
    try {
        const auto h = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
        d.spec.family = parse_family(h.at("family").get<std::string>());
        d.spec.kappa = h.at("kappa").get<double>();
        d.spec.rho_a = h.at("rho_a").get<double>();
        d.spec.rho_u = h.at("rho_u").get<double>();
        d.spec.n_paths = h.at("n_paths").get<int>();
        d.k = h.at("k").get<std::size_t>();
        d.n_t = h.at("n_t").get<std::size_t>();
        count = h.at("count").get<std::size_t>();
        const auto range = h.at("snr_range_db");
        d.snr_range_db = {range.at(0).get<double>(), range.at(1).get<double>()};
        d.seed = h.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(DatasetErrorKind::MalformedHeader, std::string("malformed header: ") + e.what());
    } catch (const ConfigError& e) {
        fail(DatasetErrorKind::MalformedHeader, std::string("malformed header: ") + e.what());
    }
    if (d.k == 0 || d.n_t == 0) fail(DatasetErrorKind::MalformedHeader, "malformed header: zero dimension");

    const std::size_t per_sample = (d.k * d.n_t * 2 + 1) * 8;
    const std::size_t payload_begin = 12 + header_len;
    const std::size_t payload_size = count * per_sample;
    const std::size_t available = bytes.size() - payload_begin;
    if (available < payload_size + 8) {
        fail(DatasetErrorKind::TruncatedPayload,
             "truncated payload: header declares " + std::to_string(count) + " samples");
    }
    if (available > payload_size + 8) {
        fail(DatasetErrorKind::MalformedHeader, "malformed header: trailing bytes after checksum");
    }
    const char* payload = bytes.data() + payload_begin;
    if (get_u64(payload + payload_size) != crc64(payload, payload_size)) {
        fail(DatasetErrorKind::ChecksumMismatch, "checksum mismatch in " + path.string());
    }

    d.samples.resize(count);
    const char* p = payload;
    for (ChannelSample& s : d.samples) {
        s.h_norm.resize(static_cast<Eigen::Index>(d.k), static_cast<Eigen::Index>(d.n_t));
        for (Eigen::Index r = 0; r < s.h_norm.rows(); ++r) {
            for (Eigen::Index c = 0; c < s.h_norm.cols(); ++c) {
                s.h_norm(r, c) = {get_f64(p), get_f64(p + 8)};
                p += 16;
            }
        }
        s.snr = get_f64(p);
        p += 8;
    }
    return d;
}

}  // namespace uat::channels
