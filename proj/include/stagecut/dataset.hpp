#pragma once

// The empirical dataset {y_i} defining the multi-Dirac data distribution:
// bit-exact CIFAR-10 binary ingestion, CSV ingestion, synthetic cluster
// generation for tests, and seeded subsampling for reduced-scale runs.
// Datasets are immutable after construction and shareable across threads.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stagecut/error.hpp"
#include "stagecut/rng.hpp"

namespace stagecut {

class Dataset {
public:
    Dataset(std::vector<double> flat, std::size_t dim, std::pair<double, double> range,
            std::string source)
        : flat_(std::move(flat)), dim_(dim), range_(range), source_(std::move(source)) {
        if (dim_ < 1) throw std::invalid_argument("Dataset: dimension must be >= 1");
        if (flat_.empty() || flat_.size() % dim_ != 0)
            throw std::invalid_argument("Dataset: flat size must be a nonzero multiple of dim");
        sq_norms_.resize(size());
        for (std::size_t i = 0; i < size(); ++i) {
            const double* p = point(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < dim_; ++j) acc += p[j] * p[j];
            sq_norms_[i] = acc;
        }
    }

    std::size_t size() const { return flat_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    const double* point(std::size_t i) const { return flat_.data() + i * dim_; }
    const double* data() const { return flat_.data(); }
    const std::vector<double>& sq_norms() const { return sq_norms_; }
    std::pair<double, double> range() const { return range_; }
    const std::string& source() const { return source_; }

    // FNV-1a over the raw coordinate bytes; combined with (N, n) this is the
    // dataset fingerprint recorded in output sidecars.
    std::uint64_t checksum() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        const auto* bytes = reinterpret_cast<const unsigned char*>(flat_.data());
        for (std::size_t i = 0; i < flat_.size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
        return h;
    }

private:
    std::vector<double> flat_;
    std::size_t dim_;
    std::pair<double, double> range_;
    std::string source_;
    std::vector<double> sq_norms_;
};

namespace detail {

inline std::pair<double, double> value_range(const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

} // namespace detail

// CIFAR-10 binary batches: records of 3073 bytes, byte 0 the label (discarded),
// bytes 1..3072 channel-planar pixels mapped u8 -> value/255 into [0,1].
// Records keep file order; files concatenate in argument order.
inline Dataset load_cifar10(const std::vector<std::string>& paths) {
    if (paths.empty()) throw std::invalid_argument("load_cifar10: empty file list");
    constexpr std::size_t record = 3073, pixels = 3072;
    std::vector<double> flat;
    std::string source;
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("load_cifar10: cannot open " + path);
        std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
        if (bytes.size() % record != 0)
            throw FormatError("load_cifar10: " + path + " length " +
                              std::to_string(bytes.size()) + " leaves residue " +
                              std::to_string(bytes.size() % record) + " bytes (record size 3073)");
        const std::size_t n_rec = bytes.size() / record;
        flat.reserve(flat.size() + n_rec * pixels);
        for (std::size_t r = 0; r < n_rec; ++r) {
            const unsigned char* rec = bytes.data() + r * record;
            for (std::size_t kpix = 0; kpix < pixels; ++kpix)
                flat.push_back(static_cast<double>(rec[1 + kpix]) / 255.0);
        }
        if (!source.empty()) source += ",";
        source += path;
    }
    if (flat.empty()) throw FormatError("load_cifar10: no records found");
    return Dataset(std::move(flat), pixels, {0.0, 1.0}, "cifar10:" + source);
}

// CSV with a header row naming n columns; every subsequent row holds n decimal
// numbers. Declared range is [min, max] over all values.
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("load_csv: " + path + " is empty");

    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = s.find(',', start);
            std::string f = s.substr(start, comma == std::string::npos ? comma : comma - start);
            while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
            while (!f.empty() && f.front() == ' ') f.erase(f.begin());
            fields.push_back(std::move(f));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return fields;
    };

    const std::size_t n = split(line).size();
    std::vector<double> flat;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
        ++row;
        const auto fields = split(line);
        if (fields.size() != n)
            throw FormatError("load_csv: row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(n));
        for (std::size_t c = 0; c < n; ++c) {
            double v = 0.0;
            const auto& f = fields[c];
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size())
                throw FormatError("load_csv: non-numeric cell at row " + std::to_string(row) +
                                  ", column " + std::to_string(c) + ": '" + f + "'");
            flat.push_back(v);
        }
    }
    if (flat.empty()) throw FormatError("load_csv: " + path + " has no data rows");
    const auto range = detail::value_range(flat);
    return Dataset(std::move(flat), n, range, "csv:" + path);
}

inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_csv: cannot open " + path + " for writing");
    for (std::size_t c = 0; c < d.dim(); ++c) out << (c ? ",col_" : "col_") << c;
    out << '\n';
    char buf[40];
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double* p = d.point(i);
        for (std::size_t c = 0; c < d.dim(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", p[c]);
            if (c) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

// Gaussian blobs around the given centers; deterministic in the seed, and
// spread = 0 reproduces the centers exactly.
inline Dataset synth_clusters(const std::vector<std::vector<double>>& centers,
                              std::size_t per_center, double spread, std::uint64_t seed) {
    if (centers.empty()) throw std::invalid_argument("synth_clusters: empty centers");
    if (per_center < 1) throw std::invalid_argument("synth_clusters: per_center must be >= 1");
    if (!(spread >= 0.0)) throw std::invalid_argument("synth_clusters: spread must be >= 0");
    const std::size_t n = centers.front().size();
    for (const auto& c : centers)
        if (c.size() != n) throw std::invalid_argument("synth_clusters: ragged centers");
    std::vector<double> flat;
    flat.reserve(centers.size() * per_center * n);
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (std::size_t j = 0; j < per_center; ++j) {
            const rng::StreamKey key{seed, c * per_center + j, rng::Slot::noise_vector};
            for (std::size_t d = 0; d < n; ++d) {
                const double z = spread == 0.0 ? 0.0 : spread * rng::standard_normal_at(key, d);
                flat.push_back(centers[c][d] + z);
            }
        }
    }
    const auto range = detail::value_range(flat);
    return Dataset(std::move(flat), n, range, "synth");
}

// m distinct points chosen by a seeded Fisher-Yates shuffle prefix.
inline Dataset subsample(const Dataset& d, std::size_t m, std::uint64_t seed) {
    if (m < 1 || m > d.size())
        throw std::invalid_argument("subsample: m must lie in [1, N] with N = " +
                                    std::to_string(d.size()));
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        const rng::StreamKey key{seed, i, rng::Slot::data_index};
        const std::size_t j = i + rng::uniform_index(key, 0, idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<double> flat;
    flat.reserve(m * d.dim());
    for (std::size_t i = 0; i < m; ++i) {
        const double* p = d.point(idx[i]);
        flat.insert(flat.end(), p, p + d.dim());
    }
    return Dataset(std::move(flat), d.dim(), d.range(),
                   d.source() + ":subsample(" + std::to_string(m) + ")");
}

} // namespace stagecut
