#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "stagecut/dataset.hpp"
#include "stagecut/error.hpp"

using namespace stagecut;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "stagecut_dataset_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// Patterned records: label r, pixel k of record r is byte (r*7 + k) % 256.
std::vector<unsigned char> patterned_records(std::size_t n_rec) {
    std::vector<unsigned char> bytes;
    bytes.reserve(n_rec * 3073);
    for (std::size_t r = 0; r < n_rec; ++r) {
        bytes.push_back(static_cast<unsigned char>(r % 10));
        for (std::size_t k = 0; k < 3072; ++k)
            bytes.push_back(static_cast<unsigned char>((r * 7 + k) % 256));
    }
    return bytes;
}

} // namespace

TEST_CASE("cifar10 byte mapping is exact", "[dataset]") {
    const auto dir = scratch_dir();
    const auto path = (dir / "batch_a.bin").string();
    write_bytes(path, patterned_records(3));

    const auto d = load_cifar10({path});
    REQUIRE(d.size() == 3);
    REQUIRE(d.dim() == 3072);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t k = 0; k < 3072; ++k)
            REQUIRE(d.point(r)[k] == static_cast<double>((r * 7 + k) % 256) / 255.0);
    CHECK(d.range() == std::pair<double, double>{0.0, 1.0});

    // Byte 255 maps to exactly 1.0; byte 0 to exactly 0.0.
    std::vector<unsigned char> rec(3073, 0);
    rec[1] = 255;
    const auto p255 = (dir / "batch_255.bin").string();
    write_bytes(p255, rec);
    const auto d2 = load_cifar10({p255});
    CHECK(d2.point(0)[0] == 1.0);
    CHECK(d2.point(0)[1] == 0.0);
}

TEST_CASE("cifar10 files concatenate in argument order", "[dataset]") {
    const auto dir = scratch_dir();
    const auto pa = (dir / "cat_a.bin").string();
    const auto pb = (dir / "cat_b.bin").string();
    std::vector<unsigned char> a(3073, 0), b(3073, 0);
    a[1] = 10;
    b[1] = 20;
    write_bytes(pa, a);
    write_bytes(pb, b);

    const auto d = load_cifar10({pa, pb});
    REQUIRE(d.size() == 2);
    CHECK(d.point(0)[0] == 10.0 / 255.0);
    CHECK(d.point(1)[0] == 20.0 / 255.0);

    const auto r = load_cifar10({pb, pa});
    CHECK(r.point(0)[0] == 20.0 / 255.0);
    CHECK(r.point(1)[0] == 10.0 / 255.0);
}

TEST_CASE("cifar10 rejects truncated files", "[dataset]") {
    const auto dir = scratch_dir();
    const auto path = (dir / "truncated.bin").string();
    auto bytes = patterned_records(2);
    bytes.resize(bytes.size() - 100);
    write_bytes(path, bytes);

    try {
        load_cifar10({path});
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("truncated.bin") != std::string::npos);
        CHECK(msg.find("residue") != std::string::npos);
    }
    CHECK_THROWS_AS(load_cifar10({}), std::invalid_argument);
    CHECK_THROWS_AS(load_cifar10({(dir / "no_such.bin").string()}), FormatError);
}

TEST_CASE("csv loading and validation", "[dataset]") {
    const auto dir = scratch_dir();
    const auto path = (dir / "ok.csv").string();
    {
        std::ofstream out(path);
        out << "a,b,c\n1,2,3\n-0.5, 0.25 ,1e-3\n";
    }
    const auto d = load_csv(path);
    REQUIRE(d.size() == 2);
    REQUIRE(d.dim() == 3);
    CHECK(d.point(1)[0] == -0.5);
    CHECK(d.point(1)[1] == 0.25);
    CHECK(d.point(1)[2] == 1e-3);
    CHECK(d.range().first == -0.5);
    CHECK(d.range().second == 3.0);

    const auto ragged = (dir / "ragged.csv").string();
    {
        std::ofstream out(ragged);
        out << "a,b\n1,2\n3\n";
    }
    try {
        load_csv(ragged);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    const auto bad = (dir / "bad.csv").string();
    {
        std::ofstream out(bad);
        out << "a,b\n1,oops\n";
    }
    try {
        load_csv(bad);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 1") != std::string::npos);
        CHECK(msg.find("column 1") != std::string::npos);
    }

    const auto empty = (dir / "empty.csv").string();
    {
        std::ofstream out(empty);
        out << "a,b\n";
    }
    CHECK_THROWS_AS(load_csv(empty), FormatError);
}

TEST_CASE("csv round trip preserves every bit", "[dataset]") {
    const auto dir = scratch_dir();
    const std::vector<double> flat = {0.1,       -3.0,           1.0 / 3.0, 2.5e-17,
                                      123456.75, -0.00048828125, 3.14159,   8.0};
    const Dataset d(flat, 4, detail::value_range(flat), "synth");
    const auto path = (dir / "roundtrip.csv").string();
    write_csv(d, path);
    const auto back = load_csv(path);
    REQUIRE(back.size() == d.size());
    REQUIRE(back.dim() == d.dim());
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(back.data()[i] == flat[i]);
    CHECK(back.checksum() == d.checksum());
}

TEST_CASE("synthetic clusters", "[dataset]") {
    const std::vector<std::vector<double>> centers = {{1.0, -2.0}, {3.0, 4.0}};

    const auto exact = synth_clusters(centers, 3, 0.0, 7);
    REQUIRE(exact.size() == 6);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(exact.point(j)[0] == 1.0);
        CHECK(exact.point(j)[1] == -2.0);
        CHECK(exact.point(3 + j)[0] == 3.0);
        CHECK(exact.point(3 + j)[1] == 4.0);
    }

    const auto a = synth_clusters(centers, 100, 0.1, 7);
    const auto b = synth_clusters(centers, 100, 0.1, 7);
    CHECK(a.checksum() == b.checksum());
    const auto c = synth_clusters(centers, 100, 0.1, 8);
    CHECK(a.checksum() != c.checksum());

    // Sample mean of each blob stays near its center.
    for (std::size_t blob = 0; blob < 2; ++blob) {
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t j = 0; j < 100; ++j) {
            m0 += a.point(blob * 100 + j)[0];
            m1 += a.point(blob * 100 + j)[1];
        }
        CHECK(std::abs(m0 / 100.0 - centers[blob][0]) < 0.05);
        CHECK(std::abs(m1 / 100.0 - centers[blob][1]) < 0.05);
    }

    CHECK_THROWS_AS(synth_clusters({}, 3, 0.1, 7), std::invalid_argument);
    CHECK_THROWS_AS(synth_clusters({{1.0}, {1.0, 2.0}}, 3, 0.1, 7), std::invalid_argument);
    CHECK_THROWS_AS(synth_clusters(centers, 0, 0.1, 7), std::invalid_argument);
    CHECK_THROWS_AS(synth_clusters(centers, 3, -0.1, 7), std::invalid_argument);
}

TEST_CASE("subsample picks a deterministic distinct subset", "[dataset]") {
    std::vector<double> flat;
    for (int i = 0; i < 50; ++i) flat.push_back(static_cast<double>(i));
    const Dataset d(flat, 1, {0.0, 49.0}, "synth");

    const auto s1 = subsample(d, 20, 99);
    const auto s2 = subsample(d, 20, 99);
    CHECK(s1.checksum() == s2.checksum());
    CHECK(subsample(d, 20, 100).checksum() != s1.checksum());

    std::set<double> seen;
    for (std::size_t i = 0; i < s1.size(); ++i) seen.insert(s1.point(i)[0]);
    CHECK(seen.size() == 20);

    // m = N is a permutation of the whole set.
    const auto full = subsample(d, 50, 99);
    std::set<double> all;
    for (std::size_t i = 0; i < full.size(); ++i) all.insert(full.point(i)[0]);
    CHECK(all.size() == 50);
    CHECK(*all.begin() == 0.0);
    CHECK(*all.rbegin() == 49.0);

    CHECK_THROWS_AS(subsample(d, 51, 99), std::invalid_argument);
    CHECK_THROWS_AS(subsample(d, 0, 99), std::invalid_argument);
}

TEST_CASE("checksum is sensitive to every value", "[dataset]") {
    const Dataset d({1.0, 2.0, 3.0, 4.0}, 2, {1.0, 4.0}, "synth");
    const Dataset e({1.0, 2.0, 3.0, 4.0000000000000009}, 2, {1.0, 4.0}, "synth");
    CHECK(d.checksum() != e.checksum());
    const Dataset f({1.0, 2.0, 3.0, 4.0}, 2, {1.0, 4.0}, "other");
    CHECK(d.checksum() == f.checksum());
}

TEST_CASE("dataset construction validates shape", "[dataset]") {
    CHECK_THROWS_AS(Dataset({1.0, 2.0, 3.0}, 2, {1.0, 3.0}, "synth"), std::invalid_argument);
    CHECK_THROWS_AS(Dataset({}, 2, {0.0, 0.0}, "synth"), std::invalid_argument);
    CHECK_THROWS_AS(Dataset({1.0}, 0, {1.0, 1.0}, "synth"), std::invalid_argument);
    const Dataset d({3.0, 4.0}, 2, {3.0, 4.0}, "synth");
    CHECK(d.sq_norms()[0] == 25.0);
}
