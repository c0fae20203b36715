#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "nad/io.hpp"
#include "nad/rng.hpp"

using namespace nad;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir() {
    static const std::string dir = [] {
        const auto d = fs::temp_directory_path() / "nad_test_io";
        fs::create_directories(d);
        return d.string();
    }();
    return dir;
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("tensor round-trip: 2x3 zeros") {
    Tensor t({2, 3}, 0.0f);
    const std::string p = tmp_dir() + "/zeros.nt";
    io::write_tensor(t, p);
    const Tensor r = io::read_tensor(p);
    REQUIRE(r.dims() == t.dims());
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == 0.0f);
}

TEST_CASE("tensor file layout: single element") {
    Tensor t({1, 1}, 0.2f);
    const std::string p = tmp_dir() + "/single.nt";
    io::write_tensor(t, p);
    const auto bytes = slurp(p);
    // magic + dtype + ndim + 2 x u32 dims + 1 x f32
    REQUIRE(bytes.size() == 4 + 1 + 1 + 8 + 4);
    CHECK(std::memcmp(bytes.data(), "NADT", 4) == 0);
    CHECK(bytes[4] == 1);  // f32
    CHECK(bytes[5] == 2);  // ndim
    float payload;
    std::memcpy(&payload, bytes.data() + 14, 4);
    CHECK(payload == 0.2f);
    CHECK(io::read_tensor(p)[0] == 0.2f);
}

TEST_CASE("tensor round-trip is bitwise for random data") {
    Rng rng(7);
    Tensor t({4, 4});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
    const std::string p = tmp_dir() + "/rand.nt";
    io::write_tensor(t, p);
    const Tensor r = io::read_tensor(p);
    REQUIRE(r.size() == t.size());
    CHECK(std::memcmp(r.data(), t.data(), t.size() * sizeof(float)) == 0);
}

TEST_CASE("tensor round-trip across random shapes up to 4 dims") {
    Rng rng(123);
    for (int rep = 0; rep < 20; ++rep) {
        const auto ndim = 1 + rng.uniform_int(4);
        std::vector<std::size_t> dims;
        for (std::uint64_t d = 0; d < ndim; ++d) dims.push_back(1 + rng.uniform_int(6));
        Tensor t(dims);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
        const std::string p = tmp_dir() + "/shape.nt";
        io::write_tensor(t, p);
        const Tensor r = io::read_tensor(p);
        REQUIRE(r.dims() == dims);
        CHECK(std::memcmp(r.data(), t.data(), t.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("malformed tensor files are rejected") {
    const std::string p = tmp_dir() + "/bad.nt";
    {
        std::ofstream os(p, std::ios::binary);
        os << "XXXX";
    }
    CHECK_THROWS_AS(io::read_tensor(p), io::FormatError);

    Tensor t({2, 2}, 1.0f);
    io::write_tensor(t, p);
    // Truncate the payload.
    fs::resize_file(p, fs::file_size(p) - 5);
    CHECK_THROWS_AS(io::read_tensor(p), io::FormatError);
    CHECK_THROWS_AS(io::read_tensor(tmp_dir() + "/missing.nt"), io::FormatError);
}

TEST_CASE("pgm export") {
    const std::string p = tmp_dir() + "/map.pgm";

    SUBCASE("constant at lo maps to 0") {
        Tensor m({2, 2}, 0.25f);
        io::write_pgm(m, p, 0.25f, 1.0f);
        const auto b = slurp(p);
        for (std::size_t i = b.size() - 4; i < b.size(); ++i) CHECK(b[i] == 0);
    }
    SUBCASE("constant at hi maps to 255") {
        Tensor m({2, 2}, 1.0f);
        io::write_pgm(m, p, 0.0f, 1.0f);
        const auto b = slurp(p);
        for (std::size_t i = b.size() - 4; i < b.size(); ++i)
            CHECK(static_cast<unsigned char>(b[i]) == 255);
    }
    SUBCASE("midpoint rounds to 128") {
        Tensor m({2, 1});
        m[0] = 0.0f;
        m[1] = 0.5f;
        io::write_pgm(m, p, 0.0f, 1.0f);
        const auto b = slurp(p);
        CHECK(static_cast<unsigned char>(b[b.size() - 2]) == 0);
        CHECK(static_cast<unsigned char>(b[b.size() - 1]) == 128);
    }
    SUBCASE("hi <= lo rejected") {
        Tensor m({2, 2}, 0.0f);
        CHECK_THROWS_AS(io::write_pgm(m, p, 1.0f, 1.0f), io::ParamError);
    }
}

TEST_CASE("manifest validation happens at load") {
    const std::string dir = tmp_dir() + "/ds";
    fs::create_directories(dir);
    Tensor img({1, 4, 4}, 0.5f);
    io::write_tensor(img, dir + "/img0.nt");

    io::DatasetManifest m;
    m.name = "t";
    m.split = "train";
    m.spatial_dims = {4, 4};
    m.channels = 1;
    m.seed = 1;
    m.items.push_back({"img0.nt", std::nullopt, {}});

    SUBCASE("valid manifest round-trips") {
        io::write_manifest(m, dir + "/m.json");
        const auto r = io::load_manifest(dir + "/m.json");
        CHECK(r.items.size() == 1);
        CHECK(r.split == "train");
        CHECK(r.spatial_dims == std::vector<std::size_t>{4, 4});
    }
    SUBCASE("missing image rejected at load") {
        m.items.push_back({"missing.nt", std::nullopt, {}});
        io::write_manifest(m, dir + "/m2.json");
        CHECK_THROWS_AS(io::load_manifest(dir + "/m2.json"), io::FormatError);
    }
    SUBCASE("train item with a non-empty mask rejected") {
        Tensor mask({4, 4}, 0.0f);
        mask[5] = 1.0f;
        io::write_tensor(mask, dir + "/mask0.nt");
        m.items[0].mask_path = "mask0.nt";
        io::write_manifest(m, dir + "/m3.json");
        CHECK_THROWS_AS(io::load_manifest(dir + "/m3.json"), io::FormatError);
    }
    SUBCASE("all-zero train mask accepted") {
        Tensor mask({4, 4}, 0.0f);
        io::write_tensor(mask, dir + "/mask1.nt");
        m.items[0].mask_path = "mask1.nt";
        io::write_manifest(m, dir + "/m4.json");
        CHECK_NOTHROW(io::load_manifest(dir + "/m4.json"));
    }
}

}  // TEST_SUITE
