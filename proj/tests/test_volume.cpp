#include <cstdint>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vseq/phantom.hpp"
#include "vseq/volume.hpp"

using namespace vseq;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    const fs::path p = fs::path("tmp_volume_tests");
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Volume make_volume(int nz, int ny, int nx, int16_t fill) {
    Volume v;
    v.nz = nz;
    v.ny = ny;
    v.nx = nx;
    v.sz = 2.5;
    v.sy = 1.0;
    v.sx = 1.0;
    v.data.assign(static_cast<size_t>(v.voxels()), fill);
    return v;
}

}  // namespace

TEST_CASE("save/load round-trips a zero volume bit-exactly") {
    const auto path = (tmp_dir() / "zeros.vsq").string();
    const Volume v = make_volume(2, 2, 2, 0);
    save_volume(v, path);
    const Volume r = load_volume(path);
    CHECK(r.nz == v.nz);
    CHECK(r.ny == v.ny);
    CHECK(r.nx == v.nx);
    CHECK(r.sz == v.sz);
    CHECK(r.sy == v.sy);
    CHECK(r.sx == v.sx);
    CHECK(r.data == v.data);
}

TEST_CASE("file size is header bytes plus two bytes per voxel") {
    const auto path = (tmp_dir() / "sized.vsq").string();
    const Volume v = make_volume(3, 4, 5, 0);
    save_volume(v, path);
    const std::string contents = read_file(path);
    const auto header_end = contents.find("\n\n");
    REQUIRE(header_end != std::string::npos);
    const size_t header_bytes = header_end + 2;
    CHECK(contents.size() == header_bytes + 2u * 3 * 4 * 5);
}

TEST_CASE("save/load/save produces byte-identical files") {
    const auto p1 = (tmp_dir() / "a.vsq").string();
    const auto p2 = (tmp_dir() / "b.vsq").string();
    Volume v = make_volume(4, 3, 2, 12);
    v.data[5] = -1024;
    v.data[7] = 3071;
    v.sz = 0.1;  // exercises spacing round-trip formatting
    save_volume(v, p1);
    save_volume(load_volume(p1), p2);
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("saturated volume payload is the little-endian encoding of 3071") {
    const auto path = (tmp_dir() / "max.vsq").string();
    save_volume(make_volume(2, 2, 2, 3071), path);
    const std::string contents = read_file(path);
    const auto header_end = contents.find("\n\n") + 2;
    // 3071 = 0x0BFF encodes as bytes FF 0B
    for (size_t i = header_end; i + 1 < contents.size(); i += 2) {
        CHECK(static_cast<uint8_t>(contents[i]) == 0xFF);
        CHECK(static_cast<uint8_t>(contents[i + 1]) == 0x0B);
    }
}

TEST_CASE("declared shape must match the payload length") {
    const auto path = (tmp_dir() / "short.vsq").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "magic=VSQ1\nnz=10\nny=10\nnx=10\nsz_mm=1\nsy_mm=1\nsx_mm=1\n\n";
        std::vector<char> payload(999 * 2, 0);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("too short"), std::runtime_error);

    {
        std::ofstream out(path, std::ios::binary);
        out << "magic=VSQ1\nnz=2\nny=2\nnx=2\nsz_mm=1\nsy_mm=1\nsx_mm=1\n\n";
        std::vector<char> payload(9 * 2, 0);  // one voxel too many
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("trailing"), std::runtime_error);
}

TEST_CASE("distinct errors for missing file and malformed header") {
    CHECK_THROWS_WITH_AS(load_volume((tmp_dir() / "nope.vsq").string()),
                         doctest::Contains("cannot open"), std::runtime_error);
    const auto path = (tmp_dir() / "bad.vsq").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "magic=WRONG\nnz=1\nny=1\nnx=1\nsz_mm=1\nsy_mm=1\nsx_mm=1\n\n\0\0";
    }
    CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("bad magic"), std::runtime_error);
    {
        std::ofstream out(path, std::ios::binary);
        out << "magic=VSQ1\nnz=1\nny=1\nnx=1\nsz_mm=1\nsy_mm=1\n\n";
    }
    CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("missing key"), std::runtime_error);
}

TEST_CASE("out-of-range HU values are rejected on load and save") {
    const auto path = (tmp_dir() / "range.vsq").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "magic=VSQ1\nnz=1\nny=1\nnx=1\nsz_mm=1\nsy_mm=1\nsx_mm=1\n\n";
        const int16_t bad = 3072;
        const char bytes[2] = {static_cast<char>(bad & 0xff), static_cast<char>((bad >> 8) & 0xff)};
        out.write(bytes, 2);
    }
    CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("HU value out of"),
                         std::runtime_error);

    Volume v = make_volume(1, 1, 1, 0);
    v.data[0] = -2000;
    CHECK_THROWS_AS(save_volume(v, path), std::invalid_argument);
    v.data[0] = 0;
    v.sy = 0.0;
    CHECK_THROWS_AS(save_volume(v, path), std::invalid_argument);
}

TEST_CASE("loading a phantom recovers the configured bone HU as maximum") {
    PhantomSpec spec;
    spec.n_vertebrae = 3;
    spec.noise_sigma_hu = 0.0;
    spec.seed = 99;
    auto [vol, label] = generate_series(spec, {});
    const auto path = (tmp_dir() / "phantom.vsq").string();
    save_volume(vol, path);
    const Volume r = load_volume(path);
    int16_t max_hu = kHuMin;
    for (int16_t h : r.data) max_hu = std::max(max_hu, h);
    CHECK(max_hu == spec.bone_hu);
}

TEST_CASE("windowing maps the stated anchor points") {
    const WindowSpec w{370.0, 840.0};
    CHECK(window_value(-50.0, w) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(window_value(790.0, w) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(window_value(370.0, w) == doctest::Approx(0.5).epsilon(1e-12));
    // (160 - (-50)) / 840
    CHECK(window_value(160.0, w) == doctest::Approx(210.0 / 840.0).epsilon(1e-12));
    CHECK(window_value(-3000.0, w) == 0.0);
    CHECK(window_value(5000.0, w) == 1.0);
}

TEST_CASE("windowing is monotone and stays inside [0,1]") {
    const WindowSpec w{370.0, 840.0};
    Volume v = make_volume(2, 3, 4, 0);
    int16_t hu = -1024;
    for (auto& d : v.data) {
        d = hu;
        hu = static_cast<int16_t>(hu + 170);
    }
    const Grid3 g = apply_window(v, w);
    double prev = -1.0;
    for (float f : g.data) {
        CHECK(f >= 0.0f);
        CHECK(f <= 1.0f);
        CHECK(static_cast<double>(f) >= prev);  // input was increasing
        prev = f;
    }
    CHECK_THROWS_AS(apply_window(v, WindowSpec{0.0, 0.0}), std::invalid_argument);
}
