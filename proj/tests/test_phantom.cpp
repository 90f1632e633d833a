#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "vseq/phantom.hpp"

using namespace vseq;
namespace fs = std::filesystem;

namespace {

// threshold-and-measure oracle: rendered height of a vertebra in slices.
// The scan window is the vertebra's own extent widened by half a disc gap,
// which cannot reach a neighboring vertebra.
int measured_height_slices(const Volume& vol, const SeriesLabel& label, const PhantomSpec& spec,
                           int vertebra) {
    const auto& v = label.per_vertebra[static_cast<size_t>(vertebra)];
    const double mid_z = (v.z0_mm + v.z1_mm) / 2.0;
    const int zc = static_cast<int>(mid_z / spec.sz);
    const auto& cord = label.canal_centerline[static_cast<size_t>(zc)];
    // body center: anterior of the canal by gap + half depth
    const int x = static_cast<int>(std::lround(cord[0]));
    const int y = static_cast<int>(
        std::lround(cord[1] - (spec.canal_radius_mm + 2.0 + spec.body_depth_mm / 2.0) / spec.sy));
    const int16_t threshold =
        static_cast<int16_t>((spec.bone_hu + spec.soft_tissue_hu) / 2);
    const int z_lo = std::max(0, static_cast<int>((v.z0_mm - spec.disc_gap_mm / 2.0) / spec.sz));
    const int z_hi = std::min(vol.nz - 1,
                              static_cast<int>((v.z1_mm + spec.disc_gap_mm / 2.0) / spec.sz) + 1);
    int count = 0;
    for (int z = z_lo; z <= z_hi; ++z)
        if (vol.at(z, y, x) > threshold) ++count;
    return count;
}

std::string read_file(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("empty fracture plan gives an all-negative series") {
    PhantomSpec spec;
    spec.seed = 5;
    auto [vol, label] = generate_series(spec, {});
    CHECK_FALSE(label.series_positive);
    for (const auto& v : label.per_vertebra) {
        CHECK_FALSE(v.fractured);
        CHECK(v.grade == Grade::none);
        CHECK(v.height_loss == 0.0);
    }
    CHECK(static_cast<int>(label.canal_centerline.size()) == vol.nz);
}

TEST_CASE("severe fracture shortens the rendered vertebra accordingly") {
    PhantomSpec spec;
    spec.seed = 17;
    spec.noise_sigma_hu = 0.0;
    auto [vol, label] = generate_series(spec, {{5, Grade::severe}});
    CHECK(label.series_positive);
    const auto& v = label.per_vertebra[5];
    CHECK(v.fractured);
    CHECK(v.height_loss > 0.40);
    CHECK(v.height_loss <= 0.60);

    const int measured = measured_height_slices(vol, label, spec, 5);
    const double nominal_slices = spec.vertebra_height_mm / spec.sz;
    // severe: rendered height at most 60% of nominal, one voxel of
    // rasterization slack
    CHECK(measured <= 0.6 * nominal_slices + 1.0);
    // the recorded fraction is recovered within one voxel of height
    const double expected_slices = (1.0 - v.height_loss) * nominal_slices;
    CHECK(std::abs(measured - expected_slices) <= 1.0);

    // unfractured neighbor keeps its nominal height within one voxel
    const int intact = measured_height_slices(vol, label, spec, 8);
    CHECK(std::abs(intact - nominal_slices) <= 1.0);
}

TEST_CASE("label soundness holds across grades and seeds") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        PhantomSpec spec;
        spec.seed = seed;
        spec.noise_sigma_hu = 0.0;
        const std::vector<FractureEntry> plan = {
            {2, Grade::mild}, {9, Grade::moderate}, {14, Grade::severe}};
        auto [vol, label] = generate_series(spec, plan);
        for (const auto& e : plan) {
            const auto& v = label.per_vertebra[static_cast<size_t>(e.vertebra)];
            const auto [lo, hi] = grade_band(e.grade);
            CHECK(v.height_loss >= lo);
            CHECK(v.height_loss <= hi);
            const int measured = measured_height_slices(vol, label, spec, e.vertebra);
            const double expected = (1.0 - v.height_loss) * spec.vertebra_height_mm / spec.sz;
            CHECK(std::abs(measured - expected) <= 1.0);
        }
    }
}

TEST_CASE("generation is deterministic given (spec, plan, seed)") {
    PhantomSpec spec;
    spec.seed = 1234;
    auto [v1, l1] = generate_series(spec, {{3, Grade::moderate}});
    auto [v2, l2] = generate_series(spec, {{3, Grade::moderate}});
    CHECK(v1.data == v2.data);
    CHECK(l1.per_vertebra[3].height_loss == l2.per_vertebra[3].height_loss);

    PhantomSpec other = spec;
    other.seed = 1235;
    auto [v3, l3] = generate_series(other, {{3, Grade::moderate}});
    CHECK(v1.data != v3.data);
}

TEST_CASE("invalid fracture plans are rejected") {
    PhantomSpec spec;
    CHECK_THROWS_AS(generate_series(spec, {{17, Grade::mild}}), std::invalid_argument);
    CHECK_THROWS_AS(generate_series(spec, {{-1, Grade::mild}}), std::invalid_argument);
    CHECK_THROWS_AS(generate_series(spec, {{4, Grade::mild}, {4, Grade::severe}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_series(spec, {{4, Grade::none}}), std::invalid_argument);
}

TEST_CASE("canal centerline voxels read at or below the canal level") {
    PhantomSpec spec;
    spec.seed = 3;
    SUBCASE("noise-free: exact canal HU") {
        spec.noise_sigma_hu = 0.0;
        auto [vol, label] = generate_series(spec, {});
        for (int z = 0; z < vol.nz; ++z) {
            const auto& c = label.canal_centerline[static_cast<size_t>(z)];
            const int x = static_cast<int>(std::lround(c[0]));
            const int y = static_cast<int>(std::lround(c[1]));
            CHECK(vol.at(z, y, x) == spec.canal_hu);
        }
    }
    SUBCASE("with noise: within the 3-sigma tail") {
        spec.noise_sigma_hu = 20.0;
        auto [vol, label] = generate_series(spec, {});
        for (int z = 0; z < vol.nz; ++z) {
            const auto& c = label.canal_centerline[static_cast<size_t>(z)];
            const int x = static_cast<int>(std::lround(c[0]));
            const int y = static_cast<int>(std::lround(c[1]));
            CHECK(vol.at(z, y, x) <= spec.canal_hu + 3.0 * spec.noise_sigma_hu);
        }
    }
}

TEST_CASE("phantom spec invariants are enforced") {
    PhantomSpec spec;
    spec.n_vertebrae = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = PhantomSpec{};
    spec.bone_hu = 40;
    spec.soft_tissue_hu = 40;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = PhantomSpec{};
    spec.noise_sigma_hu = -1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("make_dataset realizes the positive fraction and the 80/10/10 split") {
    const std::string dir = "tmp_dataset_100";
    PhantomSpec spec;
    spec.n_vertebrae = 4;  // keep the volumes small
    const DatasetManifest m = make_dataset(dir, 100, 0.33, spec, 42);
    REQUIRE(m.entries.size() == 100);
    int pos = 0, train = 0, tune = 0, test = 0;
    for (const auto& e : m.entries) {
        pos += e.positive ? 1 : 0;
        if (e.part == "train") ++train;
        if (e.part == "tune") ++tune;
        if (e.part == "test") ++test;
        CHECK(e.positive == !e.fractures.empty());
    }
    CHECK(pos == 33);
    CHECK(train == 80);
    CHECK(tune == 10);
    CHECK(test == 10);

    // every partition holds both classes (stratified split)
    for (const char* part : {"train", "tune", "test"}) {
        bool has_pos = false, has_neg = false;
        for (const auto* e : m.partition(part)) (e->positive ? has_pos : has_neg) = true;
        CHECK(has_pos);
        CHECK(has_neg);
    }

    // round-trip through the manifest file
    const DatasetManifest loaded = load_manifest(dir + "/manifest.txt");
    REQUIRE(loaded.entries.size() == m.entries.size());
    for (size_t i = 0; i < m.entries.size(); ++i) {
        CHECK(loaded.entries[i].part == m.entries[i].part);
        CHECK(loaded.entries[i].positive == m.entries[i].positive);
        CHECK(loaded.entries[i].fractures.size() == m.entries[i].fractures.size());
    }
    fs::remove_all(dir);
}

TEST_CASE("zero positive fraction yields only negatives") {
    const std::string dir = "tmp_dataset_neg";
    PhantomSpec spec;
    spec.n_vertebrae = 3;
    const DatasetManifest m = make_dataset(dir, 10, 0.0, spec, 7);
    for (const auto& e : m.entries) CHECK_FALSE(e.positive);
    fs::remove_all(dir);
}

TEST_CASE("dataset generation is deterministic") {
    const std::string d1 = "tmp_dataset_d1", d2 = "tmp_dataset_d2";
    PhantomSpec spec;
    spec.n_vertebrae = 3;
    make_dataset(d1, 10, 0.4, spec, 77);
    make_dataset(d2, 10, 0.4, spec, 77);
    CHECK(read_file(d1 + "/manifest.txt") == read_file(d2 + "/manifest.txt"));
    CHECK(read_file(d1 + "/series_004.vsq") == read_file(d2 + "/series_004.vsq"));
    CHECK(read_file(d1 + "/series_004.vsq.truth") == read_file(d2 + "/series_004.vsq.truth"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("make_dataset validates its inputs") {
    PhantomSpec spec;
    CHECK_THROWS_AS(make_dataset("tmp_bad", 5, 0.3, spec, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_dataset("tmp_bad", 10, 1.5, spec, 1), std::invalid_argument);
}

TEST_CASE("truth sidecars round-trip") {
    const std::string dir = "tmp_truth";
    fs::create_directories(dir);
    SeriesTruth t;
    t.canal_radius_mm = 4.5;
    VertebraLabel v;
    v.index = 2;
    v.fractured = true;
    v.grade = Grade::moderate;
    v.height_loss = 0.3125;
    v.z0_mm = 51.5;
    v.z1_mm = 68.0;
    t.vertebrae.push_back(v);
    t.cord = {{10.25, 11.5}, {10.5, 11.25}};
    save_truth(t, dir + "/x.truth");
    const SeriesTruth r = load_truth(dir + "/x.truth");
    CHECK(r.canal_radius_mm == doctest::Approx(4.5));
    REQUIRE(r.vertebrae.size() == 1);
    CHECK(r.vertebrae[0].grade == Grade::moderate);
    CHECK(r.vertebrae[0].z1_mm == doctest::Approx(68.0));
    REQUIRE(r.cord.size() == 2);
    CHECK(r.cord[1][0] == doctest::Approx(10.5));
    fs::remove_all(dir);
}
