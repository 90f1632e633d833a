#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vseq/volume.hpp"

namespace vseq {

enum class Grade { none, mild, moderate, severe };

const char* grade_name(Grade g);
Grade grade_from_name(const std::string& s);

// Genant height-loss bands: mild 20-25%, moderate 25-40%, severe >40%
// (capped at 60% so a crushed body is still rendered).
std::pair<double, double> grade_band(Grade g);

struct PhantomSpec {
    int n_vertebrae = 17;              // T1..L5
    double vertebra_height_mm = 24.0;
    double vertebra_width_mm = 39.0;
    double body_depth_mm = 30.0;
    double disc_gap_mm = 6.0;
    double canal_radius_mm = 5.0;
    double arch_half_width_mm = 10.5;
    double arch_half_depth_mm = 8.0;
    double curvature_amplitude_mm = 8.0;
    int16_t bone_hu = 700;
    int16_t soft_tissue_hu = 40;
    int16_t canal_hu = -10;
    double noise_sigma_hu = 20.0;
    uint64_t seed = 0;

    // output grid
    int nx = 32, ny = 32;
    double sx = 3.0, sy = 3.0, sz = 4.0;
    double z_margin_mm = 15.0;

    double spine_length_mm() const {
        return n_vertebrae * vertebra_height_mm + (n_vertebrae - 1) * disc_gap_mm;
    }
    int nz() const;
    void validate() const;
};

struct VertebraLabel {
    int index = 0;
    bool fractured = false;
    double height_loss = 0.0;  // fraction of nominal height
    Grade grade = Grade::none;
    double z0_mm = 0.0, z1_mm = 0.0;  // rendered (post-fracture) axial extent
};

struct SeriesLabel {
    std::vector<VertebraLabel> per_vertebra;           // all vertebrae
    bool series_positive = false;                      // OR of fracture flags
    std::vector<std::array<double, 2>> canal_centerline;  // per slice (cx, cy), voxel coords
};

struct FractureEntry {
    int vertebra = 0;
    Grade grade = Grade::mild;
};

// Pure given (spec, plan, spec.seed): identical inputs give identical bytes.
std::pair<Volume, SeriesLabel> generate_series(const PhantomSpec& spec,
                                               const std::vector<FractureEntry>& plan);

struct ManifestEntry {
    int series = 0;
    std::string path;  // volume path relative to the manifest directory
    std::string part;  // train | tune | test
    bool positive = false;
    std::vector<VertebraLabel> fractures;  // fractured vertebrae only
};

struct DatasetManifest {
    std::string dir;  // directory the paths are relative to
    std::vector<ManifestEntry> entries;

    std::string volume_path(const ManifestEntry& e) const { return dir + "/" + e.path; }
    std::vector<const ManifestEntry*> partition(const std::string& part) const;
};

// Generates n_series phantom volumes plus truth sidecars under out_dir and
// writes out_dir/manifest.txt. Positive count = round(positive_fraction * n);
// the 80/10/10 split is stratified per class so every partition sees both.
DatasetManifest make_dataset(const std::string& out_dir, int n_series, double positive_fraction,
                             const PhantomSpec& spec, uint64_t seed);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Per-series truth sidecar (<volume>.truth): vertebra extents and the canal
// centerline, used for detector supervision and patch-level labels.
struct SeriesTruth {
    std::vector<VertebraLabel> vertebrae;
    std::vector<std::array<double, 2>> cord;  // per slice (cx, cy) voxel coords
    double canal_radius_mm = 5.0;
};

void save_truth(const SeriesTruth& t, const std::string& path);
SeriesTruth load_truth(const std::string& path);

}  // namespace vseq
