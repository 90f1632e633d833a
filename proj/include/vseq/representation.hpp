#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vseq/detector.hpp"
#include "vseq/tensor.hpp"
#include "vseq/volume.hpp"

namespace vseq {

// Sagittal reformation of a windowed volume: slices indexed by x, rows by
// resampled z, columns by y, values in [0,1]. Each column is Fourier-
// resampled along z so the vertical pixel size equals the in-plane size sy
// (the row count is round-half-up of nz*sz/sy; the residual sub-voxel
// scale difference is absorbed into the declared pixel size).
struct SagittalVolume {
    int n_slices = 0;  // x
    int rows = 0;      // resampled z
    int cols = 0;      // y
    double pixel_mm = 1.0;
    int src_nz = 0;
    double src_sz = 1.0, src_sy = 1.0, src_sx = 1.0;
    std::vector<float> data;  // [x][row][col]

    float& at(int x, int row, int col) {
        return data[(static_cast<int64_t>(x) * rows + row) * cols + col];
    }
    float at(int x, int row, int col) const {
        return data[(static_cast<int64_t>(x) * rows + row) * cols + col];
    }

    // physical mm spanned by one resampled row
    double row_mm() const { return src_nz * src_sz / rows; }
};

SagittalVolume reconstruct_sagittal(const Volume& volume, const WindowSpec& window);

// source region of one patch in sagittal grid coordinates
struct PatchMeta {
    int z0 = 0, z1 = 0;  // rows, [z0, z1)
    int y0 = 0, y1 = 0;  // cols
    int x0 = 0, x1 = 0;  // slices
};

struct PatchSequence {
    std::vector<Tensor<float>> patches;  // each (pH, pW, pZ), values in [0,1]
    std::vector<double> locations;       // strictly increasing, in [0,1]
    std::vector<PatchMeta> meta;
    int voi_len = 0;        // VOI extent along the spine axis, rows
    double pixel_mm = 1.0;  // sagittal pixel size

    size_t k() const { return patches.size(); }
};

struct TileConfig {
    int ph = 32, pw = 32, pz = 16;
    double crop_mm = 60.0;           // cross-axis crop extent (sagittal and coronal)
    double anterior_bias_mm = 20.0;  // crop center shift toward the vertebral bodies
};

// Tile start offsets along the spine axis: k = ceil(L/p) tiles, first at 0,
// last at L-p, overlaps equalized. L <= p degenerates to one padded tile.
std::vector<int> tile_starts(int voi_len, int patch_len);

// relative location of each tile center, (start + p/2) / L
std::vector<double> location_features(const std::vector<int>& starts, int patch_len, int voi_len);

PatchSequence tile_patches(const SagittalVolume& sagittal, const CordTrack& track,
                           const TileConfig& config);

// optional per-series dump: text header, then k*(ph*pw*pz) float32 LE patch
// values followed by k float32 locations
void save_patch_sequence(const PatchSequence& seq, const std::string& path);
PatchSequence load_patch_sequence(const std::string& path);

}  // namespace vseq
