#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vseq {

constexpr int16_t kHuMin = -1024;
constexpr int16_t kHuMax = 3071;

// 3D CT-like scalar grid, Hounsfield units, z-major then y then x.
//
// On-disk container (.vsq): a UTF-8 text header of key=value lines
//   magic=VSQ1, nz, ny, nx, sz_mm, sy_mm, sx_mm
// terminated by one blank line, followed by raw little-endian signed
// 16-bit voxels in z-major order.
struct Volume {
    int nz = 0, ny = 0, nx = 0;          // voxel counts
    double sz = 1.0, sy = 1.0, sx = 1.0; // mm per voxel
    std::vector<int16_t> data;

    int64_t voxels() const { return static_cast<int64_t>(nz) * ny * nx; }

    int16_t& at(int z, int y, int x) {
        return data[(static_cast<int64_t>(z) * ny + y) * nx + x];
    }
    int16_t at(int z, int y, int x) const {
        return data[(static_cast<int64_t>(z) * ny + y) * nx + x];
    }

    void validate() const;  // throws on any invariant violation
};

struct WindowSpec {
    double center = 370.0;  // HU
    double width = 840.0;   // HU, > 0
};

// Real-valued grid sharing Volume's axis order; holds windowed data.
struct Grid3 {
    int nz = 0, ny = 0, nx = 0;
    double sz = 1.0, sy = 1.0, sx = 1.0;
    std::vector<float> data;

    float& at(int z, int y, int x) {
        return data[(static_cast<int64_t>(z) * ny + y) * nx + x];
    }
    float at(int z, int y, int x) const {
        return data[(static_cast<int64_t>(z) * ny + y) * nx + x];
    }
};

Volume load_volume(const std::string& path);
void save_volume(const Volume& volume, const std::string& path);

// Linear HU window: (hu - (center - width/2)) / width, clamped to [0,1].
double window_value(double hu, const WindowSpec& window);
Grid3 apply_window(const Volume& volume, const WindowSpec& window);

}  // namespace vseq
