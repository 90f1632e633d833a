#include "vseq/representation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vseq/fft.hpp"

namespace vseq {

SagittalVolume reconstruct_sagittal(const Volume& volume, const WindowSpec& window) {
    volume.validate();
    if (volume.nz < 2)
        throw std::invalid_argument("reconstruct_sagittal: need at least 2 axial slices");
    const int m = static_cast<int>(std::floor(volume.nz * volume.sz / volume.sy + 0.5));
    if (m < 2) throw std::invalid_argument("reconstruct_sagittal: degenerate resampled height");

    SagittalVolume sag;
    sag.n_slices = volume.nx;
    sag.rows = m;
    sag.cols = volume.ny;
    sag.pixel_mm = volume.sy;
    sag.src_nz = volume.nz;
    sag.src_sz = volume.sz;
    sag.src_sy = volume.sy;
    sag.src_sx = volume.sx;
    sag.data.resize(static_cast<size_t>(volume.nx) * m * volume.ny);

    if (m == volume.nz) {
        // already isotropic: pure axis permutation + windowing
#pragma omp parallel for schedule(static)
        for (int x = 0; x < volume.nx; ++x)
            for (int z = 0; z < volume.nz; ++z)
                for (int y = 0; y < volume.ny; ++y)
                    sag.at(x, z, y) = static_cast<float>(window_value(volume.at(z, y, x), window));
        return sag;
    }

    const FourierResampler resampler(static_cast<size_t>(volume.nz), static_cast<size_t>(m));
#pragma omp parallel for schedule(static)
    for (int x = 0; x < volume.nx; ++x) {
        std::vector<double> column(static_cast<size_t>(volume.nz));
        for (int y = 0; y < volume.ny; ++y) {
            for (int z = 0; z < volume.nz; ++z)
                column[static_cast<size_t>(z)] = static_cast<double>(volume.at(z, y, x));
            const std::vector<double> res = resampler.resample(column.data());
            for (int row = 0; row < m; ++row)
                sag.at(x, row, y) =
                    static_cast<float>(window_value(res[static_cast<size_t>(row)], window));
        }
    }
    return sag;
}

std::vector<int> tile_starts(int voi_len, int patch_len) {
    if (voi_len <= 0) throw std::invalid_argument("tile_starts: empty extent");
    if (patch_len <= 0) throw std::invalid_argument("tile_starts: non-positive patch length");
    if (voi_len <= patch_len) return {0};
    const int k = (voi_len + patch_len - 1) / patch_len;
    std::vector<int> starts(static_cast<size_t>(k));
    const double span = voi_len - patch_len;
    for (int i = 0; i < k; ++i)
        starts[static_cast<size_t>(i)] =
            static_cast<int>(std::lround(i * span / static_cast<double>(k - 1)));
    return starts;
}

std::vector<double> location_features(const std::vector<int>& starts, int patch_len, int voi_len) {
    const double p_eff = std::min(patch_len, voi_len);  // padded tile centers on the VOI
    std::vector<double> locs;
    locs.reserve(starts.size());
    for (int s : starts) locs.push_back((s + p_eff / 2.0) / voi_len);
    return locs;
}

namespace {

float sample_trilinear(const SagittalVolume& sag, double x, double row, double col) {
    const auto clampf = [](double v, int n) { return std::clamp(v, 0.0, static_cast<double>(n - 1)); };
    x = clampf(x, sag.n_slices);
    row = clampf(row, sag.rows);
    col = clampf(col, sag.cols);
    const int x0 = static_cast<int>(x), r0 = static_cast<int>(row), c0 = static_cast<int>(col);
    const int x1 = std::min(x0 + 1, sag.n_slices - 1);
    const int r1 = std::min(r0 + 1, sag.rows - 1);
    const int c1 = std::min(c0 + 1, sag.cols - 1);
    const double fx = x - x0, fr = row - r0, fc = col - c0;
    double acc = 0.0;
    acc += (1 - fx) * (1 - fr) * (1 - fc) * sag.at(x0, r0, c0);
    acc += (1 - fx) * (1 - fr) * fc * sag.at(x0, r0, c1);
    acc += (1 - fx) * fr * (1 - fc) * sag.at(x0, r1, c0);
    acc += (1 - fx) * fr * fc * sag.at(x0, r1, c1);
    acc += fx * (1 - fr) * (1 - fc) * sag.at(x1, r0, c0);
    acc += fx * (1 - fr) * fc * sag.at(x1, r0, c1);
    acc += fx * fr * (1 - fc) * sag.at(x1, r1, c0);
    acc += fx * fr * fc * sag.at(x1, r1, c1);
    return static_cast<float>(acc);
}

}  // namespace

PatchSequence tile_patches(const SagittalVolume& sagittal, const CordTrack& track,
                           const TileConfig& config) {
    if (sagittal.rows <= 0 || sagittal.cols <= 0 || sagittal.n_slices <= 0)
        throw std::invalid_argument("tile_patches: empty sagittal volume");
    if (static_cast<int>(track.size()) != sagittal.src_nz)
        throw std::invalid_argument("tile_patches: track does not cover the source volume");
    if (config.ph <= 0 || config.pw <= 0 || config.pz <= 0)
        throw std::invalid_argument("tile_patches: bad patch size");

    const int L = sagittal.rows;  // VOI spans the full spine axis
    const std::vector<int> starts = tile_starts(L, config.ph);
    const int p_eff = std::min(config.ph, L);

    PatchSequence seq;
    seq.voi_len = L;
    seq.pixel_mm = sagittal.pixel_mm;
    seq.locations = location_features(starts, config.ph, L);

    const double half_x = config.crop_mm / 2.0 / sagittal.src_sx;  // slices
    const double half_y = config.crop_mm / 2.0 / sagittal.src_sy;  // cols
    const double bias_y = config.anterior_bias_mm / sagittal.src_sy;

    for (size_t i = 0; i < starts.size(); ++i) {
        const int s = starts[i];
        // mean cord position over the tile's source slices
        const double row_center = s + p_eff / 2.0;
        const double src_slice =
            std::clamp((row_center + 0.5) * sagittal.src_nz / static_cast<double>(L) - 0.5, 0.0,
                       static_cast<double>(sagittal.src_nz - 1));
        const int z0 = static_cast<int>(src_slice);
        const int z1 = std::min(z0 + 1, sagittal.src_nz - 1);
        const double fz = src_slice - z0;
        const double cx = (1 - fz) * track.center[static_cast<size_t>(z0)][0] +
                          fz * track.center[static_cast<size_t>(z1)][0];
        const double cy = (1 - fz) * track.center[static_cast<size_t>(z0)][1] +
                          fz * track.center[static_cast<size_t>(z1)][1];

        const double x_lo = cx - half_x, x_hi = cx + half_x;
        const double y_lo = cy - bias_y - half_y, y_hi = cy - bias_y + half_y;

        Tensor<float> patch({config.ph, config.pw, config.pz});
        for (int a = 0; a < config.ph; ++a) {
            const double src_row = s + (a + 0.5) * p_eff / static_cast<double>(config.ph) - 0.5;
            for (int bcol = 0; bcol < config.pw; ++bcol) {
                const double src_col =
                    y_lo + (bcol + 0.5) * (y_hi - y_lo) / static_cast<double>(config.pw) - 0.5;
                for (int c = 0; c < config.pz; ++c) {
                    const double src_x =
                        x_lo + (c + 0.5) * (x_hi - x_lo) / static_cast<double>(config.pz) - 0.5;
                    patch[(static_cast<int64_t>(a) * config.pw + bcol) * config.pz + c] =
                        sample_trilinear(sagittal, src_x, src_row, src_col);
                }
            }
        }
        seq.patches.push_back(std::move(patch));
        PatchMeta meta;
        meta.z0 = s;
        meta.z1 = s + p_eff;
        meta.y0 = static_cast<int>(std::lround(y_lo));
        meta.y1 = static_cast<int>(std::lround(y_hi));
        meta.x0 = static_cast<int>(std::lround(x_lo));
        meta.x1 = static_cast<int>(std::lround(x_hi));
        seq.meta.push_back(meta);
    }
    return seq;
}

void save_patch_sequence(const PatchSequence& seq, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("patch_sequence: cannot write: " + path);
    if (seq.patches.empty()) throw std::invalid_argument("patch_sequence: empty sequence");
    const auto& s0 = seq.patches.front().shape;
    std::ostringstream head;
    head << "magic=VSQPSEQ1\n"
         << "k=" << seq.k() << "\n"
         << "ph=" << s0[0] << "\n"
         << "pw=" << s0[1] << "\n"
         << "pz=" << s0[2] << "\n"
         << "\n";
    const std::string h = head.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    auto write_f32 = [&](float v) {
        const auto u = std::bit_cast<uint32_t>(v);
        char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                     static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
        out.write(b, 4);
    };
    for (const auto& p : seq.patches)
        for (int64_t i = 0; i < p.size(); ++i) write_f32(p[i]);
    for (double l : seq.locations) write_f32(static_cast<float>(l));
    if (!out) throw std::runtime_error("patch_sequence: write failed: " + path);
}

PatchSequence load_patch_sequence(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("patch_sequence: cannot open: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) break;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("patch_sequence: malformed header: " + path);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (kv["magic"] != "VSQPSEQ1") throw std::runtime_error("patch_sequence: bad magic: " + path);
    const int k = std::stoi(kv.at("k"));
    const int ph = std::stoi(kv.at("ph"));
    const int pw = std::stoi(kv.at("pw"));
    const int pz = std::stoi(kv.at("pz"));
    auto read_f32 = [&]() {
        char b[4];
        in.read(b, 4);
        if (in.gcount() != 4) throw std::runtime_error("patch_sequence: truncated payload: " + path);
        const uint32_t u = static_cast<uint8_t>(b[0]) | (static_cast<uint32_t>(static_cast<uint8_t>(b[1])) << 8) |
                           (static_cast<uint32_t>(static_cast<uint8_t>(b[2])) << 16) |
                           (static_cast<uint32_t>(static_cast<uint8_t>(b[3])) << 24);
        return std::bit_cast<float>(u);
    };
    PatchSequence seq;
    for (int i = 0; i < k; ++i) {
        Tensor<float> p({ph, pw, pz});
        for (int64_t q = 0; q < p.size(); ++q) p[q] = read_f32();
        seq.patches.push_back(std::move(p));
    }
    for (int i = 0; i < k; ++i) seq.locations.push_back(read_f32());
    return seq;
}

}  // namespace vseq
