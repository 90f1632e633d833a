#include "vseq/volume.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vseq {

void Volume::validate() const {
    if (nz <= 0 || ny <= 0 || nx <= 0)
        throw std::invalid_argument("volume: non-positive dimension");
    if (!(sz > 0.0) || !(sy > 0.0) || !(sx > 0.0))
        throw std::invalid_argument("volume: spacings must be strictly positive");
    if (static_cast<int64_t>(data.size()) != voxels())
        throw std::invalid_argument("volume: data length does not match shape");
    for (int16_t v : data)
        if (v < kHuMin || v > kHuMax)
            throw std::invalid_argument("volume: HU value out of [-1024, 3071]");
}

namespace {

std::string format_spacing(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_spacing(const std::string& s, const char* key) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error(std::string("volume header: bad value for ") + key);
    }
}

int parse_dim(const std::string& s, const char* key) {
    try {
        size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size() || v <= 0) throw std::invalid_argument("");
        return static_cast<int>(v);
    } catch (...) {
        throw std::runtime_error(std::string("volume header: bad value for ") + key);
    }
}

}  // namespace

Volume load_volume(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("volume: cannot open file: " + path);

    std::map<std::string, std::string> kv;
    std::string line;
    bool terminated = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            terminated = true;
            break;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("volume header: malformed line (no '='): " + path);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!terminated) throw std::runtime_error("volume header: missing blank-line terminator: " + path);
    auto need = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error(std::string("volume header: missing key ") + key + ": " + path);
        return it->second;
    };
    if (need("magic") != "VSQ1")
        throw std::runtime_error("volume header: bad magic (expected VSQ1): " + path);

    Volume v;
    v.nz = parse_dim(need("nz"), "nz");
    v.ny = parse_dim(need("ny"), "ny");
    v.nx = parse_dim(need("nx"), "nx");
    v.sz = parse_spacing(need("sz_mm"), "sz_mm");
    v.sy = parse_spacing(need("sy_mm"), "sy_mm");
    v.sx = parse_spacing(need("sx_mm"), "sx_mm");
    if (!(v.sz > 0.0) || !(v.sy > 0.0) || !(v.sx > 0.0))
        throw std::runtime_error("volume header: spacings must be strictly positive: " + path);

    const int64_t n = v.voxels();
    std::vector<char> raw(static_cast<size_t>(n) * 2);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("volume payload: data length mismatch (too short): " + path);
    char extra;
    if (in.read(&extra, 1) && in.gcount() == 1)
        throw std::runtime_error("volume payload: data length mismatch (trailing bytes): " + path);

    v.data.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const auto lo = static_cast<uint8_t>(raw[static_cast<size_t>(2 * i)]);
        const auto hi = static_cast<uint8_t>(raw[static_cast<size_t>(2 * i + 1)]);
        v.data[static_cast<size_t>(i)] =
            static_cast<int16_t>(static_cast<uint16_t>(lo) | (static_cast<uint16_t>(hi) << 8));
    }
    for (int16_t h : v.data)
        if (h < kHuMin || h > kHuMax)
            throw std::runtime_error("volume payload: HU value out of [-1024, 3071]: " + path);
    return v;
}

void save_volume(const Volume& volume, const std::string& path) {
    volume.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("volume: cannot open file for writing: " + path);

    std::ostringstream header;
    header << "magic=VSQ1\n"
           << "nz=" << volume.nz << "\n"
           << "ny=" << volume.ny << "\n"
           << "nx=" << volume.nx << "\n"
           << "sz_mm=" << format_spacing(volume.sz) << "\n"
           << "sy_mm=" << format_spacing(volume.sy) << "\n"
           << "sx_mm=" << format_spacing(volume.sx) << "\n"
           << "\n";
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));

    std::vector<char> raw(static_cast<size_t>(volume.voxels()) * 2);
    for (int64_t i = 0; i < volume.voxels(); ++i) {
        const auto u = static_cast<uint16_t>(volume.data[static_cast<size_t>(i)]);
        raw[static_cast<size_t>(2 * i)] = static_cast<char>(u & 0xff);
        raw[static_cast<size_t>(2 * i + 1)] = static_cast<char>((u >> 8) & 0xff);
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("volume: write failed: " + path);
}

double window_value(double hu, const WindowSpec& window) {
    if (!(window.width > 0.0)) throw std::invalid_argument("window: width must be > 0");
    const double lo = window.center - window.width / 2.0;
    const double t = (hu - lo) / window.width;
    return std::clamp(t, 0.0, 1.0);
}

Grid3 apply_window(const Volume& volume, const WindowSpec& window) {
    if (!(window.width > 0.0)) throw std::invalid_argument("window: width must be > 0");
    Grid3 g;
    g.nz = volume.nz; g.ny = volume.ny; g.nx = volume.nx;
    g.sz = volume.sz; g.sy = volume.sy; g.sx = volume.sx;
    g.data.resize(volume.data.size());
    const double lo = window.center - window.width / 2.0;
    const double inv = 1.0 / window.width;
    for (size_t i = 0; i < volume.data.size(); ++i) {
        const double t = (static_cast<double>(volume.data[i]) - lo) * inv;
        g.data[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
    return g;
}

}  // namespace vseq
