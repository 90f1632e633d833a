#include "vseq/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vseq/rng.hpp"

namespace vseq {

const char* grade_name(Grade g) {
    switch (g) {
        case Grade::none: return "none";
        case Grade::mild: return "mild";
        case Grade::moderate: return "moderate";
        case Grade::severe: return "severe";
    }
    return "none";
}

Grade grade_from_name(const std::string& s) {
    if (s == "none") return Grade::none;
    if (s == "mild") return Grade::mild;
    if (s == "moderate") return Grade::moderate;
    if (s == "severe") return Grade::severe;
    throw std::invalid_argument("unknown Genant grade: " + s);
}

std::pair<double, double> grade_band(Grade g) {
    switch (g) {
        case Grade::none: return {0.0, 0.0};
        case Grade::mild: return {0.20, 0.25};
        case Grade::moderate: return {0.25, 0.40};
        case Grade::severe: return {0.40, 0.60};
    }
    return {0.0, 0.0};
}

int PhantomSpec::nz() const {
    return static_cast<int>(std::ceil((spine_length_mm() + 2.0 * z_margin_mm) / sz));
}

void PhantomSpec::validate() const {
    if (n_vertebrae < 1) throw std::invalid_argument("phantom: n_vertebrae must be >= 1");
    if (!(bone_hu > soft_tissue_hu)) throw std::invalid_argument("phantom: bone_hu must exceed soft_tissue_hu");
    if (noise_sigma_hu < 0.0) throw std::invalid_argument("phantom: noise_sigma_hu must be >= 0");
    if (nx <= 0 || ny <= 0 || !(sx > 0) || !(sy > 0) || !(sz > 0))
        throw std::invalid_argument("phantom: bad grid");
    if (bone_hu > kHuMax || soft_tissue_hu < kHuMin || canal_hu < kHuMin)
        throw std::invalid_argument("phantom: HU levels outside valid range");
}

namespace {

struct Curve {
    double x0, y0, amp, phase_x, phase_y, spine_z0, spine_len;

    // continuous canal center in mm at axial position z_mm
    std::pair<double, double> at(double z_mm) const {
        const double t = (z_mm - spine_z0) / spine_len;
        const double cx = x0 + amp * std::sin(2.0 * std::numbers::pi * t + phase_x);
        const double cy = y0 + 0.5 * amp * std::sin(std::numbers::pi * t + phase_y);
        return {cx, cy};
    }
};

}  // namespace

std::pair<Volume, SeriesLabel> generate_series(const PhantomSpec& spec,
                                               const std::vector<FractureEntry>& plan) {
    spec.validate();
    std::set<int> seen;
    for (const auto& e : plan) {
        if (e.vertebra < 0 || e.vertebra >= spec.n_vertebrae)
            throw std::invalid_argument("phantom plan: vertebra index out of range");
        if (e.grade == Grade::none)
            throw std::invalid_argument("phantom plan: grade must not be none");
        if (!seen.insert(e.vertebra).second)
            throw std::invalid_argument("phantom plan: overlapping entries for one vertebra");
    }

    Rng rng(spec.seed);
    const double spine_z0 = spec.z_margin_mm;
    Curve curve;
    curve.x0 = spec.nx * spec.sx * 0.5 + rng.uniform(-4.0, 4.0);
    curve.y0 = spec.ny * spec.sy * 0.55 + rng.uniform(-4.0, 4.0);
    curve.amp = spec.curvature_amplitude_mm;
    curve.phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
    curve.phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
    curve.spine_z0 = spine_z0;
    curve.spine_len = spec.spine_length_mm();
    const double width = spec.vertebra_width_mm + rng.uniform(-2.0, 2.0);
    const double depth = spec.body_depth_mm + rng.uniform(-2.0, 2.0);

    SeriesLabel label;
    label.per_vertebra.resize(static_cast<size_t>(spec.n_vertebrae));
    const double pitch = spec.vertebra_height_mm + spec.disc_gap_mm;
    for (int i = 0; i < spec.n_vertebrae; ++i) {
        auto& v = label.per_vertebra[static_cast<size_t>(i)];
        v.index = i;
        v.z0_mm = spine_z0 + i * pitch;
        v.z1_mm = v.z0_mm + spec.vertebra_height_mm;
    }
    for (const auto& e : plan) {
        auto& v = label.per_vertebra[static_cast<size_t>(e.vertebra)];
        auto [lo, hi] = grade_band(e.grade);
        v.fractured = true;
        v.grade = e.grade;
        v.height_loss = rng.uniform(lo, hi);
        const double crush = v.height_loss * spec.vertebra_height_mm * 0.5;
        v.z0_mm += crush;
        v.z1_mm -= crush;
        label.series_positive = true;
    }

    Volume vol;
    vol.nz = spec.nz();
    vol.ny = spec.ny;
    vol.nx = spec.nx;
    vol.sz = spec.sz;
    vol.sy = spec.sy;
    vol.sx = spec.sx;
    vol.data.assign(static_cast<size_t>(vol.voxels()), spec.soft_tissue_hu);

    label.canal_centerline.resize(static_cast<size_t>(vol.nz));
    const double body_gap = spec.canal_radius_mm + 2.0;  // canal center to body posterior edge
    const uint64_t noise_base = derive_seed(spec.seed, 0x6e6f697365ULL);

#pragma omp parallel for schedule(static)
    for (int z = 0; z < vol.nz; ++z) {
        const double zc = (z + 0.5) * spec.sz;
        const auto [cx, cy] = curve.at(zc);
        label.canal_centerline[static_cast<size_t>(z)] = {cx / spec.sx - 0.5, cy / spec.sy - 0.5};

        // fractional z-coverage of this slice by a vertebra (partial-volume
        // rendering keeps sub-voxel height changes visible)
        double coverage = 0.0;
        const double zlo = z * spec.sz, zhi = (z + 1) * spec.sz;
        for (const auto& v : label.per_vertebra) {
            const double ov = std::min(zhi, v.z1_mm) - std::max(zlo, v.z0_mm);
            if (ov > 0.0) coverage += ov / spec.sz;
        }
        coverage = std::min(coverage, 1.0);

        Rng noise(derive_seed(noise_base, static_cast<uint64_t>(z)));
        for (int y = 0; y < vol.ny; ++y) {
            const double yc = (y + 0.5) * spec.sy;
            for (int x = 0; x < vol.nx; ++x) {
                const double xc = (x + 0.5) * spec.sx;
                double hu = spec.soft_tissue_hu;
                if (coverage > 0.0) {
                    const bool in_body = std::abs(xc - cx) <= width * 0.5 &&
                                         yc >= cy - body_gap - depth && yc <= cy - body_gap;
                    const bool in_arch = std::abs(xc - cx) <= spec.arch_half_width_mm &&
                                         std::abs(yc - cy) <= spec.arch_half_depth_mm;
                    if (in_body || in_arch)
                        hu += coverage * (spec.bone_hu - spec.soft_tissue_hu);
                }
                const double dx = xc - cx, dy = yc - cy;
                if (dx * dx + dy * dy <= spec.canal_radius_mm * spec.canal_radius_mm)
                    hu = spec.canal_hu;  // cord runs the whole scan
                if (spec.noise_sigma_hu > 0.0) hu += spec.noise_sigma_hu * noise.normal();
                const double q = std::clamp(std::round(hu), static_cast<double>(kHuMin),
                                            static_cast<double>(kHuMax));
                vol.at(z, y, x) = static_cast<int16_t>(q);
            }
        }
    }
    return {std::move(vol), std::move(label)};
}

std::vector<const ManifestEntry*> DatasetManifest::partition(const std::string& part) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.part == part) out.push_back(&e);
    return out;
}

namespace {

std::string fracture_field(const std::vector<VertebraLabel>& fx) {
    if (fx.empty()) return "-";
    std::string out;
    char buf[96];
    for (size_t i = 0; i < fx.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s%d:%s:%.6f", i ? "," : "", fx[i].index,
                      grade_name(fx[i].grade), fx[i].height_loss);
        out += buf;
    }
    return out;
}

std::vector<VertebraLabel> parse_fracture_field(const std::string& s) {
    std::vector<VertebraLabel> out;
    if (s == "-") return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto p1 = item.find(':');
        auto p2 = item.find(':', p1 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos)
            throw std::runtime_error("manifest: bad fracture entry: " + item);
        VertebraLabel v;
        v.index = std::stoi(item.substr(0, p1));
        v.grade = grade_from_name(item.substr(p1 + 1, p2 - p1 - 1));
        v.height_loss = std::stod(item.substr(p2 + 1));
        v.fractured = true;
        out.push_back(v);
    }
    return out;
}

std::map<std::string, std::string> parse_kv_line(const std::string& line) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::runtime_error("manifest: malformed token: " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

}  // namespace

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("manifest: cannot write: " + path);
    out << "# vseq dataset manifest v1\n";
    for (const auto& e : m.entries) {
        char head[160];
        std::snprintf(head, sizeof(head), "series=%03d path=%s part=%s label=%d fractures=",
                      e.series, e.path.c_str(), e.part.c_str(), e.positive ? 1 : 0);
        out << head << fracture_field(e.fractures) << "\n";
    }
    if (!out) throw std::runtime_error("manifest: write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open: " + path);
    DatasetManifest m;
    m.dir = std::filesystem::path(path).parent_path().string();
    if (m.dir.empty()) m.dir = ".";
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto kv = parse_kv_line(line);
        ManifestEntry e;
        e.series = std::stoi(kv.at("series"));
        e.path = kv.at("path");
        e.part = kv.at("part");
        e.positive = kv.at("label") == "1";
        e.fractures = parse_fracture_field(kv.at("fractures"));
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_truth(const SeriesTruth& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("truth: cannot write: " + path);
    out << "# vseq truth v1\n";
    char buf[192];
    std::snprintf(buf, sizeof(buf), "canal_radius_mm=%.6f\n", t.canal_radius_mm);
    out << buf;
    for (const auto& v : t.vertebrae) {
        std::snprintf(buf, sizeof(buf),
                      "vertebra=%d z0_mm=%.6f z1_mm=%.6f flag=%d grade=%s fraction=%.6f\n",
                      v.index, v.z0_mm, v.z1_mm, v.fractured ? 1 : 0, grade_name(v.grade),
                      v.height_loss);
        out << buf;
    }
    for (size_t z = 0; z < t.cord.size(); ++z) {
        std::snprintf(buf, sizeof(buf), "cord=%zu cx=%.6f cy=%.6f\n", z, t.cord[z][0],
                      t.cord[z][1]);
        out << buf;
    }
    if (!out) throw std::runtime_error("truth: write failed: " + path);
}

SeriesTruth load_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("truth: cannot open: " + path);
    SeriesTruth t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto kv = parse_kv_line(line);
        if (kv.count("vertebra")) {
            VertebraLabel v;
            v.index = std::stoi(kv.at("vertebra"));
            v.z0_mm = std::stod(kv.at("z0_mm"));
            v.z1_mm = std::stod(kv.at("z1_mm"));
            v.fractured = kv.at("flag") == "1";
            v.grade = grade_from_name(kv.at("grade"));
            v.height_loss = std::stod(kv.at("fraction"));
            t.vertebrae.push_back(v);
        } else if (kv.count("cord")) {
            const size_t z = static_cast<size_t>(std::stoul(kv.at("cord")));
            if (t.cord.size() <= z) t.cord.resize(z + 1);
            t.cord[z] = {std::stod(kv.at("cx")), std::stod(kv.at("cy"))};
        } else if (kv.count("canal_radius_mm")) {
            t.canal_radius_mm = std::stod(kv.at("canal_radius_mm"));
        }
    }
    return t;
}

DatasetManifest make_dataset(const std::string& out_dir, int n_series, double positive_fraction,
                             const PhantomSpec& spec, uint64_t seed) {
    if (n_series < 10) throw std::invalid_argument("make_dataset: n_series must be >= 10");
    if (positive_fraction < 0.0 || positive_fraction > 1.0)
        throw std::invalid_argument("make_dataset: positive_fraction must be in [0,1]");
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir))
        throw std::runtime_error("make_dataset: cannot create output directory: " + out_dir);

    Rng rng(derive_seed(seed, 0x64617461ULL));
    const int n_pos = static_cast<int>(std::lround(positive_fraction * n_series));

    // shuffled order decides which series are positive and the split layout
    std::vector<int> order(static_cast<size_t>(n_series));
    for (int i = 0; i < n_series; ++i) order[static_cast<size_t>(i)] = i;
    for (int i = n_series - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)],
                  order[static_cast<size_t>(rng.uniform_index(static_cast<uint64_t>(i + 1)))]);

    std::vector<bool> positive(static_cast<size_t>(n_series), false);
    std::vector<int> pos_ids, neg_ids;
    for (int r = 0; r < n_series; ++r) {
        const int id = order[static_cast<size_t>(r)];
        if (r < n_pos) {
            positive[static_cast<size_t>(id)] = true;
            pos_ids.push_back(id);
        } else {
            neg_ids.push_back(id);
        }
    }

    // stratified 80/10/10 split with exact total partition sizes
    const int n_train = static_cast<int>(std::lround(0.8 * n_series));
    const int n_tune = static_cast<int>(std::lround(0.1 * n_series));
    const int pos_train = static_cast<int>(std::lround(0.8 * n_pos));
    const int pos_tune = static_cast<int>(std::lround(0.1 * n_pos));
    std::vector<std::string> part(static_cast<size_t>(n_series));
    for (size_t r = 0; r < pos_ids.size(); ++r) {
        const int i = static_cast<int>(r);
        part[static_cast<size_t>(pos_ids[r])] =
            i < pos_train ? "train" : (i < pos_train + pos_tune ? "tune" : "test");
    }
    const int neg_train = n_train - pos_train;
    const int neg_tune = n_tune - pos_tune;
    for (size_t r = 0; r < neg_ids.size(); ++r) {
        const int i = static_cast<int>(r);
        part[static_cast<size_t>(neg_ids[r])] =
            i < neg_train ? "train" : (i < neg_train + neg_tune ? "tune" : "test");
    }

    // fracture plans are drawn serially so generation order never depends
    // on the parallel schedule
    std::vector<std::vector<FractureEntry>> plans(static_cast<size_t>(n_series));
    for (int i = 0; i < n_series; ++i) {
        if (!positive[static_cast<size_t>(i)]) continue;
        auto& plan = plans[static_cast<size_t>(i)];
        const int n_frac = rng.bernoulli(0.35) ? 2 : 1;
        std::set<int> used;
        for (int f = 0; f < n_frac; ++f) {
            int idx;
            do {
                idx = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(spec.n_vertebrae)));
            } while (!used.insert(idx).second);
            const double u = rng.uniform();
            const Grade g = u < 0.25 ? Grade::mild : (u < 0.65 ? Grade::moderate : Grade::severe);
            plan.push_back({idx, g});
        }
        std::sort(plan.begin(), plan.end(),
                  [](const FractureEntry& a, const FractureEntry& b) { return a.vertebra < b.vertebra; });
    }

    DatasetManifest m;
    m.dir = out_dir;
    m.entries.resize(static_cast<size_t>(n_series));

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_series; ++i) {
        PhantomSpec s = spec;
        s.seed = derive_seed(seed, static_cast<uint64_t>(i));
        auto [vol, lab] = generate_series(s, plans[static_cast<size_t>(i)]);
        char name[64];
        std::snprintf(name, sizeof(name), "series_%03d.vsq", i);
        const std::string vol_path = out_dir + "/" + name;
        save_volume(vol, vol_path);
        SeriesTruth truth;
        truth.vertebrae = lab.per_vertebra;
        truth.cord = lab.canal_centerline;
        truth.canal_radius_mm = spec.canal_radius_mm;
        save_truth(truth, vol_path + ".truth");

        ManifestEntry e;
        e.series = i;
        e.path = name;
        e.part = part[static_cast<size_t>(i)];
        e.positive = lab.series_positive;
        for (const auto& v : lab.per_vertebra)
            if (v.fractured) e.fractures.push_back(v);
        m.entries[static_cast<size_t>(i)] = std::move(e);
    }

    save_manifest(m, out_dir + "/manifest.txt");
    return m;
}

}  // namespace vseq
