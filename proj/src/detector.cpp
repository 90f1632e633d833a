#include "vseq/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace vseq {

CordTrack interpolate_track(const std::vector<BoxDetection>& detections, int nz) {
    if (detections.empty()) throw std::invalid_argument("interpolate_track: no detections");
    for (size_t i = 1; i < detections.size(); ++i)
        if (detections[i].slice_index <= detections[i - 1].slice_index)
            throw std::invalid_argument("interpolate_track: detections must be sorted by slice");
    CordTrack track;
    track.center.resize(static_cast<size_t>(nz));
    track.detected.assign(static_cast<size_t>(nz), false);
    for (const auto& d : detections)
        if (d.slice_index >= 0 && d.slice_index < nz)
            track.detected[static_cast<size_t>(d.slice_index)] = true;
    size_t seg = 0;
    for (int z = 0; z < nz; ++z) {
        if (z <= detections.front().slice_index) {
            track.center[static_cast<size_t>(z)] = {detections.front().cx, detections.front().cy};
            continue;
        }
        if (z >= detections.back().slice_index) {
            track.center[static_cast<size_t>(z)] = {detections.back().cx, detections.back().cy};
            continue;
        }
        while (detections[seg + 1].slice_index < z) ++seg;
        const auto& a = detections[seg];
        const auto& b = detections[seg + 1];
        const double t = static_cast<double>(z - a.slice_index) /
                         static_cast<double>(b.slice_index - a.slice_index);
        track.center[static_cast<size_t>(z)] = {a.cx + t * (b.cx - a.cx), a.cy + t * (b.cy - a.cy)};
    }
    return track;
}

int detection_stride(double sz_mm) {
    if (!(sz_mm > 0.0)) throw std::invalid_argument("detection_stride: sz must be positive");
    return static_cast<int>(std::ceil(30.0 / sz_mm));
}

double box_iou(double cx0, double cy0, double w0, double h0, double cx1, double cy1, double w1,
               double h1) {
    const double ix = std::max(0.0, std::min(cx0 + w0 / 2, cx1 + w1 / 2) -
                                        std::max(cx0 - w0 / 2, cx1 - w1 / 2));
    const double iy = std::max(0.0, std::min(cy0 + h0 / 2, cy1 + h1 / 2) -
                                        std::max(cy0 - h0 / 2, cy1 - h1 / 2));
    const double inter = ix * iy;
    const double uni = w0 * h0 + w1 * h1 - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

Tensor<float> resize_bilinear_2d(const Tensor<float>& img, int oh, int ow) {
    const int h = img.shape[0], w = img.shape[1];
    Tensor<float> out({oh, ow});
    for (int r = 0; r < oh; ++r) {
        double sy = (r + 0.5) * static_cast<double>(h) / oh - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int c = 0; c < ow; ++c) {
            double sx = (c + 0.5) * static_cast<double>(w) / ow - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;
            const double v = (1 - fy) * ((1 - fx) * img[static_cast<int64_t>(y0) * w + x0] +
                                         fx * img[static_cast<int64_t>(y0) * w + x1]) +
                             fy * ((1 - fx) * img[static_cast<int64_t>(y1) * w + x0] +
                                   fx * img[static_cast<int64_t>(y1) * w + x1]);
            out[static_cast<int64_t>(r) * ow + c] = static_cast<float>(v);
        }
    }
    return out;
}

DetectorNet::DetectorNet(const DetectorConfig& cfg_)
    : cfg(cfg_),
      c1(1, 8, 3, 3, 1, 1, 1, 1, 0),
      c2(8, 16, 3, 3, 1, 1, 1, 1, 0),
      c3(16, 32, 3, 3, 1, 1, 1, 1, 0),
      c4(32, 32, 3, 3, 1, 1, 1, 1, 0),
      head(32, 5, 1, 1, 1, 1, 0),
      p1(2, 2, 1),
      p2(2, 2, 1),
      p3(2, 2, 1) {
    if (cfg.grid < 1) throw std::invalid_argument("detector: grid must be >= 1");
    if (cfg.input_size != cfg.grid * 8)
        throw std::invalid_argument("detector: input_size must be grid*8 for the 3-pool backbone");
}

void DetectorNet::init_params() {
    Rng rng(derive_seed(cfg.seed, 0x646574ULL));
    c1.init(rng);
    c2.init(rng);
    c3.init(rng);
    c4.init(rng);
    head.init(rng);
}

Tensor<float> DetectorNet::forward(const Tensor<float>& input) {
    auto t = r1.forward(c1.forward(input));
    t = p1.forward(t);
    t = r2.forward(c2.forward(t));
    t = p2.forward(t);
    t = r3.forward(c3.forward(t));
    t = p3.forward(t);
    t = r4.forward(c4.forward(t));
    return head.forward(t);
}

void DetectorNet::backward(const Tensor<float>& d_out) {
    auto d = head.backward(d_out);
    d = c4.backward(r4.backward(d));
    d = p3.backward(d);
    d = c3.backward(r3.backward(d));
    d = p2.backward(d);
    d = c2.backward(r2.backward(d));
    d = p1.backward(d);
    c1.backward(r1.backward(d));
}

std::vector<Tensor<float>*> DetectorNet::params() {
    return {&c1.w, &c1.b, &c2.w, &c2.b, &c3.w, &c3.b, &c4.w, &c4.b, &head.w, &head.b};
}

std::vector<Tensor<float>*> DetectorNet::grads() {
    return {&c1.gw, &c1.gb, &c2.gw, &c2.gb, &c3.gw, &c3.gb, &c4.gw, &c4.gb, &head.gw, &head.gb};
}

void DetectorNet::zero_grad() {
    c1.zero_grad();
    c2.zero_grad();
    c3.zero_grad();
    c4.zero_grad();
    head.zero_grad();
}

BoxDetection decode_cell(const CellPrediction& p, const DetectorConfig& cfg, double confidence) {
    const double cell = static_cast<double>(cfg.input_size) / cfg.grid;
    BoxDetection box;
    box.cx = (p.gx + sigmoid(p.tx)) * cell;
    box.cy = (p.gy + sigmoid(p.ty)) * cell;
    box.w = cfg.anchor_px * std::exp(p.tw);
    box.h = cfg.anchor_px * std::exp(p.th);
    box.confidence = confidence;
    return box;
}

CellPrediction encode_box(double cx, double cy, double w, double h, const DetectorConfig& cfg) {
    const double cell = static_cast<double>(cfg.input_size) / cfg.grid;
    CellPrediction p;
    p.gx = std::clamp(static_cast<int>(cx / cell), 0, cfg.grid - 1);
    p.gy = std::clamp(static_cast<int>(cy / cell), 0, cfg.grid - 1);
    auto logit = [](double v) {
        const double c = std::clamp(v, 1e-9, 1.0 - 1e-9);
        return std::log(c / (1.0 - c));
    };
    p.tx = logit(cx / cell - p.gx);
    p.ty = logit(cy / cell - p.gy);
    p.tw = std::log(w / cfg.anchor_px);
    p.th = std::log(h / cfg.anchor_px);
    return p;
}

namespace {

// raw head output (5,g,g,1): channels tx, ty, tw, th, conf
struct RawIdx {
    int g;
    int64_t operator()(int ch, int gy, int gx) const {
        return ((static_cast<int64_t>(ch) * g + gy) * g + gx);
    }
};

}  // namespace

BoxDetection detect_slice(const Tensor<float>& slice, DetectorNet& net) {
    if (slice.shape.size() != 2) throw std::invalid_argument("detect_slice: expected 2D slice");
    const int S = net.cfg.input_size;
    Tensor<float> resized = resize_bilinear_2d(slice, S, S);
    Tensor<float> input({1, S, S, 1});
    input.data = resized.data;
    const Tensor<float> out = net.forward(input);

    const int g = net.cfg.grid;
    const RawIdx at{g};
    int best_gy = 0, best_gx = 0;
    double best_conf = -1.0;
    for (int gy = 0; gy < g; ++gy)
        for (int gx = 0; gx < g; ++gx) {
            const double conf = sigmoid(static_cast<double>(out[at(4, gy, gx)]));
            if (conf > best_conf) {
                best_conf = conf;
                best_gy = gy;
                best_gx = gx;
            }
        }
    CellPrediction p;
    p.gy = best_gy;
    p.gx = best_gx;
    p.tx = out[at(0, best_gy, best_gx)];
    p.ty = out[at(1, best_gy, best_gx)];
    p.tw = out[at(2, best_gy, best_gx)];
    p.th = out[at(3, best_gy, best_gx)];
    BoxDetection box = decode_cell(p, net.cfg, best_conf);
    // back to source-slice coordinates
    const double scale_x = static_cast<double>(slice.shape[1]) / S;
    const double scale_y = static_cast<double>(slice.shape[0]) / S;
    box.cx *= scale_x;
    box.w *= scale_x;
    box.cy *= scale_y;
    box.h *= scale_y;
    return box;
}

namespace {

Tensor<float> windowed_slice(const Volume& vol, int z, const WindowSpec& window) {
    Tensor<float> slice({vol.ny, vol.nx});
    for (int y = 0; y < vol.ny; ++y)
        for (int x = 0; x < vol.nx; ++x)
            slice[static_cast<int64_t>(y) * vol.nx + x] =
                static_cast<float>(window_value(vol.at(z, y, x), window));
    return slice;
}

}  // namespace

CordTrack detect_cord_track(const Volume& volume, DetectorNet& net, const WindowSpec& window) {
    const int stride = detection_stride(volume.sz);
    std::vector<BoxDetection> dets;
    for (int z = 0; z < volume.nz; z += stride) {
        Tensor<float> slice = windowed_slice(volume, z, window);
        BoxDetection d = detect_slice(slice, net);
        d.slice_index = z;
        dets.push_back(d);
    }
    return interpolate_track(dets, volume.nz);
}

CordTrack cord_track_from_truth(const SeriesTruth& truth, int nz) {
    if (static_cast<int>(truth.cord.size()) != nz)
        throw std::invalid_argument("cord_track_from_truth: slice count mismatch");
    CordTrack t;
    t.center = truth.cord;
    t.detected.assign(static_cast<size_t>(nz), true);
    return t;
}

DetectorTrainResult train_detector(DetectorNet& net, const std::vector<DetectorExample>& dataset,
                                   const DetectorTrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train_detector: empty dataset");
    const int S = net.cfg.input_size;
    const int g = net.cfg.grid;
    const double cell = static_cast<double>(S) / g;
    const RawIdx at{g};

    // precompute inputs and targets in detector input space
    struct Prepared {
        Tensor<float> input;
        int gy, gx;
        double fx, fy, tw, th;
    };
    std::vector<Prepared> prep;
    prep.reserve(dataset.size());
    for (const auto& ex : dataset) {
        Prepared p;
        Tensor<float> resized = resize_bilinear_2d(ex.slice, S, S);
        p.input = Tensor<float>({1, S, S, 1});
        p.input.data = resized.data;
        const double sx = static_cast<double>(S) / ex.slice.shape[1];
        const double sy = static_cast<double>(S) / ex.slice.shape[0];
        const double cx = ex.cx * sx, cy = ex.cy * sy;
        p.gx = std::clamp(static_cast<int>(cx / cell), 0, g - 1);
        p.gy = std::clamp(static_cast<int>(cy / cell), 0, g - 1);
        p.fx = cx / cell - p.gx;
        p.fy = cy / cell - p.gy;
        p.tw = std::log(std::max(ex.w * sx, 1e-6) / net.cfg.anchor_px);
        p.th = std::log(std::max(ex.h * sy, 1e-6) / net.cfg.anchor_px);
        prep.push_back(std::move(p));
    }

    Adam<float> adam;
    adam.lr = cfg.lr;
    adam.init(net.params());
    Rng rng(derive_seed(cfg.seed, 0x747261696eULL));

    auto item_loss = [&](const Prepared& p, Tensor<float>* d_out) -> double {
        const Tensor<float> out = net.forward(p.input);
        double loss = 0.0;
        if (d_out) *d_out = Tensor<float>(out.shape);
        for (int gy = 0; gy < g; ++gy)
            for (int gx = 0; gx < g; ++gx) {
                const bool resp = gy == p.gy && gx == p.gx;
                const double conf_raw = out[at(4, gy, gx)];
                const double conf = sigmoid(conf_raw);
                const double wgt = resp ? 1.0 : cfg.noobj_weight;
                loss += wgt * bce_loss(conf, resp ? 1.0 : 0.0);
                if (d_out)
                    (*d_out)[at(4, gy, gx)] = static_cast<float>(wgt * (conf - (resp ? 1.0 : 0.0)));
                if (!resp) continue;
                const double sx_ = sigmoid(static_cast<double>(out[at(0, gy, gx)]));
                const double sy_ = sigmoid(static_cast<double>(out[at(1, gy, gx)]));
                const double tw_ = out[at(2, gy, gx)];
                const double th_ = out[at(3, gy, gx)];
                loss += cfg.coord_weight * ((sx_ - p.fx) * (sx_ - p.fx) + (sy_ - p.fy) * (sy_ - p.fy) +
                                            (tw_ - p.tw) * (tw_ - p.tw) + (th_ - p.th) * (th_ - p.th));
                if (d_out) {
                    (*d_out)[at(0, gy, gx)] =
                        static_cast<float>(cfg.coord_weight * 2.0 * (sx_ - p.fx) * sx_ * (1.0 - sx_));
                    (*d_out)[at(1, gy, gx)] =
                        static_cast<float>(cfg.coord_weight * 2.0 * (sy_ - p.fy) * sy_ * (1.0 - sy_));
                    (*d_out)[at(2, gy, gx)] = static_cast<float>(cfg.coord_weight * 2.0 * (tw_ - p.tw));
                    (*d_out)[at(3, gy, gx)] = static_cast<float>(cfg.coord_weight * 2.0 * (th_ - p.th));
                }
            }
        return loss;
    };

    auto mean_loss = [&]() {
        double total = 0.0;
        for (const auto& p : prep) total += item_loss(p, nullptr);
        return total / static_cast<double>(prep.size());
    };

    DetectorTrainResult result;
    result.initial_loss = mean_loss();

    std::vector<size_t> order(prep.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Tensor<float>> grad_acc;
    for (auto* gp : net.grads()) grad_acc.emplace_back(gp->shape);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
            for (auto& gacc : grad_acc) gacc.zero();
            for (size_t bi = start; bi < end; ++bi) {
                net.zero_grad();
                Tensor<float> d_out;
                item_loss(prep[order[bi]], &d_out);
                const float inv = 1.0f / static_cast<float>(end - start);
                for (int64_t q = 0; q < d_out.size(); ++q) d_out[q] *= inv;
                net.backward(d_out);
                auto gs = net.grads();
                for (size_t gi = 0; gi < gs.size(); ++gi)
                    for (int64_t q = 0; q < gs[gi]->size(); ++q) grad_acc[gi][q] += (*gs[gi])[q];
            }
            std::vector<const Tensor<float>*> gptrs;
            for (auto& gacc : grad_acc) gptrs.push_back(&gacc);
            adam.step(net.params(), gptrs);
        }
    }
    result.final_loss = mean_loss();
    return result;
}

std::vector<DetectorExample> sample_detector_examples(const DatasetManifest& manifest,
                                                      const std::string& part, int n_slices,
                                                      const WindowSpec& window, uint64_t seed) {
    auto series = manifest.partition(part);
    if (series.empty()) throw std::invalid_argument("sample_detector_examples: empty partition");
    Rng rng(derive_seed(seed, 0x736c696365ULL));
    std::map<std::string, std::pair<Volume, SeriesTruth>> cache;
    std::vector<DetectorExample> out;
    out.reserve(static_cast<size_t>(n_slices));
    for (int i = 0; i < n_slices; ++i) {
        const auto* entry = series[rng.uniform_index(series.size())];
        const std::string path = manifest.volume_path(*entry);
        auto it = cache.find(path);
        if (it == cache.end())
            it = cache.emplace(path, std::make_pair(load_volume(path), load_truth(path + ".truth")))
                     .first;
        const Volume& vol = it->second.first;
        const SeriesTruth& truth = it->second.second;

        double z0 = 1e30, z1 = -1e30;
        for (const auto& v : truth.vertebrae) {
            z0 = std::min(z0, v.z0_mm);
            z1 = std::max(z1, v.z1_mm);
        }
        const int zlo = std::clamp(static_cast<int>(z0 / vol.sz), 0, vol.nz - 1);
        const int zhi = std::clamp(static_cast<int>(z1 / vol.sz), zlo + 1, vol.nz);
        const int z = zlo + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(zhi - zlo)));

        DetectorExample ex;
        ex.slice = windowed_slice(vol, z, window);
        ex.cx = truth.cord[static_cast<size_t>(z)][0];
        ex.cy = truth.cord[static_cast<size_t>(z)][1];
        ex.w = 2.0 * truth.canal_radius_mm / vol.sx;
        ex.h = 2.0 * truth.canal_radius_mm / vol.sy;
        out.push_back(std::move(ex));
    }
    return out;
}

void save_detector(const DetectorNet& net, const std::string& path) {
    CheckpointData ckpt;
    ckpt.meta["kind"] = "detector";
    ckpt.meta["format"] = "1";
    ckpt.meta["input_size"] = std::to_string(net.cfg.input_size);
    ckpt.meta["grid"] = std::to_string(net.cfg.grid);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", net.cfg.anchor_px);
    ckpt.meta["anchor_px"] = buf;
    ckpt.meta["seed"] = std::to_string(net.cfg.seed);
    ckpt.tensors = {{"c1.w", net.c1.w}, {"c1.b", net.c1.b}, {"c2.w", net.c2.w}, {"c2.b", net.c2.b},
                    {"c3.w", net.c3.w}, {"c3.b", net.c3.b}, {"c4.w", net.c4.w}, {"c4.b", net.c4.b},
                    {"head.w", net.head.w}, {"head.b", net.head.b}};
    save_checkpoint(ckpt, path);
}

DetectorNet load_detector(const std::string& path) {
    CheckpointData ckpt = load_checkpoint(path);
    if (ckpt.meta.at("kind") != "detector")
        throw std::runtime_error("load_detector: checkpoint is not a detector: " + path);
    DetectorConfig cfg;
    cfg.input_size = std::stoi(ckpt.meta.at("input_size"));
    cfg.grid = std::stoi(ckpt.meta.at("grid"));
    cfg.anchor_px = std::stod(ckpt.meta.at("anchor_px"));
    cfg.seed = std::stoull(ckpt.meta.at("seed"));
    DetectorNet net(cfg);
    net.c1.w = ckpt.tensor("c1.w");
    net.c1.b = ckpt.tensor("c1.b");
    net.c2.w = ckpt.tensor("c2.w");
    net.c2.b = ckpt.tensor("c2.b");
    net.c3.w = ckpt.tensor("c3.w");
    net.c3.b = ckpt.tensor("c3.b");
    net.c4.w = ckpt.tensor("c4.w");
    net.c4.b = ckpt.tensor("c4.b");
    net.head.w = ckpt.tensor("head.w");
    net.head.b = ckpt.tensor("head.b");
    return net;
}

}  // namespace vseq
