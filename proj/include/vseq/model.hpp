#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vseq/checkpoint.hpp"
#include "vseq/nn.hpp"
#include "vseq/representation.hpp"

namespace vseq {

enum class SeqVariant { max_prob, max_prob_loc, lstm, bilstm };

const char* variant_name(SeqVariant v);
SeqVariant variant_from_name(const std::string& s);

struct ModelConfig {
    int ph = 32, pw = 32, pz = 16;
    int feature_dim = 64;
    int base_filters = 8;  // doubled per block: base, 2*base, 4*base
    SeqVariant variant = SeqVariant::max_prob;
    int smooth_width = 3;    // odd; both the max-filter window and the
                             // aggregation smoothing width
    double lambda_seq = 1.0; // weight of the per-patch loss term
    bool use_location = false;
    int lstm_hidden = 32;
    uint64_t seed = 0;

    bool location_enabled() const { return use_location || variant == SeqVariant::max_prob_loc; }
    int item_dim() const { return feature_dim + (location_enabled() ? 1 : 0); }
    void validate() const;
};

// sliding-window max over the sequence, window centered and edge-clipped;
// argsrc records which item supplied each maximum (first on ties)
template <typename T>
std::vector<T> sliding_max(const std::vector<T>& s, int window, std::vector<int>* argsrc = nullptr) {
    const int k = static_cast<int>(s.size());
    const int half = window / 2;
    std::vector<T> out(static_cast<size_t>(k));
    if (argsrc) argsrc->assign(static_cast<size_t>(k), 0);
    for (int i = 0; i < k; ++i) {
        const int lo = std::max(0, i - half), hi = std::min(k - 1, i + half);
        int best = lo;
        for (int j = lo + 1; j <= hi; ++j)
            if (s[static_cast<size_t>(j)] > s[static_cast<size_t>(best)]) best = j;
        out[static_cast<size_t>(i)] = s[static_cast<size_t>(best)];
        if (argsrc) (*argsrc)[static_cast<size_t>(i)] = best;
    }
    return out;
}

// centered moving average, edge-clipped and renormalized by the actual
// window size
template <typename T>
std::vector<T> smooth_probs(const std::vector<T>& p, int width) {
    const int k = static_cast<int>(p.size());
    const int half = width / 2;
    std::vector<T> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        const int lo = std::max(0, i - half), hi = std::min(k - 1, i + half);
        T acc = T(0);
        for (int j = lo; j <= hi; ++j) acc += p[static_cast<size_t>(j)];
        out[static_cast<size_t>(i)] = acc / static_cast<T>(hi - lo + 1);
    }
    return out;
}

// F_agg: smoothed max; returns (score, argmax index into the smoothed sequence)
template <typename T>
std::pair<T, int> smoothed_max(const std::vector<T>& p, int width) {
    const std::vector<T> sm = smooth_probs(p, width);
    int best = 0;
    for (size_t i = 1; i < sm.size(); ++i)
        if (sm[i] > sm[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return {sm[static_cast<size_t>(best)], best};
}

// ---------------------------------------------------------------------------
// F_rep: 3 blocks of [conv3d -> relu -> conv3d -> relu -> maxpool(2)],
// filters base, 2*base, 4*base, then a dense projection to feature_dim.
// ---------------------------------------------------------------------------
template <typename T>
struct FRepStack {
    Conv3d<T> c1a, c1b, c2a, c2b, c3a, c3b;
    ReLU<T> r1a, r1b, r2a, r2b, r3a, r3b;
    MaxPool3d<T> p1, p2, p3;
    Dense<T> proj;

    FRepStack() = default;
    explicit FRepStack(const ModelConfig& cfg)
        : c1a(1, cfg.base_filters, 3, 3, 3, 1, 1),
          c1b(cfg.base_filters, cfg.base_filters, 3, 3, 3, 1, 1),
          c2a(cfg.base_filters, 2 * cfg.base_filters, 3, 3, 3, 1, 1),
          c2b(2 * cfg.base_filters, 2 * cfg.base_filters, 3, 3, 3, 1, 1),
          c3a(2 * cfg.base_filters, 4 * cfg.base_filters, 3, 3, 3, 1, 1),
          c3b(4 * cfg.base_filters, 4 * cfg.base_filters, 3, 3, 3, 1, 1),
          p1(2, 2, 2),
          p2(2, 2, 2),
          p3(2, 2, 2),
          proj(4 * cfg.base_filters * (cfg.ph / 8) * (cfg.pw / 8) * (cfg.pz / 8), cfg.feature_dim) {}

    Tensor<T> forward(const Tensor<T>& patch) {
        Tensor<T> x({1, patch.shape[0], patch.shape[1], patch.shape[2]});
        x.data = patch.data;
        auto t = r1a.forward(c1a.forward(x));
        t = p1.forward(r1b.forward(c1b.forward(t)));
        t = r2a.forward(c2a.forward(t));
        t = p2.forward(r2b.forward(c2b.forward(t)));
        t = r3a.forward(c3a.forward(t));
        t = p3.forward(r3b.forward(c3b.forward(t)));
        Tensor<T> flat({static_cast<int>(t.size())});
        flat.data = std::move(t.data);
        return proj.forward(flat);
    }

    void backward(const Tensor<T>& d_feat) {
        Tensor<T> d = proj.backward(d_feat);
        // reshape the flat gradient back to the pooled activation shape
        Tensor<T> dpool({p3.in_shape_[0], p3.in_shape_[1] / p3.wh, p3.in_shape_[2] / p3.ww,
                         p3.in_shape_[3] / p3.wz});
        dpool.data = std::move(d.data);
        Tensor<T> g = p3.backward(dpool);
        g = c3b.backward(r3b.backward(g));
        g = c3a.backward(r3a.backward(g));
        Tensor<T> dpool2({p2.in_shape_[0], p2.in_shape_[1] / p2.wh, p2.in_shape_[2] / p2.ww,
                          p2.in_shape_[3] / p2.wz});
        dpool2.data = std::move(g.data);
        g = p2.backward(dpool2);
        g = c2b.backward(r2b.backward(g));
        g = c2a.backward(r2a.backward(g));
        Tensor<T> dpool1({p1.in_shape_[0], p1.in_shape_[1] / p1.wh, p1.in_shape_[2] / p1.ww,
                          p1.in_shape_[3] / p1.wz});
        dpool1.data = std::move(g.data);
        g = p1.backward(dpool1);
        g = c1b.backward(r1b.backward(g));
        c1a.backward(r1a.backward(g));
    }

    void init(Rng& rng) {
        c1a.init(rng);
        c1b.init(rng);
        c2a.init(rng);
        c2b.init(rng);
        c3a.init(rng);
        c3b.init(rng);
        proj.init(rng);
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
        return {{"rep.c1a.w", &c1a.w}, {"rep.c1a.b", &c1a.b}, {"rep.c1b.w", &c1b.w},
                {"rep.c1b.b", &c1b.b}, {"rep.c2a.w", &c2a.w}, {"rep.c2a.b", &c2a.b},
                {"rep.c2b.w", &c2b.w}, {"rep.c2b.b", &c2b.b}, {"rep.c3a.w", &c3a.w},
                {"rep.c3a.b", &c3a.b}, {"rep.c3b.w", &c3b.w}, {"rep.c3b.b", &c3b.b},
                {"rep.proj.w", &proj.w}, {"rep.proj.b", &proj.b}};
    }

    std::vector<Tensor<T>*> grads() {
        return {&c1a.gw, &c1a.gb, &c1b.gw, &c1b.gb, &c2a.gw, &c2a.gb, &c2b.gw, &c2b.gb,
                &c3a.gw, &c3a.gb, &c3b.gw, &c3b.gb, &proj.gw, &proj.gb};
    }

    void zero_grad() {
        c1a.zero_grad();
        c1b.zero_grad();
        c2a.zero_grad();
        c2b.zero_grad();
        c3a.zero_grad();
        c3b.zero_grad();
        proj.zero_grad();
    }

    void copy_params_from(FRepStack& other) {
        auto dst = named_params();
        auto src = other.named_params();
        for (size_t i = 0; i < dst.size(); ++i) dst[i].second->data = src[i].second->data;
    }
};

// ---------------------------------------------------------------------------
// The end-to-end series model.
// ---------------------------------------------------------------------------
template <typename T>
struct VcfModel {
    ModelConfig cfg;
    FRepStack<T> rep;                    // master parameters
    Tensor<T> head_w, head_b;            // per-item head for the max variants
    Lstm<T> lstm_f, lstm_b;
    Tensor<T> lstm_head_w, lstm_head_b;  // per-step head for lstm/bilstm

    std::vector<FRepStack<T>> slots_;    // per-patch training caches
    bool slots_synced_ = false;

    static ModelConfig validated(ModelConfig c) {
        c.validate();
        return c;
    }

    explicit VcfModel(const ModelConfig& cfg_) : cfg(validated(cfg_)), rep(cfg) {
        head_w = Tensor<T>({1, cfg.item_dim()});
        head_b = Tensor<T>({1});
        lstm_f = Lstm<T>(cfg.item_dim(), cfg.lstm_hidden);
        lstm_b = Lstm<T>(cfg.item_dim(), cfg.lstm_hidden);
        const int head_in = cfg.variant == SeqVariant::bilstm ? 2 * cfg.lstm_hidden : cfg.lstm_hidden;
        lstm_head_w = Tensor<T>({1, head_in});
        lstm_head_b = Tensor<T>({1});
        ensure_head_grads();
    }

    void init_params() {
        Rng rng(derive_seed(cfg.seed, 0x6d6f64656cULL));
        rep.init(rng);
        Rng rh(derive_seed(cfg.seed, 0x68656164ULL));
        head_w.fill_he(rh, cfg.item_dim());
        head_b.zero();
        lstm_f.init(rh);
        lstm_b.init(rh);
        lstm_head_w.fill_he(rh, lstm_head_w.shape[1]);
        lstm_head_b.zero();
        slots_synced_ = false;
    }

    bool uses_lstm() const { return cfg.variant == SeqVariant::lstm || cfg.variant == SeqVariant::bilstm; }

    std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
        auto named = rep.named_params();
        named.emplace_back("head.w", &head_w);
        named.emplace_back("head.b", &head_b);
        named.emplace_back("lstm_f.w", &lstm_f.w);
        named.emplace_back("lstm_f.r", &lstm_f.r);
        named.emplace_back("lstm_f.b", &lstm_f.b);
        named.emplace_back("lstm_b.w", &lstm_b.w);
        named.emplace_back("lstm_b.r", &lstm_b.r);
        named.emplace_back("lstm_b.b", &lstm_b.b);
        named.emplace_back("lstm_head.w", &lstm_head_w);
        named.emplace_back("lstm_head.b", &lstm_head_b);
        return named;
    }

    // parameters on the active compute path (what the optimizer updates)
    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        for (auto& [n, p] : rep.named_params()) out.push_back(p);
        if (uses_lstm()) {
            out.push_back(&lstm_f.w);
            out.push_back(&lstm_f.r);
            out.push_back(&lstm_f.b);
            if (cfg.variant == SeqVariant::bilstm) {
                out.push_back(&lstm_b.w);
                out.push_back(&lstm_b.r);
                out.push_back(&lstm_b.b);
            }
            out.push_back(&lstm_head_w);
            out.push_back(&lstm_head_b);
        } else {
            out.push_back(&head_w);
            out.push_back(&head_b);
        }
        return out;
    }

    std::vector<Tensor<T>*> grads() {
        std::vector<Tensor<T>*> out = rep.grads();
        if (uses_lstm()) {
            out.push_back(&lstm_f.gw);
            out.push_back(&lstm_f.gr);
            out.push_back(&lstm_f.gb);
            if (cfg.variant == SeqVariant::bilstm) {
                out.push_back(&lstm_b.gw);
                out.push_back(&lstm_b.gr);
                out.push_back(&lstm_b.gb);
            }
            out.push_back(&g_lstm_head_w);
            out.push_back(&g_lstm_head_b);
        } else {
            out.push_back(&g_head_w);
            out.push_back(&g_head_b);
        }
        return out;
    }

    void zero_grad() {
        rep.zero_grad();
        for (auto& s : slots_) s.zero_grad();
        lstm_f.zero_grad();
        lstm_b.zero_grad();
        ensure_head_grads();
        g_head_w.zero();
        g_head_b.zero();
        g_lstm_head_w.zero();
        g_lstm_head_b.zero();
    }

    // make k per-patch cache slots carrying the master parameters
    void sync_slots(int k) {
        while (static_cast<int>(slots_.size()) < k) {
            slots_.emplace_back(cfg);
            slots_.back().copy_params_from(rep);
        }
        if (!slots_synced_) {
            for (auto& s : slots_) s.copy_params_from(rep);
            slots_synced_ = true;
        }
    }

    void mark_params_changed() { slots_synced_ = false; }

    struct SeriesCache {
        int k = 0;
        std::vector<Tensor<T>> feats;
        std::vector<T> item_raw, item_scores;
        std::vector<int> win_src;
        std::vector<T> probs, smoothed;
        int agg_argmax = 0;
        T score = T(0);
        std::vector<Tensor<T>> head_in;  // per-step head inputs (lstm variants)
        bool used_slots = false;
    };

    // Full forward pass: patches (each (ph,pw,pz)) + locations -> P_i and
    // the aggregated series score. With training=true per-patch caches are
    // retained so backward_series() can run.
    void forward_series(const std::vector<Tensor<T>>& patches, const std::vector<double>& locs,
                        SeriesCache& cache, bool training) {
        const int k = static_cast<int>(patches.size());
        if (k < 1) throw std::invalid_argument("model: empty patch sequence");
        if (static_cast<int>(locs.size()) != k)
            throw std::invalid_argument("model: locations/patches length mismatch");
        for (const auto& p : patches)
            if (p.shape != std::vector<int>{cfg.ph, cfg.pw, cfg.pz})
                throw std::invalid_argument("model: patch shape does not match config " +
                                            shape_str(p.shape));
        cache = SeriesCache{};
        cache.k = k;
        cache.used_slots = training;
        if (training) sync_slots(k);

        cache.feats.resize(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) {
            Tensor<T> z = training ? slots_[static_cast<size_t>(i)].forward(patches[static_cast<size_t>(i)])
                                   : rep.forward(patches[static_cast<size_t>(i)]);
            if (cfg.location_enabled()) {
                Tensor<T> zi({cfg.feature_dim + 1});
                for (int d = 0; d < cfg.feature_dim; ++d) zi[d] = z[d];
                zi[cfg.feature_dim] = static_cast<T>(locs[static_cast<size_t>(i)]);
                cache.feats[static_cast<size_t>(i)] = std::move(zi);
            } else {
                cache.feats[static_cast<size_t>(i)] = std::move(z);
            }
        }

        cache.probs.resize(static_cast<size_t>(k));
        if (!uses_lstm()) {
            cache.item_raw.resize(static_cast<size_t>(k));
            cache.item_scores.resize(static_cast<size_t>(k));
            for (int i = 0; i < k; ++i) {
                T z = head_b[0];
                const auto& f = cache.feats[static_cast<size_t>(i)];
                for (int d = 0; d < cfg.item_dim(); ++d) z += head_w[d] * f[d];
                cache.item_raw[static_cast<size_t>(i)] = z;
                cache.item_scores[static_cast<size_t>(i)] = sigmoid(z);
            }
            cache.probs = sliding_max(cache.item_scores, cfg.smooth_width, &cache.win_src);
        } else {
            std::vector<Tensor<T>> hf = lstm_f.forward(cache.feats);
            cache.head_in.resize(static_cast<size_t>(k));
            if (cfg.variant == SeqVariant::bilstm) {
                std::vector<Tensor<T>> rev(cache.feats.rbegin(), cache.feats.rend());
                std::vector<Tensor<T>> hb = lstm_b.forward(rev);
                for (int t = 0; t < k; ++t) {
                    Tensor<T> cat({2 * cfg.lstm_hidden});
                    for (int u = 0; u < cfg.lstm_hidden; ++u) {
                        cat[u] = hf[static_cast<size_t>(t)][u];
                        cat[cfg.lstm_hidden + u] = hb[static_cast<size_t>(k - 1 - t)][u];
                    }
                    cache.head_in[static_cast<size_t>(t)] = std::move(cat);
                }
            } else {
                for (int t = 0; t < k; ++t) cache.head_in[static_cast<size_t>(t)] = hf[static_cast<size_t>(t)];
            }
            cache.item_raw.resize(static_cast<size_t>(k));
            for (int t = 0; t < k; ++t) {
                T z = lstm_head_b[0];
                const auto& h = cache.head_in[static_cast<size_t>(t)];
                for (int64_t d = 0; d < h.size(); ++d) z += lstm_head_w[d] * h[d];
                cache.item_raw[static_cast<size_t>(t)] = z;
                cache.probs[static_cast<size_t>(t)] = sigmoid(z);
            }
        }

        cache.smoothed = smooth_probs(cache.probs, cfg.smooth_width);
        int best = 0;
        for (int i = 1; i < k; ++i)
            if (cache.smoothed[static_cast<size_t>(i)] > cache.smoothed[static_cast<size_t>(best)])
                best = i;
        cache.agg_argmax = best;
        cache.score = cache.smoothed[static_cast<size_t>(best)];
    }

    // d_score: dL/d series score; d_probs: direct dL/dP_i contributions.
    void backward_series(const SeriesCache& cache, T d_score, std::vector<T> d_probs) {
        if (!cache.used_slots)
            throw std::logic_error("backward_series: forward pass was not run in training mode");
        const int k = cache.k;
        const int half = cfg.smooth_width / 2;
        // F_agg: max routes to the argmax of the smoothed sequence, the
        // moving average spreads it back over the window
        {
            const int j = cache.agg_argmax;
            const int lo = std::max(0, j - half), hi = std::min(k - 1, j + half);
            const T share = d_score / static_cast<T>(hi - lo + 1);
            for (int i = lo; i <= hi; ++i) d_probs[static_cast<size_t>(i)] += share;
        }

        std::vector<Tensor<T>> d_feats(static_cast<size_t>(k), Tensor<T>({cfg.item_dim()}));
        ensure_head_grads();
        if (!uses_lstm()) {
            std::vector<T> d_items(static_cast<size_t>(k), T(0));
            for (int i = 0; i < k; ++i)
                d_items[static_cast<size_t>(cache.win_src[static_cast<size_t>(i)])] +=
                    d_probs[static_cast<size_t>(i)];
            for (int j = 0; j < k; ++j) {
                const T s = cache.item_scores[static_cast<size_t>(j)];
                const T dz = d_items[static_cast<size_t>(j)] * s * (T(1) - s);
                if (dz == T(0)) continue;
                const auto& f = cache.feats[static_cast<size_t>(j)];
                for (int d = 0; d < cfg.item_dim(); ++d) {
                    g_head_w[d] += dz * f[d];
                    d_feats[static_cast<size_t>(j)][d] += dz * head_w[d];
                }
                g_head_b[0] += dz;
            }
        } else {
            const int hdim = cfg.variant == SeqVariant::bilstm ? 2 * cfg.lstm_hidden : cfg.lstm_hidden;
            std::vector<Tensor<T>> d_head_in(static_cast<size_t>(k), Tensor<T>({hdim}));
            for (int t = 0; t < k; ++t) {
                const T p = cache.probs[static_cast<size_t>(t)];
                const T dz = d_probs[static_cast<size_t>(t)] * p * (T(1) - p);
                const auto& h = cache.head_in[static_cast<size_t>(t)];
                for (int d = 0; d < hdim; ++d) {
                    g_lstm_head_w[d] += dz * h[d];
                    d_head_in[static_cast<size_t>(t)][d] = dz * lstm_head_w[d];
                }
                g_lstm_head_b[0] += dz;
            }
            if (cfg.variant == SeqVariant::bilstm) {
                std::vector<Tensor<T>> d_hf(static_cast<size_t>(k), Tensor<T>({cfg.lstm_hidden}));
                std::vector<Tensor<T>> d_hb(static_cast<size_t>(k), Tensor<T>({cfg.lstm_hidden}));
                for (int t = 0; t < k; ++t)
                    for (int u = 0; u < cfg.lstm_hidden; ++u) {
                        d_hf[static_cast<size_t>(t)][u] = d_head_in[static_cast<size_t>(t)][u];
                        d_hb[static_cast<size_t>(k - 1 - t)][u] =
                            d_head_in[static_cast<size_t>(t)][cfg.lstm_hidden + u];
                    }
                std::vector<Tensor<T>> dxf = lstm_f.backward(d_hf);
                std::vector<Tensor<T>> dxb = lstm_b.backward(d_hb);
                for (int t = 0; t < k; ++t)
                    for (int d = 0; d < cfg.item_dim(); ++d)
                        d_feats[static_cast<size_t>(t)][d] =
                            dxf[static_cast<size_t>(t)][d] + dxb[static_cast<size_t>(k - 1 - t)][d];
            } else {
                std::vector<Tensor<T>> dxf = lstm_f.backward(d_head_in);
                d_feats = std::move(dxf);
            }
        }

        for (int i = 0; i < k; ++i) {
            Tensor<T> dz({cfg.feature_dim});
            for (int d = 0; d < cfg.feature_dim; ++d) dz[d] = d_feats[static_cast<size_t>(i)][d];
            slots_[static_cast<size_t>(i)].backward(dz);
        }
        // fold per-patch gradients into the master stack, fixed slot order
        auto master = rep.grads();
        for (int i = 0; i < k; ++i) {
            auto sg = slots_[static_cast<size_t>(i)].grads();
            for (size_t gi = 0; gi < master.size(); ++gi) {
                for (int64_t q = 0; q < master[gi]->size(); ++q)
                    (*master[gi])[q] += (*sg[gi])[q];
                sg[gi]->zero();
            }
        }
    }

    struct LossValue {
        double total = 0.0, agg = 0.0, seq = 0.0;
    };

    LossValue loss_of(const SeriesCache& cache, double y_agg, const std::vector<double>& y_seq) const {
        LossValue lv;
        lv.agg = bce_loss(cache.score, y_agg);
        for (int i = 0; i < cache.k; ++i)
            lv.seq += bce_loss(cache.probs[static_cast<size_t>(i)], y_seq[static_cast<size_t>(i)]);
        lv.seq /= cache.k;
        lv.total = lv.agg + cfg.lambda_seq * lv.seq;
        return lv;
    }

    // forward + loss + backward; gradients accumulate into this model
    double train_item(const std::vector<Tensor<T>>& patches, const std::vector<double>& locs,
                      double y_agg, const std::vector<double>& y_seq) {
        SeriesCache cache;
        forward_series(patches, locs, cache, true);
        const LossValue lv = loss_of(cache, y_agg, y_seq);
        const T d_score = static_cast<T>(bce_grad(cache.score, y_agg));
        std::vector<T> d_probs(static_cast<size_t>(cache.k));
        for (int i = 0; i < cache.k; ++i)
            d_probs[static_cast<size_t>(i)] = static_cast<T>(
                cfg.lambda_seq / cache.k *
                bce_grad(static_cast<double>(cache.probs[static_cast<size_t>(i)]),
                         y_seq[static_cast<size_t>(i)]));
        backward_series(cache, d_score, std::move(d_probs));
        return lv.total;
    }

    void ensure_head_grads() {
        if (g_head_w.size() != head_w.size()) {
            g_head_w = Tensor<T>(head_w.shape);
            g_head_b = Tensor<T>(head_b.shape);
            g_lstm_head_w = Tensor<T>(lstm_head_w.shape);
            g_lstm_head_b = Tensor<T>(lstm_head_b.shape);
        }
    }

    Tensor<T> g_head_w, g_head_b, g_lstm_head_w, g_lstm_head_b;
};

struct SeriesPrediction {
    std::vector<double> per_patch;  // P_i
    double score = 0.0;             // F_agg output
    int argmax_patch = 0;           // argmax of the smoothed sequence
    PatchMeta box;                  // source region of the argmax patch
};

SeriesPrediction predict_series(const PatchSequence& seq, VcfModel<float>& model);

enum class Tta { identity, flip_lr };
Tta tta_from_name(const std::string& s);

// left/right flip: reverse every patch along its across-slice (pZ) axis
PatchSequence apply_tta(const PatchSequence& seq, Tta tta);

// one TTA per model (zipped); a single TTA entry broadcasts to all models
double ensemble_predict(const PatchSequence& seq, std::vector<VcfModel<float>>& models,
                        const std::vector<Tta>& ttas);

struct TrainMeta {
    uint64_t seed = 0;
    int epochs = 0;
    double best_auc = 0.0;
};

void save_model(VcfModel<float>& model, const TrainMeta& meta, const std::string& path);
VcfModel<float> load_model(const std::string& path, TrainMeta* meta = nullptr);

}  // namespace vseq
