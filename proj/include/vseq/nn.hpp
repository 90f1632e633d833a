#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vseq/tensor.hpp"

namespace vseq {

template <typename T>
inline T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

// ---------------------------------------------------------------------------
// 3D convolution (cross-correlation), NCHWZ-single-item layout (C,H,W,Z).
// Output spatial size (H + 2*pad - kh)/stride + 1 with exact division
// enforced. backward() accumulates parameter gradients and returns dX.
// ---------------------------------------------------------------------------
template <typename T>
struct Conv3d {
    int cin = 1, cout = 1, kh = 1, kw = 1, kz = 1;
    int stride = 1;
    int pad_h = 0, pad_w = 0, pad_z = 0;
    Tensor<T> w, b, gw, gb;
    Tensor<T> x_;  // cached forward input

    Conv3d() = default;
    Conv3d(int cin_, int cout_, int kh_, int kw_, int kz_, int stride_ = 1, int pad_ = 0)
        : Conv3d(cin_, cout_, kh_, kw_, kz_, stride_, pad_, pad_, pad_) {}
    Conv3d(int cin_, int cout_, int kh_, int kw_, int kz_, int stride_, int ph, int pw, int pz)
        : cin(cin_), cout(cout_), kh(kh_), kw(kw_), kz(kz_), stride(stride_), pad_h(ph), pad_w(pw),
          pad_z(pz) {
        w = Tensor<T>({cout, cin, kh, kw, kz});
        b = Tensor<T>({cout});
        gw = Tensor<T>(w.shape);
        gb = Tensor<T>(b.shape);
    }

    void init(Rng& rng) {
        w.fill_he(rng, cin * kh * kw * kz);
        b.zero();
    }

    static int out_dim(int in, int k, int stride, int pad) {
        const int span = in + 2 * pad - k;
        if (span < 0) throw std::invalid_argument("conv3d: kernel larger than padded input");
        if (span % stride != 0) throw std::invalid_argument("conv3d: non-integral output size");
        return span / stride + 1;
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.shape.size() != 4 || x.shape[0] != cin)
            throw std::invalid_argument("conv3d: input shape mismatch");
        const int H = x.shape[1], W = x.shape[2], Z = x.shape[3];
        const int Ho = out_dim(H, kh, stride, pad_h);
        const int Wo = out_dim(W, kw, stride, pad_w);
        const int Zo = out_dim(Z, kz, stride, pad_z);
        x_ = x;
        Tensor<T> y({cout, Ho, Wo, Zo});

        const int64_t ohw = static_cast<int64_t>(Ho) * Wo * Zo;
        const int64_t xhw = static_cast<int64_t>(H) * W * Z;
#pragma omp parallel for schedule(static)
        for (int co = 0; co < cout; ++co) {
            T* yc = y.ptr() + co * ohw;
            for (int64_t i = 0; i < ohw; ++i) yc[i] = b[co];
            for (int ci = 0; ci < cin; ++ci) {
                const T* xc = x.ptr() + ci * xhw;
                for (int i = 0; i < kh; ++i) {
                    const auto [oh0, oh1] = valid_range(H, Ho, i, pad_h);
                    for (int j = 0; j < kw; ++j) {
                        const auto [ow0, ow1] = valid_range(W, Wo, j, pad_w);
                        for (int kk = 0; kk < kz; ++kk) {
                            const auto [oz0, oz1] = valid_range(Z, Zo, kk, pad_z);
                            const T wv = w[(((static_cast<int64_t>(co) * cin + ci) * kh + i) * kw + j) * kz + kk];
                            for (int oh = oh0; oh < oh1; ++oh) {
                                const int ih = oh * stride - pad_h + i;
                                for (int ow = ow0; ow < ow1; ++ow) {
                                    const int iw = ow * stride - pad_w + j;
                                    const T* xrow = xc + (static_cast<int64_t>(ih) * W + iw) * Z - pad_z + kk;
                                    T* yrow = yc + (static_cast<int64_t>(oh) * Wo + ow) * Zo;
                                    if (stride == 1) {
                                        for (int oz = oz0; oz < oz1; ++oz) yrow[oz] += wv * xrow[oz];
                                    } else {
                                        for (int oz = oz0; oz < oz1; ++oz)
                                            yrow[oz] += wv * xrow[oz * stride];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int H = x_.shape[1], W = x_.shape[2], Z = x_.shape[3];
        const int Ho = dy.shape[1], Wo = dy.shape[2], Zo = dy.shape[3];
        Tensor<T> dx(x_.shape);
        const int64_t ohw = static_cast<int64_t>(Ho) * Wo * Zo;
        const int64_t xhw = static_cast<int64_t>(H) * W * Z;

#pragma omp parallel for schedule(static)
        for (int co = 0; co < cout; ++co) {
            const T* dyc = dy.ptr() + co * ohw;
            T s = T(0);
            for (int64_t i = 0; i < ohw; ++i) s += dyc[i];
            gb[co] += s;
            for (int ci = 0; ci < cin; ++ci) {
                const T* xc = x_.ptr() + ci * xhw;
                for (int i = 0; i < kh; ++i) {
                    const auto [oh0, oh1] = valid_range(H, Ho, i, pad_h);
                    for (int j = 0; j < kw; ++j) {
                        const auto [ow0, ow1] = valid_range(W, Wo, j, pad_w);
                        for (int kk = 0; kk < kz; ++kk) {
                            const auto [oz0, oz1] = valid_range(Z, Zo, kk, pad_z);
                            T acc = T(0);
                            for (int oh = oh0; oh < oh1; ++oh) {
                                const int ih = oh * stride - pad_h + i;
                                for (int ow = ow0; ow < ow1; ++ow) {
                                    const int iw = ow * stride - pad_w + j;
                                    const T* xrow = xc + (static_cast<int64_t>(ih) * W + iw) * Z - pad_z + kk;
                                    const T* dyrow = dyc + (static_cast<int64_t>(oh) * Wo + ow) * Zo;
                                    for (int oz = oz0; oz < oz1; ++oz)
                                        acc += dyrow[oz] * xrow[oz * stride];
                                }
                            }
                            gw[(((static_cast<int64_t>(co) * cin + ci) * kh + i) * kw + j) * kz + kk] += acc;
                        }
                    }
                }
            }
        }

#pragma omp parallel for schedule(static)
        for (int ci = 0; ci < cin; ++ci) {
            T* dxc = dx.ptr() + ci * xhw;
            for (int co = 0; co < cout; ++co) {
                const T* dyc = dy.ptr() + co * ohw;
                for (int i = 0; i < kh; ++i) {
                    const auto [oh0, oh1] = valid_range(H, Ho, i, pad_h);
                    for (int j = 0; j < kw; ++j) {
                        const auto [ow0, ow1] = valid_range(W, Wo, j, pad_w);
                        for (int kk = 0; kk < kz; ++kk) {
                            const auto [oz0, oz1] = valid_range(Z, Zo, kk, pad_z);
                            const T wv = w[(((static_cast<int64_t>(co) * cin + ci) * kh + i) * kw + j) * kz + kk];
                            for (int oh = oh0; oh < oh1; ++oh) {
                                const int ih = oh * stride - pad_h + i;
                                for (int ow = ow0; ow < ow1; ++ow) {
                                    const int iw = ow * stride - pad_w + j;
                                    T* dxrow = dxc + (static_cast<int64_t>(ih) * W + iw) * Z - pad_z + kk;
                                    const T* dyrow = dyc + (static_cast<int64_t>(oh) * Wo + ow) * Zo;
                                    for (int oz = oz0; oz < oz1; ++oz)
                                        dxrow[oz * stride] += wv * dyrow[oz];
                                }
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    void zero_grad() {
        gw.zero();
        gb.zero();
    }

private:
    // output index range for which in-index = o*stride - pad + k stays in [0, in)
    std::pair<int, int> valid_range(int in, int out, int k, int pad) const {
        int lo = 0;
        const int off = pad - k;
        if (off > 0) lo = (off + stride - 1) / stride;
        int hi = out;
        const int top = in - 1 + pad - k;
        if (top < 0)
            hi = 0;
        else
            hi = std::min(out, top / stride + 1);
        return {lo, std::max(hi, lo)};
    }
};

// ---------------------------------------------------------------------------
// 3D max pooling, non-overlapping (stride must equal window, dims divisible).
// Ties route to the first element in scan order; backward follows the
// stored argmax.
// ---------------------------------------------------------------------------
template <typename T>
struct MaxPool3d {
    int wh = 2, ww = 2, wz = 2;
    Tensor<T> x_;
    std::vector<int64_t> argmax_;
    std::vector<int> in_shape_;

    MaxPool3d() = default;
    MaxPool3d(int wh_, int ww_, int wz_) : wh(wh_), ww(ww_), wz(wz_) {}

    Tensor<T> forward(const Tensor<T>& x, int stride_h = -1) {
        if (x.shape.size() != 4) throw std::invalid_argument("maxpool3d: expected 4D input");
        if (stride_h > 0 && stride_h != wh)
            throw std::invalid_argument("maxpool3d: stride must equal window");
        const int C = x.shape[0], H = x.shape[1], W = x.shape[2], Z = x.shape[3];
        if (wh > H || ww > W || wz > Z)
            throw std::invalid_argument("maxpool3d: window larger than input");
        if (H % wh || W % ww || Z % wz)
            throw std::invalid_argument("maxpool3d: dims not divisible by window");
        const int Ho = H / wh, Wo = W / ww, Zo = Z / wz;
        in_shape_ = x.shape;
        Tensor<T> y({C, Ho, Wo, Zo});
        argmax_.assign(static_cast<size_t>(y.size()), 0);

#pragma omp parallel for schedule(static)
        for (int c = 0; c < C; ++c) {
            const T* xc = x.ptr() + static_cast<int64_t>(c) * H * W * Z;
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow)
                    for (int oz = 0; oz < Zo; ++oz) {
                        T best = -std::numeric_limits<T>::infinity();
                        int64_t best_idx = 0;
                        for (int a = 0; a < wh; ++a)
                            for (int bb = 0; bb < ww; ++bb)
                                for (int cc = 0; cc < wz; ++cc) {
                                    const int64_t idx =
                                        (static_cast<int64_t>(oh * wh + a) * W + (ow * ww + bb)) * Z +
                                        (oz * wz + cc);
                                    if (xc[idx] > best) {
                                        best = xc[idx];
                                        best_idx = idx;
                                    }
                                }
                        const int64_t oidx =
                            ((static_cast<int64_t>(c) * Ho + oh) * Wo + ow) * Zo + oz;
                        y[oidx] = best;
                        argmax_[static_cast<size_t>(oidx)] =
                            static_cast<int64_t>(c) * H * W * Z + best_idx;
                    }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(in_shape_);
        for (int64_t i = 0; i < dy.size(); ++i) dx[argmax_[static_cast<size_t>(i)]] += dy[i];
        return dx;
    }
};

template <typename T>
struct ReLU {
    Tensor<T> x_;
    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        Tensor<T> y(x.shape);
        for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(x_.shape);
        for (int64_t i = 0; i < dy.size(); ++i) dx[i] = x_[i] > T(0) ? dy[i] : T(0);
        return dx;
    }
};

// Affine map y = W x + b for 1D inputs.
template <typename T>
struct Dense {
    int in = 1, out = 1;
    Tensor<T> w, b, gw, gb;
    Tensor<T> x_;

    Dense() = default;
    Dense(int in_, int out_) : in(in_), out(out_) {
        w = Tensor<T>({out, in});
        b = Tensor<T>({out});
        gw = Tensor<T>(w.shape);
        gb = Tensor<T>(b.shape);
    }

    void init(Rng& rng) {
        w.fill_he(rng, in);
        b.zero();
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.size() != in) throw std::invalid_argument("dense: input size mismatch");
        x_ = x;
        Tensor<T> y({out});
        for (int o = 0; o < out; ++o) {
            T acc = b[o];
            const T* wr = w.ptr() + static_cast<int64_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += wr[i] * x[i];
            y[o] = acc;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx({in});
        for (int o = 0; o < out; ++o) {
            const T g = dy[o];
            gb[o] += g;
            T* gwr = gw.ptr() + static_cast<int64_t>(o) * in;
            const T* wr = w.ptr() + static_cast<int64_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                gwr[i] += g * x_[i];
                dx[i] += g * wr[i];
            }
        }
        return dx;
    }

    void zero_grad() {
        gw.zero();
        gb.zero();
    }
};

// ---------------------------------------------------------------------------
// LSTM over a k-step sequence of D-dim inputs, zero initial state, gate
// order (i, f, g, o): c_t = f*c_{t-1} + i*g, h_t = o*tanh(c_t).
// backward() runs truncated-free BPTT over the cached sequence.
// ---------------------------------------------------------------------------
template <typename T>
struct Lstm {
    int din = 1, hidden = 1;
    Tensor<T> w, r, b, gw, gr, gb;  // w:(4H,D) r:(4H,H) b:(4H)

    // forward caches
    std::vector<Tensor<T>> xs_, hs_, cs_, gates_;  // gates post-activation (4H)

    Lstm() = default;
    Lstm(int din_, int hidden_) : din(din_), hidden(hidden_) {
        w = Tensor<T>({4 * hidden, din});
        r = Tensor<T>({4 * hidden, hidden});
        b = Tensor<T>({4 * hidden});
        gw = Tensor<T>(w.shape);
        gr = Tensor<T>(r.shape);
        gb = Tensor<T>(b.shape);
    }

    void init(Rng& rng) {
        w.fill_he(rng, din);
        r.fill_he(rng, hidden);
        b.zero();
    }

    // inputs: k tensors of shape (din); returns k hidden states (hidden)
    std::vector<Tensor<T>> forward(const std::vector<Tensor<T>>& inputs) {
        if (inputs.empty()) throw std::invalid_argument("lstm: empty sequence");
        const size_t k = inputs.size();
        xs_ = inputs;
        hs_.assign(k, Tensor<T>({hidden}));
        cs_.assign(k, Tensor<T>({hidden}));
        gates_.assign(k, Tensor<T>({4 * hidden}));
        Tensor<T> h({hidden}), c({hidden});
        for (size_t t = 0; t < k; ++t) {
            if (inputs[t].size() != din) throw std::invalid_argument("lstm: input size mismatch");
            Tensor<T>& a = gates_[t];
            for (int u = 0; u < 4 * hidden; ++u) {
                T acc = b[u];
                const T* wr = w.ptr() + static_cast<int64_t>(u) * din;
                for (int i = 0; i < din; ++i) acc += wr[i] * inputs[t][i];
                const T* rr = r.ptr() + static_cast<int64_t>(u) * hidden;
                for (int i = 0; i < hidden; ++i) acc += rr[i] * h[i];
                a[u] = acc;
            }
            for (int u = 0; u < hidden; ++u) {
                const T gi = sigmoid(a[u]);
                const T gf = sigmoid(a[hidden + u]);
                const T gg = std::tanh(a[2 * hidden + u]);
                const T go = sigmoid(a[3 * hidden + u]);
                a[u] = gi;
                a[hidden + u] = gf;
                a[2 * hidden + u] = gg;
                a[3 * hidden + u] = go;
                c[u] = gf * c[u] + gi * gg;
                h[u] = go * std::tanh(c[u]);
            }
            cs_[t] = c;
            hs_[t] = h;
        }
        return hs_;
    }

    // d_hs: gradient w.r.t. every hidden state; returns gradient w.r.t. inputs
    std::vector<Tensor<T>> backward(const std::vector<Tensor<T>>& d_hs) {
        const size_t k = xs_.size();
        std::vector<Tensor<T>> dxs(k, Tensor<T>({din}));
        Tensor<T> dh({hidden}), dc({hidden});
        const Tensor<T> zero_state({hidden});
        for (size_t tt = k; tt-- > 0;) {
            for (int u = 0; u < hidden; ++u) dh[u] += d_hs[tt][u];
            const Tensor<T>& a = gates_[tt];
            const Tensor<T>& c_prev = tt > 0 ? cs_[tt - 1] : zero_state;
            const Tensor<T>& h_prev = tt > 0 ? hs_[tt - 1] : zero_state;
            Tensor<T> da({4 * hidden});
            for (int u = 0; u < hidden; ++u) {
                const T gi = a[u], gf = a[hidden + u], gg = a[2 * hidden + u], go = a[3 * hidden + u];
                const T tc = std::tanh(cs_[tt][u]);
                const T d_o = dh[u] * tc;
                dc[u] += dh[u] * go * (T(1) - tc * tc);
                const T d_f = dc[u] * c_prev[u];
                const T d_i = dc[u] * gg;
                const T d_g = dc[u] * gi;
                da[u] = d_i * gi * (T(1) - gi);
                da[hidden + u] = d_f * gf * (T(1) - gf);
                da[2 * hidden + u] = d_g * (T(1) - gg * gg);
                da[3 * hidden + u] = d_o * go * (T(1) - go);
                dc[u] *= gf;  // becomes dc_{t-1}
            }
            dh.zero();
            for (int u = 0; u < 4 * hidden; ++u) {
                const T g = da[u];
                gb[u] += g;
                T* gwr = gw.ptr() + static_cast<int64_t>(u) * din;
                const T* wr = w.ptr() + static_cast<int64_t>(u) * din;
                for (int i = 0; i < din; ++i) {
                    gwr[i] += g * xs_[tt][i];
                    dxs[tt][i] += g * wr[i];
                }
                T* grr = gr.ptr() + static_cast<int64_t>(u) * hidden;
                const T* rr = r.ptr() + static_cast<int64_t>(u) * hidden;
                for (int i = 0; i < hidden; ++i) {
                    grr[i] += g * h_prev[i];
                    dh[i] += g * rr[i];
                }
            }
        }
        return dxs;
    }

    void zero_grad() {
        gw.zero();
        gr.zero();
        gb.zero();
    }
};

// ---------------------------------------------------------------------------
// Binary cross entropy with epsilon clamping.
// ---------------------------------------------------------------------------
constexpr double kBceEps = 1e-7;

template <typename T>
inline double bce_loss(T p, double y) {
    const double pc = std::clamp(static_cast<double>(p), kBceEps, 1.0 - kBceEps);
    return -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

// dL/dp; zero outside the clamp range (the clamp is saturated there)
template <typename T>
inline T bce_grad(T p, double y) {
    const double pd = static_cast<double>(p);
    if (pd < kBceEps || pd > 1.0 - kBceEps) return T(0);
    return static_cast<T>((pd - y) / (pd * (1.0 - pd)));
}

// ---------------------------------------------------------------------------
// Adam with bias correction. Rejects non-finite gradients so divergence
// surfaces instead of propagating NaNs into the parameters.
// ---------------------------------------------------------------------------
template <typename T>
struct Adam {
    double lr = 1e-5, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int64_t step_count = 0;
    std::vector<Tensor<T>> m, v;

    void init(const std::vector<Tensor<T>*>& params) {
        m.clear();
        v.clear();
        for (const auto* p : params) {
            m.emplace_back(p->shape);
            v.emplace_back(p->shape);
        }
        step_count = 0;
    }

    void step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
        if (params.size() != m.size() || grads.size() != m.size())
            throw std::invalid_argument("adam: parameter list mismatch");
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Tensor<T>& p = *params[pi];
            const Tensor<T>& g = *grads[pi];
            if (!p.same_shape(g)) throw std::invalid_argument("adam: gradient shape mismatch");
            for (int64_t i = 0; i < p.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                if (!std::isfinite(gi)) throw std::runtime_error("adam: non-finite gradient");
                const double m_new = beta1 * static_cast<double>(m[pi][i]) + (1.0 - beta1) * gi;
                const double v_new = beta2 * static_cast<double>(v[pi][i]) + (1.0 - beta2) * gi * gi;
                m[pi][i] = static_cast<T>(m_new);
                v[pi][i] = static_cast<T>(v_new);
                const double mhat = m_new / bc1;
                const double vhat = v_new / bc2;
                p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Central finite-difference gradient checker. loss() must recompute the
// scalar objective from the current parameter values; analytic gradients
// are taken at the unperturbed point.
// ---------------------------------------------------------------------------
struct GradCheck {
    double max_rel_err = 0.0;
    int probes = 0;
};

template <typename T>
GradCheck grad_check(const std::function<double()>& loss,
                     const std::vector<Tensor<T>*>& params,
                     const std::vector<const Tensor<T>*>& analytic, int probes, Rng& rng,
                     double h = 1e-5) {
    static_assert(std::is_same_v<T, double>, "grad_check runs in 64-bit");
    int64_t total = 0;
    for (const auto* p : params) total += p->size();
    GradCheck res;
    for (int q = 0; q < probes; ++q) {
        int64_t flat = static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(total)));
        size_t pi = 0;
        while (flat >= params[pi]->size()) flat -= params[pi++]->size();
        T& theta = (*params[pi])[flat];
        const T saved = theta;
        theta = saved + static_cast<T>(h);
        const double fp = loss();
        theta = saved - static_cast<T>(h);
        const double fm = loss();
        theta = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double exact = static_cast<double>((*analytic[pi])[flat]);
        const double rel =
            std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), 1e-8});
        res.max_rel_err = std::max(res.max_rel_err, rel);
        ++res.probes;
    }
    return res;
}

}  // namespace vseq
