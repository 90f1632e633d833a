#include "vseq/ref.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vseq::ref {

Tensor<float> conv3d_naive(const Tensor<float>& x, const Tensor<float>& w,
                           const Tensor<float>& b, int stride, int pad) {
    const int cin = x.shape[0], H = x.shape[1], W = x.shape[2], Z = x.shape[3];
    const int cout = w.shape[0], kh = w.shape[2], kw = w.shape[3], kz = w.shape[4];
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    const int Zo = (Z + 2 * pad - kz) / stride + 1;
    Tensor<float> y({cout, Ho, Wo, Zo});
    for (int co = 0; co < cout; ++co)
        for (int oh = 0; oh < Ho; ++oh)
            for (int ow = 0; ow < Wo; ++ow)
                for (int oz = 0; oz < Zo; ++oz) {
                    double acc = b[co];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j)
                                for (int kk = 0; kk < kz; ++kk) {
                                    const int ih = oh * stride - pad + i;
                                    const int iw = ow * stride - pad + j;
                                    const int iz = oz * stride - pad + kk;
                                    if (ih < 0 || ih >= H || iw < 0 || iw >= W || iz < 0 || iz >= Z)
                                        continue;
                                    const float xv =
                                        x[((static_cast<int64_t>(ci) * H + ih) * W + iw) * Z + iz];
                                    const float wv =
                                        w[(((static_cast<int64_t>(co) * cin + ci) * kh + i) * kw + j) * kz + kk];
                                    acc += static_cast<double>(xv) * wv;
                                }
                    y[((static_cast<int64_t>(co) * Ho + oh) * Wo + ow) * Zo + oz] =
                        static_cast<float>(acc);
                }
    return y;
}

Tensor<float> maxpool3d_naive(const Tensor<float>& x, int wh, int ww, int wz) {
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2], Z = x.shape[3];
    const int Ho = H / wh, Wo = W / ww, Zo = Z / wz;
    Tensor<float> y({C, Ho, Wo, Zo});
    for (int c = 0; c < C; ++c)
        for (int oh = 0; oh < Ho; ++oh)
            for (int ow = 0; ow < Wo; ++ow)
                for (int oz = 0; oz < Zo; ++oz) {
                    float best = x[((static_cast<int64_t>(c) * H + oh * wh) * W + ow * ww) * Z + oz * wz];
                    for (int a = 0; a < wh; ++a)
                        for (int d = 0; d < ww; ++d)
                            for (int e = 0; e < wz; ++e) {
                                const float v =
                                    x[((static_cast<int64_t>(c) * H + oh * wh + a) * W + ow * ww + d) * Z +
                                      oz * wz + e];
                                if (v > best) best = v;
                            }
                    y[((static_cast<int64_t>(c) * Ho + oh) * Wo + ow) * Zo + oz] = best;
                }
    return y;
}

namespace {
double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

std::vector<std::vector<double>> lstm_naive(const std::vector<std::vector<double>>& inputs,
                                            const std::vector<double>& w,
                                            const std::vector<double>& r,
                                            const std::vector<double>& b, int din, int hidden) {
    std::vector<double> h(static_cast<size_t>(hidden), 0.0);
    std::vector<double> c(static_cast<size_t>(hidden), 0.0);
    std::vector<std::vector<double>> out;
    for (const auto& x : inputs) {
        std::vector<double> a(static_cast<size_t>(4 * hidden), 0.0);
        for (int u = 0; u < 4 * hidden; ++u) {
            double acc = b[static_cast<size_t>(u)];
            for (int i = 0; i < din; ++i)
                acc += w[static_cast<size_t>(u * din + i)] * x[static_cast<size_t>(i)];
            for (int i = 0; i < hidden; ++i)
                acc += r[static_cast<size_t>(u * hidden + i)] * h[static_cast<size_t>(i)];
            a[static_cast<size_t>(u)] = acc;
        }
        for (int u = 0; u < hidden; ++u) {
            const double gi = sig(a[static_cast<size_t>(u)]);
            const double gf = sig(a[static_cast<size_t>(hidden + u)]);
            const double gg = std::tanh(a[static_cast<size_t>(2 * hidden + u)]);
            const double go = sig(a[static_cast<size_t>(3 * hidden + u)]);
            c[static_cast<size_t>(u)] = gf * c[static_cast<size_t>(u)] + gi * gg;
            h[static_cast<size_t>(u)] = go * std::tanh(c[static_cast<size_t>(u)]);
        }
        out.push_back(h);
    }
    return out;
}

std::vector<double> dense_naive(const std::vector<double>& x, const std::vector<double>& w,
                                const std::vector<double>& b, int in, int out) {
    std::vector<double> y(static_cast<size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
        double acc = b[static_cast<size_t>(o)];
        for (int i = 0; i < in; ++i)
            acc += w[static_cast<size_t>(o * in + i)] * x[static_cast<size_t>(i)];
        y[static_cast<size_t>(o)] = acc;
    }
    return y;
}

std::vector<double> resample_dft_naive(const std::vector<double>& x, size_t m) {
    const size_t n = x.size();
    if (n < 2 || m < 2) throw std::invalid_argument("resample_dft_naive: lengths must be >= 2");
    using cd = std::complex<double>;
    std::vector<cd> spec(n);
    for (size_t k = 0; k < n; ++k) {
        cd acc(0.0, 0.0);
        for (size_t j = 0; j < n; ++j) {
            const double ang =
                -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(j) /
                static_cast<double>(n);
            acc += x[j] * cd(std::cos(ang), std::sin(ang));
        }
        spec[k] = acc;
    }
    std::vector<cd> out_spec(m, cd(0.0, 0.0));
    const size_t keep = std::min(n, m);
    const size_t nyq = keep / 2 + 1;
    for (size_t i = 0; i < nyq; ++i) out_spec[i] = spec[i];
    for (size_t i = 1; i <= (keep - 1) / 2; ++i) out_spec[m - i] = spec[n - i];
    if (keep % 2 == 0) {
        if (m < n)
            out_spec[keep / 2] += spec[n - keep / 2];
        else if (m > n) {
            out_spec[keep / 2] *= 0.5;
            out_spec[m - keep / 2] = out_spec[keep / 2];
        }
    }
    std::vector<double> y(m, 0.0);
    for (size_t t = 0; t < m; ++t) {
        cd acc(0.0, 0.0);
        for (size_t k = 0; k < m; ++k) {
            const double ang =
                2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(t) /
                static_cast<double>(m);
            acc += out_spec[k] * cd(std::cos(ang), std::sin(ang));
        }
        y[t] = acc.real() / static_cast<double>(n);
    }
    return y;
}

}  // namespace vseq::ref
