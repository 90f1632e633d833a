#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace vseq {

using cdouble = std::complex<double>;

namespace detail {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// in-place iterative radix-2 Cooley-Tukey; n must be a power of two
inline void fft_pow2(std::vector<cdouble>& a, bool inverse) {
    const size_t n = a.size();
    if (n <= 1) return;
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const cdouble wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                cdouble u = a[i + j];
                cdouble v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv;
    }
}

// Bluestein chirp-z machinery for arbitrary-length transforms. The
// precomputed state is reused across calls of the same length (one plan
// per column length when resampling a whole volume).
struct BluesteinPlan {
    size_t n = 0;
    size_t m = 0;  // convolution length, power of two >= 2n-1
    std::vector<cdouble> chirp;       // exp(-i*pi*j^2/n), j in [0,n)
    std::vector<cdouble> bhat;        // fft of the symmetric conjugate chirp

    explicit BluesteinPlan(size_t n_) : n(n_) {
        m = next_pow2(2 * n - 1);
        chirp.resize(n);
        std::vector<cdouble> b(m, cdouble(0.0, 0.0));
        for (size_t j = 0; j < n; ++j) {
            // j^2 mod 2n keeps the angle argument small
            const auto q = static_cast<long long>((static_cast<unsigned long long>(j) * j) % (2 * n));
            const double ang = -std::numbers::pi * static_cast<double>(q) / static_cast<double>(n);
            chirp[j] = cdouble(std::cos(ang), std::sin(ang));
            b[j] = std::conj(chirp[j]);
            if (j > 0) b[m - j] = std::conj(chirp[j]);
        }
        fft_pow2(b, false);
        bhat = std::move(b);
    }

    // forward DFT of length n
    void transform(std::vector<cdouble>& a) const {
        std::vector<cdouble> tmp(m, cdouble(0.0, 0.0));
        for (size_t j = 0; j < n; ++j) tmp[j] = a[j] * chirp[j];
        fft_pow2(tmp, false);
        for (size_t j = 0; j < m; ++j) tmp[j] *= bhat[j];
        fft_pow2(tmp, true);
        for (size_t k = 0; k < n; ++k) a[k] = tmp[k] * chirp[k];
    }
};

}  // namespace detail

// DFT of arbitrary length; set inverse for the (1/n-scaled) inverse transform.
class Fft {
public:
    explicit Fft(size_t n) : n_(n) {
        if (!detail::is_pow2(n_)) plan_ = std::make_unique<detail::BluesteinPlan>(n_);
    }

    void forward(std::vector<cdouble>& a) const {
        check(a);
        if (plan_)
            plan_->transform(a);
        else
            detail::fft_pow2(a, false);
    }

    void inverse(std::vector<cdouble>& a) const {
        check(a);
        if (plan_) {
            for (auto& x : a) x = std::conj(x);
            plan_->transform(a);
            const double inv = 1.0 / static_cast<double>(n_);
            for (auto& x : a) x = std::conj(x) * inv;
        } else {
            detail::fft_pow2(a, true);
        }
    }

    size_t size() const { return n_; }

private:
    void check(const std::vector<cdouble>& a) const {
        if (a.size() != n_) throw std::invalid_argument("fft: length mismatch");
    }

    size_t n_;
    std::shared_ptr<detail::BluesteinPlan> plan_;
};

// Band-limited resampling of a real signal from length n to length m:
// forward DFT, symmetric spectrum zero-pad / truncation with explicit
// Nyquist-bin handling, inverse DFT, m/n rescale. The DC component is
// carried around the transform so constant signals resample exactly.
class FourierResampler {
public:
    FourierResampler(size_t n, size_t m) : n_(n), m_(m), fwd_(n), inv_(m) {
        if (n < 2 || m < 2) throw std::invalid_argument("fourier_resample: lengths must be >= 2");
    }

    std::vector<double> resample(const double* x) const {
        double mean = 0.0;
        for (size_t i = 0; i < n_; ++i) mean += x[i];
        mean /= static_cast<double>(n_);

        std::vector<cdouble> spec(n_);
        for (size_t i = 0; i < n_; ++i) spec[i] = cdouble(x[i] - mean, 0.0);
        fwd_.forward(spec);

        std::vector<cdouble> out(m_, cdouble(0.0, 0.0));
        const size_t keep = std::min(n_, m_);
        const size_t nyq = keep / 2 + 1;
        for (size_t i = 0; i < nyq; ++i) out[i] = spec[i];
        for (size_t i = 1; i <= (keep - 1) / 2; ++i) out[m_ - i] = spec[n_ - i];
        if (keep % 2 == 0) {
            if (m_ < n_) {
                out[keep / 2] += spec[n_ - keep / 2];  // fold the alias partner
            } else if (m_ > n_) {
                out[keep / 2] *= 0.5;  // split the Nyquist bin
                out[m_ - keep / 2] = out[keep / 2];
            }
        }
        inv_.inverse(out);

        const double scale = static_cast<double>(m_) / static_cast<double>(n_);
        std::vector<double> y(m_);
        for (size_t i = 0; i < m_; ++i) y[i] = mean + out[i].real() * scale;
        return y;
    }

    std::vector<double> resample(const std::vector<double>& x) const {
        if (x.size() != n_) throw std::invalid_argument("fourier_resample: input length mismatch");
        return resample(x.data());
    }

private:
    size_t n_, m_;
    Fft fwd_, inv_;
};

inline std::vector<double> fourier_resample(const std::vector<double>& x, size_t m) {
    return FourierResampler(x.size(), m).resample(x);
}

}  // namespace vseq
