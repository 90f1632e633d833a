// Kernel benchmark: OpenMP-parallel implementations against the serial
// reference, with agreement checks on the side.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vseq/fft.hpp"
#include "vseq/model.hpp"
#include "vseq/nn.hpp"
#include "vseq/ref.hpp"
#include "vseq/rng.hpp"

using namespace vseq;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_s();
        fn();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void bench_conv() {
    const int cin = 8, cout = 16, H = 16, W = 16, Z = 8, K = 3;
    Rng rng(7);
    Tensor<float> x({cin, H, W, Z});
    x.fill_uniform(rng, 0.0, 1.0);
    Conv3d<float> conv(cin, cout, K, K, K, 1, 1);
    conv.init(rng);

    const double flops = 2.0 * cout * H * W * Z * cin * K * K * K;
    Tensor<float> y_fast;
    const double t_fast = time_best_of(20, [&] { y_fast = conv.forward(x); });
    Tensor<float> y_ref;
    const double t_ref = time_best_of(5, [&] { y_ref = ref::conv3d_naive(x, conv.w, conv.b, 1, 1); });

    float max_diff = 0.0f;
    for (int64_t i = 0; i < y_fast.size(); ++i)
        max_diff = std::max(max_diff, std::abs(y_fast[i] - y_ref[i]));

    Tensor<float> dy(y_fast.shape);
    dy.fill_uniform(rng, -1.0, 1.0);
    conv.zero_grad();
    const double t_bwd = time_best_of(10, [&] { conv.backward(dy); });

    std::printf("conv3d   %dx%dx%dx%d k%d      fwd %8.3f ms (%6.2f GFLOP/s)  ref %8.3f ms  "
                "speedup %5.2fx  bwd %8.3f ms  max|diff| %.2e\n",
                cin, H, W, Z, K, t_fast * 1e3, flops / t_fast * 1e-9, t_ref * 1e3, t_ref / t_fast,
                t_bwd * 1e3, static_cast<double>(max_diff));
}

void bench_pool() {
    const int C = 16, H = 32, W = 32, Z = 16;
    Rng rng(9);
    Tensor<float> x({C, H, W, Z});
    x.fill_uniform(rng, 0.0, 1.0);
    MaxPool3d<float> pool(2, 2, 2);
    Tensor<float> y_fast;
    const double t_fast = time_best_of(20, [&] { y_fast = pool.forward(x); });
    Tensor<float> y_ref;
    const double t_ref = time_best_of(5, [&] { y_ref = ref::maxpool3d_naive(x, 2, 2, 2); });
    float max_diff = 0.0f;
    for (int64_t i = 0; i < y_fast.size(); ++i)
        max_diff = std::max(max_diff, std::abs(y_fast[i] - y_ref[i]));
    std::printf("maxpool  %dx%dx%dx%d w2       fwd %8.3f ms                    ref %8.3f ms  "
                "speedup %5.2fx                    max|diff| %.2e\n",
                C, H, W, Z, t_fast * 1e3, t_ref * 1e3, t_ref / t_fast,
                static_cast<double>(max_diff));
}

void bench_lstm() {
    const int k = 16, din = 64, hidden = 32;
    Rng rng(11);
    Lstm<double> lstm(din, hidden);
    lstm.init(rng);
    std::vector<Tensor<double>> xs(k, Tensor<double>({din}));
    for (auto& x : xs) x.fill_uniform(rng, -1.0, 1.0);
    std::vector<Tensor<double>> hs;
    const double t_fast = time_best_of(50, [&] { hs = lstm.forward(xs); });

    std::vector<std::vector<double>> xs_naive;
    for (const auto& x : xs) xs_naive.emplace_back(x.data.begin(), x.data.end());
    std::vector<double> w(lstm.w.data.begin(), lstm.w.data.end());
    std::vector<double> r(lstm.r.data.begin(), lstm.r.data.end());
    std::vector<double> b(lstm.b.data.begin(), lstm.b.data.end());
    std::vector<std::vector<double>> hs_ref;
    const double t_ref =
        time_best_of(20, [&] { hs_ref = ref::lstm_naive(xs_naive, w, r, b, din, hidden); });
    double max_diff = 0.0;
    for (int t = 0; t < k; ++t)
        for (int u = 0; u < hidden; ++u)
            max_diff = std::max(max_diff,
                                std::abs(hs[static_cast<size_t>(t)][u] -
                                         hs_ref[static_cast<size_t>(t)][static_cast<size_t>(u)]));
    std::printf("lstm     k=%d d=%d h=%d      fwd %8.3f ms                    ref %8.3f ms  "
                "speedup %5.2fx                    max|diff| %.2e\n",
                k, din, hidden, t_fast * 1e3, t_ref * 1e3, t_ref / t_fast, max_diff);
}

void bench_resample() {
    const size_t n = 134, m = 179, cols = 1024;
    Rng rng(13);
    std::vector<std::vector<double>> columns(cols, std::vector<double>(n));
    for (auto& c : columns)
        for (auto& v : c) v = rng.uniform(-100.0, 800.0);

    const FourierResampler plan(n, m);
    std::vector<double> sink;
    const double t_fast = time_best_of(5, [&] {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < static_cast<int64_t>(cols); ++i) {
            auto y = plan.resample(columns[static_cast<size_t>(i)].data());
            if (i == 0) sink = y;
        }
    });
    std::vector<double> y_ref;
    const double t_ref = time_best_of(2, [&] { y_ref = ref::resample_dft_naive(columns[0], m); });
    double max_diff = 0.0;
    for (size_t i = 0; i < m; ++i) max_diff = std::max(max_diff, std::abs(sink[i] - y_ref[i]));
    std::printf("resample n=%zu->%zu x%zu cols  all %8.3f ms  per-col ref %8.3f ms  speedup/col "
                "%5.0fx  max|diff| %.2e\n",
                n, m, cols, t_fast * 1e3, t_ref * 1e3, t_ref * cols / t_fast, max_diff);
}

void bench_frep() {
    ModelConfig cfg;
    cfg.ph = 16;
    cfg.pw = 16;
    cfg.pz = 8;
    cfg.feature_dim = 64;
    VcfModel<float> model(cfg);
    model.init_params();
    Rng rng(17);
    std::vector<Tensor<float>> patches(10, Tensor<float>({cfg.ph, cfg.pw, cfg.pz}));
    for (auto& p : patches) p.fill_uniform(rng, 0.0, 1.0);
    std::vector<double> locs;
    for (int i = 0; i < 10; ++i) locs.push_back((i + 0.5) / 10.0);
    std::vector<double> y_seq(10, 0.0);
    y_seq[4] = 1.0;

    const double t_item = time_best_of(5, [&] { model.train_item(patches, locs, 1.0, y_seq); });
    VcfModel<float>::SeriesCache cache;
    const double t_fwd =
        time_best_of(5, [&] { model.forward_series(patches, locs, cache, false); });
    std::printf("series   k=10 patch 16x16x8  train-item %8.3f ms   inference %8.3f ms\n",
                t_item * 1e3, t_fwd * 1e3);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled\n");
#endif
    bench_conv();
    bench_pool();
    bench_lstm();
    bench_resample();
    bench_frep();
    return 0;
}
