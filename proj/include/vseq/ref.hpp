#pragma once

// Serial reference implementations, written straight from the operation
// definitions with no blocking, no range precomputation and no OpenMP.
// They exist as independent oracles for the optimized kernels and as the
// baseline side of the benchmark; production code never links this.

#include <complex>
#include <vector>

#include "vseq/tensor.hpp"

namespace vseq::ref {

// cross-correlation, x:(cin,H,W,Z), w:(cout,cin,kh,kw,kz)
Tensor<float> conv3d_naive(const Tensor<float>& x, const Tensor<float>& w,
                           const Tensor<float>& b, int stride, int pad);

Tensor<float> maxpool3d_naive(const Tensor<float>& x, int wh, int ww, int wz);

// one-step-at-a-time scalar LSTM recurrence, gate order (i,f,g,o)
std::vector<std::vector<double>> lstm_naive(const std::vector<std::vector<double>>& inputs,
                                            const std::vector<double>& w,
                                            const std::vector<double>& r,
                                            const std::vector<double>& b, int din, int hidden);

std::vector<double> dense_naive(const std::vector<double>& x, const std::vector<double>& w,
                                const std::vector<double>& b, int in, int out);

// direct O(n*m) DFT-based resampling evaluating the textbook sums
std::vector<double> resample_dft_naive(const std::vector<double>& x, size_t m);

}  // namespace vseq::ref
