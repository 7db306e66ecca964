// Copyright 2026 The obfunas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OBFUNAS_TENSOR_HPP_
#define OBFUNAS_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace obfunas {

/// Per-sample feature-map shape (channels, height, width).
struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NCHW tensor, row-major, 64-bit floats. All operator math runs in
/// doubles; only the on-disk sidecar is 32-bit.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w)
      : n_(n), c_(c), h_(h), w_(w),
        data_(static_cast<std::size_t>(n) * c * h * w, 0.0) {}

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  Shape shape() const { return Shape{c_, h_, w_}; }
  std::size_t size() const { return data_.size(); }

  double& at(int in, int ic, int iy, int ix) {
    return data_[((static_cast<std::size_t>(in) * c_ + ic) * h_ + iy) * w_ + ix];
  }
  double at(int in, int ic, int iy, int ix) const {
    return data_[((static_cast<std::size_t>(in) * c_ + ic) * h_ + iy) * w_ + ix];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

/// Frozen inference-time batch-norm statistics, one entry per channel.
struct BatchNormRecord {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mean;  // E(x)
  std::vector<double> var;   // Var[x], >= 0
  double eps = 0x1.0p-16;    // float32-exact

  friend bool operator==(const BatchNormRecord&, const BatchNormRecord&) = default;
};

enum class Activation { none, relu, swish, fake_swish };

// --- forward operators -----------------------------------------------------

/// Cross-correlation. Weights are laid out [k1][k2][in][out]; accumulation
/// runs channels-outer then kernel rows then columns, a fixed order the
/// obfuscation rewrites rely on for exact (tolerance-zero) preservation.
Tensor conv2d(const Tensor& x, const std::vector<double>& weights, int k1,
              int k2, int in_ch, int out_ch, const std::vector<double>* bias,
              int stride, int pad_h, int pad_w);

/// Window mean. Padded cells contribute zero to the sum and are counted in
/// the denominator; each element is scaled by avg_pool_scale(k1, k2) before
/// accumulation so a convolution with those weights reproduces the result
/// term for term.
Tensor avg_pool(const Tensor& x, int k1, int k2, int stride, int pad_h,
                int pad_w);

/// Window max over valid (non-padded) cells.
Tensor max_pool(const Tensor& x, int k1, int k2, int stride, int pad_h,
                int pad_w);

Tensor global_avg_pool(const Tensor& x);

/// The reciprocal window area, rounded to float so the weights of an
/// average-pool replacement convolution store the identical value.
double avg_pool_scale(int k1, int k2);

/// y = gamma/sqrt(var+eps) * x + (beta - gamma*mean/sqrt(var+eps)), per channel.
Tensor batchnorm_inference(const Tensor& x, const BatchNormRecord& r);

Tensor relu(const Tensor& x);
Tensor swish(const Tensor& x);
/// t = 1 + e^{-x}; returns x * (t / t): numerically x, but executes the same
/// operator sequence as swish.
Tensor fake_swish(const Tensor& x);
Tensor apply_activation(const Tensor& x, Activation act);

/// sum_i gates[i] * xs[i]; shapes must match. gates empty means all ones.
Tensor elementwise_sum(const std::vector<const Tensor*>& xs,
                       const std::vector<double>& gates);

/// Channel concatenation in input order; spatial dims must match.
Tensor concat_channels(const std::vector<const Tensor*>& xs);

}  // namespace obfunas

#endif  // OBFUNAS_TENSOR_HPP_
