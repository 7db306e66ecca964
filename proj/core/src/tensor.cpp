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

#include "obfunas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "obfunas/error.hpp"

namespace obfunas {

namespace {

int out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void require(bool cond, const std::string& message) {
  if (!cond) throw Error(Error::Kind::shape, message);
}

}  // namespace

Tensor conv2d(const Tensor& x, const std::vector<double>& weights, int k1,
              int k2, int in_ch, int out_ch, const std::vector<double>* bias,
              int stride, int pad_h, int pad_w) {
  require(x.c() == in_ch, "conv2d: input has " + std::to_string(x.c()) +
                              " channels, kernel expects " + std::to_string(in_ch));
  require(k1 >= 1 && k2 >= 1 && stride >= 1 && pad_h >= 0 && pad_w >= 0,
          "conv2d: bad geometry");
  require(weights.size() == static_cast<std::size_t>(k1) * k2 * in_ch * out_ch,
          "conv2d: weight buffer size mismatch");
  if (bias != nullptr) {
    require(bias->size() == static_cast<std::size_t>(out_ch),
            "conv2d: bias size mismatch");
  }
  const int oh = out_dim(x.h(), k1, stride, pad_h);
  const int ow = out_dim(x.w(), k2, stride, pad_w);
  require(oh >= 1 && ow >= 1, "conv2d: empty output shape");

  Tensor y(x.n(), out_ch, oh, ow);
  // weights laid out [k1][k2][in][out]
  auto wat = [&](int p, int q, int t, int j) {
    return weights[((static_cast<std::size_t>(p) * k2 + q) * in_ch + t) * out_ch + j];
  };
  for (int n = 0; n < x.n(); ++n) {
    for (int j = 0; j < out_ch; ++j) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          // fixed accumulation order: channels outer, then kernel rows, cols
          for (int t = 0; t < in_ch; ++t) {
            for (int p = 0; p < k1; ++p) {
              const int iy = oy * stride - pad_h + p;
              if (iy < 0 || iy >= x.h()) continue;
              for (int q = 0; q < k2; ++q) {
                const int ix = ox * stride - pad_w + q;
                if (ix < 0 || ix >= x.w()) continue;
                acc += wat(p, q, t, j) * x.at(n, t, iy, ix);
              }
            }
          }
          if (bias != nullptr) acc += (*bias)[j];
          y.at(n, j, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

double avg_pool_scale(int k1, int k2) {
  return static_cast<double>(static_cast<float>(1.0 / (static_cast<double>(k1) * k2)));
}

Tensor avg_pool(const Tensor& x, int k1, int k2, int stride, int pad_h,
                int pad_w) {
  require(k1 >= 1 && k2 >= 1 && stride >= 1 && pad_h >= 0 && pad_w >= 0,
          "avg_pool: bad geometry");
  const int oh = out_dim(x.h(), k1, stride, pad_h);
  const int ow = out_dim(x.w(), k2, stride, pad_w);
  require(oh >= 1 && ow >= 1, "avg_pool: empty output shape");

  const double scale = avg_pool_scale(k1, k2);
  Tensor y(x.n(), x.c(), oh, ow);
  for (int n = 0; n < x.n(); ++n) {
    for (int t = 0; t < x.c(); ++t) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          // each element is scaled before accumulation, in the same window
          // order conv2d visits, so the conv replacement matches exactly
          for (int p = 0; p < k1; ++p) {
            const int iy = oy * stride - pad_h + p;
            if (iy < 0 || iy >= x.h()) continue;
            for (int q = 0; q < k2; ++q) {
              const int ix = ox * stride - pad_w + q;
              if (ix < 0 || ix >= x.w()) continue;
              acc += scale * x.at(n, t, iy, ix);
            }
          }
          y.at(n, t, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

Tensor max_pool(const Tensor& x, int k1, int k2, int stride, int pad_h,
                int pad_w) {
  require(k1 >= 1 && k2 >= 1 && stride >= 1 && pad_h >= 0 && pad_w >= 0,
          "max_pool: bad geometry");
  const int oh = out_dim(x.h(), k1, stride, pad_h);
  const int ow = out_dim(x.w(), k2, stride, pad_w);
  require(oh >= 1 && ow >= 1, "max_pool: empty output shape");

  Tensor y(x.n(), x.c(), oh, ow);
  for (int n = 0; n < x.n(); ++n) {
    for (int t = 0; t < x.c(); ++t) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          // padded cells do not participate; every window overlaps at least
          // one valid cell for any geometry with pad < k
          double best = -std::numeric_limits<double>::infinity();
          bool seen = false;
          for (int p = 0; p < k1; ++p) {
            const int iy = oy * stride - pad_h + p;
            if (iy < 0 || iy >= x.h()) continue;
            for (int q = 0; q < k2; ++q) {
              const int ix = ox * stride - pad_w + q;
              if (ix < 0 || ix >= x.w()) continue;
              best = seen ? std::max(best, x.at(n, t, iy, ix)) : x.at(n, t, iy, ix);
              seen = true;
            }
          }
          require(seen, "max_pool: window entirely in padding");
          y.at(n, t, oy, ox) = best;
        }
      }
    }
  }
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  require(x.h() >= 1 && x.w() >= 1, "global_avg_pool: empty input");
  Tensor y(x.n(), x.c(), 1, 1);
  const double inv = 1.0 / (static_cast<double>(x.h()) * x.w());
  for (int n = 0; n < x.n(); ++n) {
    for (int t = 0; t < x.c(); ++t) {
      double acc = 0.0;
      for (int iy = 0; iy < x.h(); ++iy)
        for (int ix = 0; ix < x.w(); ++ix) acc += x.at(n, t, iy, ix);
      y.at(n, t, 0, 0) = acc * inv;
    }
  }
  return y;
}

Tensor batchnorm_inference(const Tensor& x, const BatchNormRecord& r) {
  const auto c = static_cast<std::size_t>(x.c());
  require(r.gamma.size() == c && r.beta.size() == c && r.mean.size() == c &&
              r.var.size() == c,
          "batchnorm_inference: per-channel vectors do not match " +
              std::to_string(x.c()) + " channels");
  require(r.eps > 0.0, "batchnorm_inference: eps must be positive");
  Tensor y(x.n(), x.c(), x.h(), x.w());
  for (int t = 0; t < x.c(); ++t) {
    require(r.var[t] >= 0.0, "batchnorm_inference: negative variance");
    const double scale = r.gamma[t] / std::sqrt(r.var[t] + r.eps);
    const double shift = r.beta[t] - scale * r.mean[t];
    for (int n = 0; n < x.n(); ++n)
      for (int iy = 0; iy < x.h(); ++iy)
        for (int ix = 0; ix < x.w(); ++ix)
          y.at(n, t, iy, ix) = scale * x.at(n, t, iy, ix) + shift;
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor swish(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v * (1.0 / (1.0 + std::exp(-v)));
  return y;
}

Tensor fake_swish(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) {
    const double t = 1.0 + std::exp(-v);
    v = v * (t / t);
  }
  return y;
}

Tensor apply_activation(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::none:
      return x;
    case Activation::relu:
      return relu(x);
    case Activation::swish:
      return swish(x);
    case Activation::fake_swish:
      return fake_swish(x);
  }
  throw Error(Error::Kind::shape, "apply_activation: unknown activation");
}

Tensor elementwise_sum(const std::vector<const Tensor*>& xs,
                       const std::vector<double>& gates) {
  require(!xs.empty(), "elementwise_sum: no inputs");
  require(gates.empty() || gates.size() == xs.size(),
          "elementwise_sum: gate count mismatch");
  const Tensor& first = *xs.front();
  for (const Tensor* x : xs) {
    require(x->n() == first.n() && x->shape() == first.shape(),
            "elementwise_sum: shape mismatch");
  }
  Tensor y(first.n(), first.c(), first.h(), first.w());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double g = gates.empty() ? 1.0 : gates[i];
    const auto& src = xs[i]->data();
    auto& dst = y.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g * src[k];
  }
  return y;
}

Tensor concat_channels(const std::vector<const Tensor*>& xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  const Tensor& first = *xs.front();
  int channels = 0;
  for (const Tensor* x : xs) {
    require(x->n() == first.n() && x->h() == first.h() && x->w() == first.w(),
            "concat_channels: spatial dims mismatch");
    channels += x->c();
  }
  Tensor y(first.n(), channels, first.h(), first.w());
  int base = 0;
  for (const Tensor* x : xs) {
    for (int n = 0; n < x->n(); ++n)
      for (int t = 0; t < x->c(); ++t)
        for (int iy = 0; iy < x->h(); ++iy)
          for (int ix = 0; ix < x->w(); ++ix)
            y.at(n, base + t, iy, ix) = x->at(n, t, iy, ix);
    base += x->c();
  }
  return y;
}

}  // namespace obfunas
