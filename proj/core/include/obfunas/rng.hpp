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

#ifndef OBFUNAS_RNG_HPP_
#define OBFUNAS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace obfunas {

/// Deterministic random source. std::mt19937_64 has a fully specified output
/// sequence, and all mappings below avoid the implementation-defined
/// std::*_distribution classes, so a seed reproduces the same values on every
/// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform draw in [lo, hi) rounded to the nearest float. Every stored
  /// network parameter goes through this so it survives the 32-bit sidecar
  /// format without loss.
  double uniform_f32(double lo, double hi) {
    const double v = lo + (hi - lo) * uniform_unit();
    return static_cast<double>(static_cast<float>(v));
  }

  /// Standard normal via Box-Muller (used for evaluation inputs, which are
  /// never persisted).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = uniform_unit();
    while (u <= 0.0) u = uniform_unit();
    const double v = uniform_unit();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Mixes a base seed with a stream index so independent substreams can be
/// derived without correlation (SplitMix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace obfunas

#endif  // OBFUNAS_RNG_HPP_
