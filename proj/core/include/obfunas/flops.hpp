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

#ifndef OBFUNAS_FLOPS_HPP_
#define OBFUNAS_FLOPS_HPP_

#include <cstdint>
#include <string>

#include "obfunas/arch.hpp"
#include "obfunas/network.hpp"

namespace obfunas {

/// Deterministic FLOPs count. Convention: only parameterized linear maps
/// cost anything, at 2*k1*k2*Cin*Cout*Hout*Wout (one MAC = 2 FLOPs) plus
/// Cout*Hout*Wout when a bias is present; pooling, batch-norm, activations,
/// elementwise sums, gating and concat count zero. Gated (zero) branches are
/// counted at full cost, since the executed structure is what an extractor
/// observes.
struct FlopsCount {
  std::uint64_t value = 0;

  double mflops() const { return static_cast<double>(value) / 1e6; }
  /// Two-decimal MFLOPs rendering used by the CLI.
  std::string mflops_str() const;

  friend bool operator==(const FlopsCount&, const FlopsCount&) = default;
  friend auto operator<=>(const FlopsCount&, const FlopsCount&) = default;
};

/// Cost of a single node with resolved shapes.
FlopsCount flops_of_op(const NetNode& node);

FlopsCount flops_of_network(const ConcreteNetwork& net);

/// flops_of_network of a deterministic instantiation of `arch`.
FlopsCount flops_of_arch(const Architecture& arch);

}  // namespace obfunas

#endif  // OBFUNAS_FLOPS_HPP_
