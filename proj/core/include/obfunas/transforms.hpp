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

#ifndef OBFUNAS_TRANSFORMS_HPP_
#define OBFUNAS_TRANSFORMS_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "obfunas/network.hpp"

namespace obfunas {

// Function-preserving obfuscation strategies. Every rewrite leaves the
// forward function of the network unchanged exactly (zero tolerance in
// 64-bit arithmetic): introduced terms are multiplied by exact zeros or
// copied by exact ones. Inputs are never mutated; each strategy returns a
// rewritten copy.

enum class StrategyKind {
  widen_layer,
  deepen_layer,
  widen_kernel,
  replace_avgpool,
  replace_skip,
  add_shortcut_sequential,
  add_shortcut_parallel,
  add_branch,
};

constexpr int kStrategyKindCount = 8;

std::string_view strategy_kind_name(StrategyKind kind);
StrategyKind strategy_kind_from_name(std::string_view name);  // throws Error(schema)
std::vector<StrategyKind> all_strategy_kinds();

/// One parameterized strategy application. Which fields are meaningful
/// depends on the kind; `seed` drives any randomized fill.
struct StrategyApplication {
  StrategyKind kind = StrategyKind::widen_layer;
  NodeId node = -1;          // widen-layer, widen-kernel, replace-avgpool
  NodeId src = -1, dst = -1; // deepen-layer edge, replace-skip edge, shortcuts, branch
  int out_channels = 0;      // widen-layer: o'
  int k1 = 0, k2 = 0;        // deepen kernel, widen-kernel (k3,k4), branch kernel
  bool with_bn = false;      // deepen-layer
  int stride = 1;            // branch op (must preserve feature-map size)
  std::uint64_t seed = 0;

  friend bool operator==(const StrategyApplication&, const StrategyApplication&) = default;
};

/// Ordered sequence of applications; the genotype of the search. Validity is
/// stateful: each application must hold on the network produced by the ones
/// before it.
struct ObfuscationPlan {
  std::vector<StrategyApplication> applications;

  friend bool operator==(const ObfuscationPlan&, const ObfuscationPlan&) = default;
};

/// `obfunas-plan/v1` document round-trip.
std::string plan_to_json(const ObfuscationPlan& plan);
ObfuscationPlan plan_from_json(std::string_view text);

// --- scaling-up --------------------------------------------------------------

/// Extends a conv layer to out_channels output channels (new filters zero,
/// new bias zero, new batch-norm channels fixed so they emit exact zeros) and
/// fills the unique successor conv's new input slices with seeded random
/// values that only ever multiply those zeros.
ConcreteNetwork widen_layer(const ConcreteNetwork& net, NodeId layer,
                            int out_channels, std::uint64_t seed);

/// Inserts an identity-acting conv (odd kernel k, stride 1, centered padding)
/// on the edge between two sequential nodes. The inserted layer adopts the
/// upstream activation when it satisfies phi(phi(x)) = phi(x) (relu,
/// fake-swish, none); plain swish is rejected. with_bn attaches statistics
/// the normalization cancels exactly.
ConcreteNetwork deepen_layer(const ConcreteNetwork& net, NodeId after,
                             NodeId before, int k, bool with_bn,
                             std::uint64_t seed);

/// Re-centers a conv kernel inside a zero-filled k3 x k4 kernel and bumps the
/// padding so output dimensions are preserved.
ConcreteNetwork widen_kernel(const ConcreteNetwork& net, NodeId layer, int k3,
                             int k4);

// --- operation-change --------------------------------------------------------

/// Replaces an average-pool node with a conv of identical geometry whose
/// weights hold the window reciprocal on the channel diagonal.
ConcreteNetwork replace_avg_pool(const ConcreteNetwork& net, NodeId node);

/// Replaces a skip edge feeding a sum/concat join with an identity conv.
ConcreteNetwork replace_skip_connection(const ConcreteNetwork& net, NodeId src,
                                        NodeId dst);

// --- connection-adding -------------------------------------------------------

enum class ShortcutMode { sequential, parallel };

/// Adds a zero-gated edge from src into a (possibly new) gated-sum join:
/// sequential mode joins on dst's output, parallel mode on dst's input.
/// FLOPs are unchanged; the architecture (and its hash) is not.
ConcreteNetwork add_shortcut(const ConcreteNetwork& net, NodeId src, NodeId dst,
                             ShortcutMode mode);

struct BranchOpSpec {
  int k1 = 1, k2 = 1;
  int stride = 1;  // anything else fails the feature-map-size precondition
};

/// Like a sequential shortcut, but routes src through a zero-weight conv
/// branch before the sum join.
ConcreteNetwork add_layer_branch(const ConcreteNetwork& net, NodeId src,
                                 NodeId dst, const BranchOpSpec& branch);

// --- plan application ---------------------------------------------------------

ConcreteNetwork apply_application(const ConcreteNetwork& net,
                                  const StrategyApplication& app);

/// Left-fold of the plan over the victim. Any non-empty plan re-derives the
/// pair's architecture from the rewritten network; the first invalid
/// application is reported with its index.
Model apply_plan(const Model& victim, const ObfuscationPlan& plan);

/// Every valid application of the given kinds on `net`, in deterministic
/// order, with parameters drawn from the same bounded grids the search
/// mutates over.
std::vector<StrategyApplication> enumerate_applications(
    const ConcreteNetwork& net, const std::vector<StrategyKind>& kinds);

// --- equivalence checking -----------------------------------------------------

struct PreservationReport {
  double max_abs_diff = 0.0;
  bool pass = false;
  int samples = 0;
};

/// Evaluates f and g on n seeded standard-normal inputs; passes iff the max
/// elementwise |f(x) - g(x)| over all samples is <= tol.
PreservationReport check_function_preserving(const ConcreteNetwork& f,
                                             const ConcreteNetwork& g, int n,
                                             std::uint64_t seed, double tol);

}  // namespace obfunas

#endif  // OBFUNAS_TRANSFORMS_HPP_
