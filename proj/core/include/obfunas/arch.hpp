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

#ifndef OBFUNAS_ARCH_HPP_
#define OBFUNAS_ARCH_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "obfunas/tensor.hpp"

namespace obfunas {

enum class Family { cell_stack, generic_dag };

/// Node operation vocabulary of the `obfunas-arch/v1` document format. The
/// conv kinds name the op's lineage; the kernel/stride/padding parameters are
/// authoritative (a kernel-widened conv3x3-bn-relu keeps its kind and carries
/// k=[5,5]).
enum class OpKind {
  input,
  output,
  conv3x3_bn_relu,
  conv1x1_bn_relu,
  maxpool3x3,
  avgpool,
  identity_conv,
  zero_gated_sum,
  branch_op,
  global_avgpool,
};

std::string_view op_kind_name(OpKind kind);
OpKind op_kind_from_name(std::string_view name);  // throws Error(schema)
bool op_kind_is_conv(OpKind kind);
bool op_kind_is_interior(OpKind kind);  // usable between input and output

std::string_view activation_name(Activation act);
Activation activation_from_name(std::string_view name);  // throws Error(schema)

/// Structural parameters of one graph node. Zero / negative sentinels mean
/// "use the kind's default" (resolved by resolve_defaults): channel counts of
/// cell-stack interior ops stay unresolved until build time, when the stack
/// width is known.
struct OpLabel {
  OpKind kind = OpKind::input;
  int k1 = 0, k2 = 0;          // kernel, 0 = kind default
  int stride = 0;              // 0 = kind default (1)
  int pad_h = -1, pad_w = -1;  // -1 = kind default
  int in_ch = 0, out_ch = 0;   // 0 = derived from context
  bool has_bn = false;
  Activation act = Activation::none;

  friend bool operator==(const OpLabel&, const OpLabel&) = default;
};

/// Fills kind-implied defaults (kernel, stride, padding, bn/act flags).
OpLabel resolve_defaults(OpLabel label);

/// DAG with node 0 the input and the last node the output; edges are
/// (source, target) pairs with source < target under the stored numbering.
struct CellGraph {
  std::vector<OpLabel> node_ops;
  std::vector<std::pair<int, int>> edges;

  friend bool operator==(const CellGraph&, const CellGraph&) = default;
};

/// Serializable description of a network: either a repeated-cell skeleton
/// (family cell_stack) or a whole executable graph (family generic_dag, where
/// `cell` holds the full network and the stack fields are unused).
struct Architecture {
  Family family = Family::cell_stack;
  int stem_channels = 0;
  int num_stacks = 0;
  int cells_per_stack = 0;
  CellGraph cell;
  Shape input_shape;
  int num_classes = 0;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ValidationReport {
  bool ok = false;
  std::vector<std::string> diagnostics;
};

/// Checks every structural invariant; violations are reported with node/edge
/// coordinates, never thrown.
ValidationReport validate_architecture(const Architecture& arch);

/// Parses an `obfunas-arch/v1` JSON document. Schema problems throw
/// Error(schema) naming the offending field; an ill-formed graph throws
/// Error(validation) carrying the report's diagnostics.
Architecture parse_architecture(std::string_view text);

/// Canonical JSON: nodes renumbered into topological order with ties broken
/// by op-label lexicographic key then original index, edges sorted, keys
/// sorted, no insignificant whitespace. Rejects invalid architectures.
std::string serialize_architecture(const Architecture& arch);

/// The same renumbering applied to the in-memory value.
Architecture canonicalize(const Architecture& arch);

/// The node visit order canonicalize() uses: position -> original index.
/// The graph must already be valid.
std::vector<int> canonical_node_order(const CellGraph& graph);

/// 256-bit digest of the canonical serialization.
struct ArchHash {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  static ArchHash from_hex(std::string_view hex);  // throws Error(schema)
  friend bool operator==(const ArchHash&, const ArchHash&) = default;
  friend auto operator<=>(const ArchHash&, const ArchHash&) = default;
};

ArchHash canonical_hash(const Architecture& arch);

struct ArchHashHasher {
  std::size_t operator()(const ArchHash& h) const;
};

/// Bounds for exhaustive cell enumeration plus the skeleton parameters every
/// emitted Architecture shares.
struct EnumerationConstraints {
  int max_nodes = 4;
  int max_edges = 9;
  std::vector<OpKind> allowed_ops;  // interior kinds
  int stem_channels = 4;
  int num_stacks = 1;
  int cells_per_stack = 1;
  Shape input_shape{3, 8, 8};
  int num_classes = 10;
};

/// Emits every valid cell graph with 2..max_nodes nodes and at most max_edges
/// edges, exactly once, in increasing canonical-serialization order. The
/// callback may return false to stop early.
void enumerate_space(const EnumerationConstraints& constraints,
                     const std::function<bool(const Architecture&)>& emit);

std::vector<Architecture> enumerate_space(
    const EnumerationConstraints& constraints);

}  // namespace obfunas

#endif  // OBFUNAS_ARCH_HPP_
