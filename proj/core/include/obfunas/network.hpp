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

#ifndef OBFUNAS_NETWORK_HPP_
#define OBFUNAS_NETWORK_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "obfunas/arch.hpp"
#include "obfunas/tensor.hpp"

namespace obfunas {

using NodeId = int;

enum class NodeKind { input, conv, max_pool, avg_pool, gated_sum, concat, global_avg_pool };

/// Convolution parameters and weights. Weight layout is [k1][k2][in][out];
/// bias is optional (empty = none). bn and act run after the convolution.
struct ConvOp {
  int k1 = 1, k2 = 1;
  int stride = 1;
  int pad_h = 0, pad_w = 0;
  int in_ch = 0, out_ch = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  std::optional<BatchNormRecord> bn;
  Activation act = Activation::none;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(k1) * k2 * in_ch * out_ch;
  }
  friend bool operator==(const ConvOp&, const ConvOp&) = default;
};

struct PoolOp {
  int k1 = 1, k2 = 1;
  int stride = 1;
  int pad_h = 0, pad_w = 0;

  friend bool operator==(const PoolOp&, const PoolOp&) = default;
};

/// One executable node. Ids are assigned at build time and never reused, so
/// obfuscation plans can address nodes created by earlier applications.
/// arch_kind is the label the node carries when reflected back into an
/// architecture document.
struct NetNode {
  NodeId id = -1;
  NodeKind kind = NodeKind::input;
  OpKind arch_kind = OpKind::input;
  ConvOp conv;
  PoolOp pool;
  std::vector<NodeId> inputs;
  std::vector<double> gates;  // gated_sum only, parallel to inputs
  Shape out_shape;

  friend bool operator==(const NetNode&, const NetNode&) = default;
};

/// Topologically ordered executable graph with resolved shapes. Immutable in
/// normal use; the transforms copy and rewrite.
struct ConcreteNetwork {
  std::vector<NetNode> nodes;   // indexed by id
  std::vector<NodeId> order;    // execution order
  NodeId input_node = 0;
  NodeId output_node = 0;
  Shape input_shape;

  const NetNode& node(NodeId id) const { return nodes.at(id); }
  NetNode& node(NodeId id) { return nodes.at(id); }

  std::vector<NodeId> consumers(NodeId id) const;
  /// True when `to` is reachable from `from` along graph edges.
  bool has_path(NodeId from, NodeId to) const;
  int order_position(NodeId id) const;

  friend bool operator==(const ConcreteNetwork&, const ConcreteNetwork&) = default;
};

enum class WeightInit { centered_uniform };  // scale 1/sqrt(fan-in)

/// Instantiates an architecture: stem, stacked cells with down-sampling
/// between stacks, global average pool and a 1x1-conv classifier for the
/// cell_stack family; the literal graph for generic_dag. Deterministic in
/// (arch, init, seed). Shape-inference failures name the node.
ConcreteNetwork build_network(const Architecture& arch, WeightInit init,
                              std::uint64_t seed);

/// The structural skeleton an extractor observes: a generic_dag Architecture
/// in canonical numbering (weights, gate values and biases excluded). When
/// doc_index_of_node is given, it receives the canonical document index of
/// every node id.
Architecture extract_architecture(const ConcreteNetwork& net,
                                  std::vector<int>* doc_index_of_node = nullptr);

/// Evaluates nodes in topological order and returns the output node's value.
Tensor forward(const ConcreteNetwork& net, const Tensor& x);

/// Addresses a slice of one node's parameters for finite differencing.
struct ParamSelector {
  enum class Role { weight, bias, bn_gamma, bn_beta, bn_mean, bn_var, gates };
  NodeId node = -1;
  Role role = Role::weight;
  std::vector<std::size_t> indices;
};

/// Central differences (L(p+h)-L(p-h))/(2h) of the scalar loss
/// L = sum of output entries, one estimate per selected index.
std::vector<double> numeric_gradient(const ConcreteNetwork& net, const Tensor& x,
                                     const ParamSelector& selector, double h);

// --- weight sidecar ----------------------------------------------------------
//
// Flat little-endian float32 buffer plus an `obfunas-weights/v1` JSON manifest
// listing (tensor name, shape, byte offset, byte length) in topological order.
// Tensor names use the canonical document index of the owning node.

void save_weights(const ConcreteNetwork& net, const std::filesystem::path& bin_path,
                  const std::filesystem::path& manifest_path);

/// Overwrites the parameters of `net` (typically a freshly built skeleton)
/// from a sidecar. Shapes must match the skeleton exactly.
void load_weights(ConcreteNetwork& net, const std::filesystem::path& bin_path,
                  const std::filesystem::path& manifest_path);

/// Architecture plus its executable instantiation; the unit the obfuscation
/// strategies rewrite.
struct Model {
  Architecture arch;
  ConcreteNetwork net;
};

/// A model directory holds arch.json, weights.bin and weights.manifest.json.
void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

/// Convenience: build_network + pair with the architecture.
Model instantiate(const Architecture& arch, std::uint64_t seed);

}  // namespace obfunas

#endif  // OBFUNAS_NETWORK_HPP_
