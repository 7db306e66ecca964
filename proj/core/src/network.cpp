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

#include "obfunas/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <tuple>

#include "obfunas/error.hpp"
#include "obfunas/rng.hpp"

#include <nlohmann/json.hpp>

namespace obfunas {

using nlohmann::json;

std::vector<NodeId> ConcreteNetwork::consumers(NodeId id) const {
  std::vector<NodeId> out;
  for (NodeId other : order)
    for (NodeId in : nodes[other].inputs)
      if (in == id) {
        out.push_back(other);
        break;
      }
  return out;
}

bool ConcreteNetwork::has_path(NodeId from, NodeId to) const {
  if (from == to) return true;
  std::deque<NodeId> frontier{from};
  std::vector<bool> seen(nodes.size(), false);
  seen[from] = true;
  while (!frontier.empty()) {
    const NodeId cur = frontier.front();
    frontier.pop_front();
    for (NodeId next : consumers(cur)) {
      if (next == to) return true;
      if (!seen[next]) {
        seen[next] = true;
        frontier.push_back(next);
      }
    }
  }
  return false;
}

int ConcreteNetwork::order_position(NodeId id) const {
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == id) return static_cast<int>(i);
  throw Error(Error::Kind::shape, "node " + std::to_string(id) + " not in execution order");
}

namespace {

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

std::string node_desc(NodeId id) { return "node " + std::to_string(id); }

/// Mutable construction helper; validates shapes as nodes are appended.
struct Builder {
  ConcreteNetwork net;

  NodeId add_input(Shape shape) {
    NetNode node;
    node.id = next_id();
    node.kind = NodeKind::input;
    node.arch_kind = OpKind::input;
    node.out_shape = shape;
    net.input_shape = shape;
    net.input_node = node.id;
    return append(std::move(node));
  }

  NodeId add_conv(OpKind arch_kind, NodeId input, int k1, int k2, int stride,
                  int pad_h, int pad_w, int in_ch, int out_ch, bool with_bias,
                  bool with_bn, Activation act, Rng& rng) {
    const Shape in_shape = net.nodes[input].out_shape;
    if (in_shape.c != in_ch)
      throw Error(Error::Kind::shape,
                  node_desc(next_id()) + ": conv expects " + std::to_string(in_ch) +
                      " input channels, got " + std::to_string(in_shape.c));
    NetNode node;
    node.id = next_id();
    node.kind = NodeKind::conv;
    node.arch_kind = arch_kind;
    node.inputs = {input};
    node.conv.k1 = k1;
    node.conv.k2 = k2;
    node.conv.stride = stride;
    node.conv.pad_h = pad_h;
    node.conv.pad_w = pad_w;
    node.conv.in_ch = in_ch;
    node.conv.out_ch = out_ch;
    const double scale = 1.0 / std::sqrt(static_cast<double>(k1) * k2 * in_ch);
    node.conv.weights.resize(node.conv.weight_count());
    for (double& w : node.conv.weights) w = rng.uniform_f32(-scale, scale);
    if (with_bias) {
      node.conv.bias.resize(out_ch);
      for (double& b : node.conv.bias) b = rng.uniform_f32(-scale, scale);
    }
    if (with_bn) {
      BatchNormRecord bn;
      bn.gamma.resize(out_ch);
      bn.beta.resize(out_ch);
      bn.mean.resize(out_ch);
      bn.var.resize(out_ch);
      for (int i = 0; i < out_ch; ++i) {
        bn.gamma[i] = rng.uniform_f32(0.5, 1.5);
        bn.beta[i] = rng.uniform_f32(-0.1, 0.1);
        bn.mean[i] = rng.uniform_f32(-0.1, 0.1);
        bn.var[i] = rng.uniform_f32(0.5, 1.5);
      }
      node.conv.bn = std::move(bn);
    }
    node.conv.act = act;
    const int oh = conv_out_dim(in_shape.h, k1, stride, pad_h);
    const int ow = conv_out_dim(in_shape.w, k2, stride, pad_w);
    if (oh < 1 || ow < 1)
      throw Error(Error::Kind::shape, node_desc(node.id) + ": empty conv output");
    node.out_shape = Shape{out_ch, oh, ow};
    return append(std::move(node));
  }

  NodeId add_pool(OpKind arch_kind, NodeKind kind, NodeId input, int k1, int k2,
                  int stride, int pad_h, int pad_w) {
    const Shape in_shape = net.nodes[input].out_shape;
    NetNode node;
    node.id = next_id();
    node.kind = kind;
    node.arch_kind = arch_kind;
    node.inputs = {input};
    node.pool = PoolOp{k1, k2, stride, pad_h, pad_w};
    const int oh = conv_out_dim(in_shape.h, k1, stride, pad_h);
    const int ow = conv_out_dim(in_shape.w, k2, stride, pad_w);
    if (oh < 1 || ow < 1)
      throw Error(Error::Kind::shape, node_desc(node.id) + ": empty pool output");
    node.out_shape = Shape{in_shape.c, oh, ow};
    return append(std::move(node));
  }

  NodeId add_sum(const std::vector<NodeId>& inputs) {
    NetNode node;
    node.id = next_id();
    node.kind = NodeKind::gated_sum;
    node.arch_kind = OpKind::zero_gated_sum;
    node.inputs = inputs;
    node.gates.assign(inputs.size(), 1.0);
    const Shape shape = net.nodes[inputs.front()].out_shape;
    for (NodeId in : inputs)
      if (!(net.nodes[in].out_shape == shape))
        throw Error(Error::Kind::shape,
                    node_desc(node.id) + ": join inputs have mismatched shapes");
    node.out_shape = shape;
    return append(std::move(node));
  }

  NodeId add_global_avg_pool(NodeId input) {
    NetNode node;
    node.id = next_id();
    node.kind = NodeKind::global_avg_pool;
    node.arch_kind = OpKind::global_avgpool;
    node.inputs = {input};
    const Shape in_shape = net.nodes[input].out_shape;
    node.out_shape = Shape{in_shape.c, 1, 1};
    return append(std::move(node));
  }

  NodeId next_id() const { return static_cast<NodeId>(net.nodes.size()); }

  NodeId append(NetNode node) {
    const NodeId id = node.id;
    net.nodes.push_back(std::move(node));
    net.order.push_back(id);
    return id;
  }
};

/// Instantiates one cell graph on top of `cell_input`; feature-map joins are
/// channel-wise sums.
NodeId build_cell(Builder& b, const CellGraph& cell, NodeId cell_input, int width,
                  Rng& rng) {
  const int n = static_cast<int>(cell.node_ops.size());
  std::vector<std::vector<NodeId>> preds(n);
  for (const auto& [a, t] : cell.edges) preds[t].push_back(-1 - a);  // placeholder
  std::vector<NodeId> value(n, -1);
  for (int i = 0; i < n; ++i) {
    const OpLabel label = resolve_defaults(cell.node_ops[i]);
    std::vector<NodeId> in_values;
    for (const auto& [a, t] : cell.edges)
      if (t == i) in_values.push_back(value[a]);

    if (label.kind == OpKind::input) {
      value[i] = cell_input;
      continue;
    }
    if (label.kind == OpKind::output || label.kind == OpKind::zero_gated_sum) {
      value[i] = in_values.size() == 1 ? in_values.front() : b.add_sum(in_values);
      continue;
    }
    const NodeId joined =
        in_values.size() == 1 ? in_values.front() : b.add_sum(in_values);
    const int in_ch = label.in_ch > 0 ? label.in_ch : width;
    const int out_ch = label.out_ch > 0 ? label.out_ch : width;
    switch (label.kind) {
      case OpKind::conv3x3_bn_relu:
      case OpKind::conv1x1_bn_relu:
        value[i] = b.add_conv(label.kind, joined, label.k1, label.k2, label.stride,
                              label.pad_h, label.pad_w, in_ch, out_ch,
                              /*with_bias=*/false, /*with_bn=*/true,
                              Activation::relu, rng);
        break;
      case OpKind::identity_conv:
      case OpKind::branch_op:
        value[i] = b.add_conv(label.kind, joined, label.k1, label.k2, label.stride,
                              label.pad_h, label.pad_w, in_ch, out_ch,
                              /*with_bias=*/false, label.has_bn, label.act, rng);
        break;
      case OpKind::maxpool3x3:
        value[i] = b.add_pool(label.kind, NodeKind::max_pool, joined, label.k1,
                              label.k2, label.stride, label.pad_h, label.pad_w);
        break;
      case OpKind::avgpool:
        value[i] = b.add_pool(label.kind, NodeKind::avg_pool, joined, label.k1,
                              label.k2, label.stride, label.pad_h, label.pad_w);
        break;
      case OpKind::global_avgpool:
        value[i] = b.add_global_avg_pool(joined);
        break;
      default:
        throw Error(Error::Kind::validation, "unsupported op in cell");
    }
  }
  return value[n - 1];
}

ConcreteNetwork build_cell_stack(const Architecture& arch, Rng& rng) {
  Builder b;
  const NodeId input = b.add_input(arch.input_shape);
  int width = arch.stem_channels;
  // stem: 3x3 conv-bn-relu to the base width
  NodeId cur = b.add_conv(OpKind::conv3x3_bn_relu, input, 3, 3, 1, 1, 1,
                          arch.input_shape.c, width, false, true,
                          Activation::relu, rng);
  for (int stack = 0; stack < arch.num_stacks; ++stack) {
    if (stack > 0) {
      // down-sample and double the width between stacks
      cur = b.add_pool(OpKind::maxpool3x3, NodeKind::max_pool, cur, 3, 3, 2, 1, 1);
      cur = b.add_conv(OpKind::conv1x1_bn_relu, cur, 1, 1, 1, 0, 0, width,
                       width * 2, false, true, Activation::relu, rng);
      width *= 2;
    }
    for (int c = 0; c < arch.cells_per_stack; ++c)
      cur = build_cell(b, arch.cell, cur, width, rng);
  }
  cur = b.add_global_avg_pool(cur);
  // classifier head as a biased 1x1 conv
  cur = b.add_conv(OpKind::identity_conv, cur, 1, 1, 1, 0, 0, width,
                   arch.num_classes, /*with_bias=*/true, /*with_bn=*/false,
                   Activation::none, rng);
  b.net.output_node = cur;
  return std::move(b.net);
}

ConcreteNetwork build_generic_dag(const Architecture& arch, Rng& rng) {
  Builder b;
  const CellGraph& g = arch.cell;
  const int n = static_cast<int>(g.node_ops.size());
  std::vector<NodeId> value(n, -1);
  for (int i = 0; i < n; ++i) {
    const OpLabel label = resolve_defaults(g.node_ops[i]);
    std::vector<NodeId> in_values;
    for (const auto& [a, t] : g.edges)
      if (t == i) in_values.push_back(value[a]);

    if (label.kind == OpKind::input) {
      value[i] = b.add_input(arch.input_shape);
      continue;
    }
    if (label.kind == OpKind::output || label.kind == OpKind::zero_gated_sum) {
      if (label.kind == OpKind::output) {
        value[i] = in_values.size() == 1 ? in_values.front() : b.add_sum(in_values);
        b.net.output_node = value[i];
        continue;
      }
      value[i] = b.add_sum(in_values);
      continue;
    }
    const NodeId joined =
        in_values.size() == 1 ? in_values.front() : b.add_sum(in_values);
    const Shape in_shape = b.net.nodes[joined].out_shape;
    const int in_ch = label.in_ch > 0 ? label.in_ch : in_shape.c;
    const int out_ch = label.out_ch > 0 ? label.out_ch : in_ch;
    switch (label.kind) {
      case OpKind::conv3x3_bn_relu:
      case OpKind::conv1x1_bn_relu:
        value[i] = b.add_conv(label.kind, joined, label.k1, label.k2, label.stride,
                              label.pad_h, label.pad_w, in_ch, out_ch, false, true,
                              Activation::relu, rng);
        break;
      case OpKind::identity_conv:
      case OpKind::branch_op:
        value[i] = b.add_conv(label.kind, joined, label.k1, label.k2, label.stride,
                              label.pad_h, label.pad_w, in_ch, out_ch, false,
                              label.has_bn, label.act, rng);
        break;
      case OpKind::maxpool3x3:
        value[i] = b.add_pool(label.kind, NodeKind::max_pool, joined, label.k1,
                              label.k2, label.stride, label.pad_h, label.pad_w);
        break;
      case OpKind::avgpool:
        value[i] = b.add_pool(label.kind, NodeKind::avg_pool, joined, label.k1,
                              label.k2, label.stride, label.pad_h, label.pad_w);
        break;
      case OpKind::global_avgpool:
        value[i] = b.add_global_avg_pool(joined);
        break;
      default:
        throw Error(Error::Kind::validation, "unsupported op in graph");
    }
  }
  return std::move(b.net);
}

}  // namespace

ConcreteNetwork build_network(const Architecture& input_arch, WeightInit init,
                              std::uint64_t seed) {
  (void)init;  // centered_uniform is the only policy
  const Architecture arch = canonicalize(input_arch);
  Rng rng(mix_seed(seed, 0));
  return arch.family == Family::cell_stack ? build_cell_stack(arch, rng)
                                           : build_generic_dag(arch, rng);
}

Model instantiate(const Architecture& arch, std::uint64_t seed) {
  Model m;
  m.arch = canonicalize(arch);
  m.net = build_network(m.arch, WeightInit::centered_uniform, seed);
  return m;
}

Architecture extract_architecture(const ConcreteNetwork& net,
                                  std::vector<int>* doc_index_of_node) {
  Architecture arch;
  arch.family = Family::generic_dag;
  arch.input_shape = net.input_shape;
  arch.num_classes = net.node(net.output_node).out_shape.c;

  std::vector<int> raw_index(net.nodes.size(), -1);
  const int n = static_cast<int>(net.order.size());
  for (int pos = 0; pos < n; ++pos) raw_index[net.order[pos]] = pos;

  for (int pos = 0; pos < n; ++pos) {
    const NetNode& node = net.node(net.order[pos]);
    OpLabel label;
    label.kind = node.arch_kind;
    switch (node.kind) {
      case NodeKind::input:
        break;
      case NodeKind::conv:
        label.k1 = node.conv.k1;
        label.k2 = node.conv.k2;
        label.stride = node.conv.stride;
        label.pad_h = node.conv.pad_h;
        label.pad_w = node.conv.pad_w;
        label.in_ch = node.conv.in_ch;
        label.out_ch = node.conv.out_ch;
        label.has_bn = node.conv.bn.has_value();
        label.act = node.conv.act;
        break;
      case NodeKind::max_pool:
      case NodeKind::avg_pool:
        label.k1 = node.pool.k1;
        label.k2 = node.pool.k2;
        label.stride = node.pool.stride;
        label.pad_h = node.pool.pad_h;
        label.pad_w = node.pool.pad_w;
        break;
      case NodeKind::gated_sum:
      case NodeKind::global_avg_pool:
        break;
      case NodeKind::concat:
        throw Error(Error::Kind::validation,
                    "concat nodes are not representable in obfunas-arch/v1");
    }
    arch.cell.node_ops.push_back(resolve_defaults(label));
    for (NodeId in : node.inputs)
      arch.cell.edges.emplace_back(raw_index[in], pos);
  }
  // designated output becomes an explicit terminal node
  arch.cell.node_ops.push_back(OpLabel{OpKind::output});
  arch.cell.edges.emplace_back(raw_index[net.output_node], n);

  if (doc_index_of_node != nullptr) {
    const std::vector<int> order = canonical_node_order(arch.cell);
    std::vector<int> new_index(order.size(), -1);
    for (std::size_t pos = 0; pos < order.size(); ++pos) new_index[order[pos]] = static_cast<int>(pos);
    doc_index_of_node->assign(net.nodes.size(), -1);
    for (NodeId id = 0; id < static_cast<NodeId>(net.nodes.size()); ++id)
      if (raw_index[id] >= 0) (*doc_index_of_node)[id] = new_index[raw_index[id]];
  }
  return canonicalize(arch);
}

Tensor forward(const ConcreteNetwork& net, const Tensor& x) {
  if (!(x.shape() == net.input_shape))
    throw Error(Error::Kind::shape, "forward: input shape mismatch");
  std::vector<Tensor> values(net.nodes.size());
  for (NodeId id : net.order) {
    const NetNode& node = net.node(id);
    try {
      switch (node.kind) {
        case NodeKind::input:
          values[id] = x;
          break;
        case NodeKind::conv: {
          Tensor y = conv2d(values[node.inputs[0]], node.conv.weights,
                            node.conv.k1, node.conv.k2, node.conv.in_ch,
                            node.conv.out_ch,
                            node.conv.bias.empty() ? nullptr : &node.conv.bias,
                            node.conv.stride, node.conv.pad_h, node.conv.pad_w);
          if (node.conv.bn.has_value()) y = batchnorm_inference(y, *node.conv.bn);
          values[id] = apply_activation(y, node.conv.act);
          break;
        }
        case NodeKind::max_pool:
          values[id] = max_pool(values[node.inputs[0]], node.pool.k1, node.pool.k2,
                                node.pool.stride, node.pool.pad_h, node.pool.pad_w);
          break;
        case NodeKind::avg_pool:
          values[id] = avg_pool(values[node.inputs[0]], node.pool.k1, node.pool.k2,
                                node.pool.stride, node.pool.pad_h, node.pool.pad_w);
          break;
        case NodeKind::gated_sum: {
          std::vector<const Tensor*> ins;
          ins.reserve(node.inputs.size());
          for (NodeId in : node.inputs) ins.push_back(&values[in]);
          values[id] = elementwise_sum(ins, node.gates);
          break;
        }
        case NodeKind::concat: {
          std::vector<const Tensor*> ins;
          ins.reserve(node.inputs.size());
          for (NodeId in : node.inputs) ins.push_back(&values[in]);
          values[id] = concat_channels(ins);
          break;
        }
        case NodeKind::global_avg_pool:
          values[id] = global_avg_pool(values[node.inputs[0]]);
          break;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), node_desc(id) + ": " + e.what());
    }
  }
  return values[net.output_node];
}

namespace {

std::vector<double>* selector_target(ConcreteNetwork& net, const ParamSelector& sel) {
  NetNode& node = net.node(sel.node);
  switch (sel.role) {
    case ParamSelector::Role::weight:
      return &node.conv.weights;
    case ParamSelector::Role::bias:
      return &node.conv.bias;
    case ParamSelector::Role::bn_gamma:
      return node.conv.bn ? &node.conv.bn->gamma : nullptr;
    case ParamSelector::Role::bn_beta:
      return node.conv.bn ? &node.conv.bn->beta : nullptr;
    case ParamSelector::Role::bn_mean:
      return node.conv.bn ? &node.conv.bn->mean : nullptr;
    case ParamSelector::Role::bn_var:
      return node.conv.bn ? &node.conv.bn->var : nullptr;
    case ParamSelector::Role::gates:
      return &node.gates;
  }
  return nullptr;
}

double sum_of_entries(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc;
}

}  // namespace

std::vector<double> numeric_gradient(const ConcreteNetwork& net, const Tensor& x,
                                     const ParamSelector& selector, double h) {
  if (selector.node < 0 || selector.node >= static_cast<NodeId>(net.nodes.size()))
    throw Error(Error::Kind::shape, "numeric_gradient: no such node");
  ConcreteNetwork work = net;
  std::vector<double>* params = selector_target(work, selector);
  if (params == nullptr)
    throw Error(Error::Kind::shape, "numeric_gradient: selected tensor absent");
  std::vector<double> grads;
  grads.reserve(selector.indices.size());
  for (std::size_t idx : selector.indices) {
    if (idx >= params->size())
      throw Error(Error::Kind::shape,
                  "numeric_gradient: index " + std::to_string(idx) + " out of range");
    const double orig = (*params)[idx];
    (*params)[idx] = orig + h;
    const double plus = sum_of_entries(forward(work, x));
    (*params)[idx] = orig - h;
    const double minus = sum_of_entries(forward(work, x));
    (*params)[idx] = orig;
    grads.push_back((plus - minus) / (2.0 * h));
  }
  return grads;
}

// --- weight sidecar ----------------------------------------------------------

namespace {

constexpr std::string_view kWeightsSchema = "obfunas-weights/v1";

struct TensorRef {
  std::string name;
  std::vector<int> shape;
  const std::vector<double>* values;
};

/// Every persisted tensor of the network in execution order, named by the
/// canonical document index of the owning node.
std::vector<TensorRef> tensor_refs(const ConcreteNetwork& net,
                                   const std::vector<int>& doc_index) {
  std::vector<TensorRef> refs;
  for (NodeId id : net.order) {
    const NetNode& node = net.node(id);
    const std::string base = "node" + std::to_string(doc_index[id]);
    if (node.kind == NodeKind::conv) {
      refs.push_back({base + ".weight",
                      {node.conv.k1, node.conv.k2, node.conv.in_ch, node.conv.out_ch},
                      &node.conv.weights});
      if (!node.conv.bias.empty())
        refs.push_back({base + ".bias", {node.conv.out_ch}, &node.conv.bias});
      if (node.conv.bn.has_value()) {
        const BatchNormRecord& bn = *node.conv.bn;
        refs.push_back({base + ".bn.gamma", {node.conv.out_ch}, &bn.gamma});
        refs.push_back({base + ".bn.beta", {node.conv.out_ch}, &bn.beta});
        refs.push_back({base + ".bn.mean", {node.conv.out_ch}, &bn.mean});
        refs.push_back({base + ".bn.var", {node.conv.out_ch}, &bn.var});
      }
    } else if (node.kind == NodeKind::gated_sum) {
      refs.push_back({base + ".gates",
                      {static_cast<int>(node.gates.size())},
                      &node.gates});
    }
  }
  return refs;
}

void write_f32_le(std::vector<unsigned char>& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  out.push_back(static_cast<unsigned char>(bits & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 24) & 0xff));
}

double read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return static_cast<double>(f);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Error::Kind::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Error::Kind::io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(Error::Kind::io, "short write to " + path.string());
}

}  // namespace

void save_weights(const ConcreteNetwork& net, const std::filesystem::path& bin_path,
                  const std::filesystem::path& manifest_path) {
  std::vector<int> doc_index;
  extract_architecture(net, &doc_index);
  const std::vector<TensorRef> refs = tensor_refs(net, doc_index);

  std::vector<unsigned char> blob;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const TensorRef& ref : refs) {
    json entry;
    entry["name"] = ref.name;
    entry["shape"] = ref.shape;
    entry["offset"] = offset;
    entry["length"] = ref.values->size() * 4;
    tensors.push_back(std::move(entry));
    for (double v : *ref.values) write_f32_le(blob, v);
    offset += ref.values->size() * 4;
  }
  json manifest;
  manifest["schema"] = std::string(kWeightsSchema);
  manifest["tensors"] = std::move(tensors);

  write_file(bin_path, std::string_view(reinterpret_cast<const char*>(blob.data()), blob.size()));
  write_file(manifest_path, manifest.dump());
}

void load_weights(ConcreteNetwork& net, const std::filesystem::path& bin_path,
                  const std::filesystem::path& manifest_path) {
  const std::string manifest_text = read_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    throw Error(Error::Kind::schema, std::string("weights manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("schema") ||
      manifest.at("schema") != std::string(kWeightsSchema))
    throw Error(Error::Kind::schema,
                "weights manifest schema must be \"" + std::string(kWeightsSchema) + "\"");
  if (!manifest.contains("tensors") || !manifest.at("tensors").is_array())
    throw Error(Error::Kind::schema, "weights manifest missing tensors array");

  const std::string blob = read_file(bin_path);

  struct Entry {
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t length = 0;
  };
  std::map<std::string, Entry> entries;
  for (const json& t : manifest.at("tensors")) {
    if (!t.is_object() || !t.contains("name") || !t.contains("shape") ||
        !t.contains("offset") || !t.contains("length"))
      throw Error(Error::Kind::schema, "weights manifest entry missing a field");
    Entry e;
    e.shape = t.at("shape").get<std::vector<int>>();
    e.offset = t.at("offset").get<std::size_t>();
    e.length = t.at("length").get<std::size_t>();
    if (e.offset + e.length > blob.size() || e.length % 4 != 0)
      throw Error(Error::Kind::schema,
                  "tensor " + t.at("name").get<std::string>() + " overruns the weight buffer");
    if (!entries.emplace(t.at("name").get<std::string>(), std::move(e)).second)
      throw Error(Error::Kind::schema,
                  "duplicate tensor " + t.at("name").get<std::string>());
  }

  auto take = [&](const std::string& name, std::size_t expected_count,
                  std::vector<double>& out) {
    auto it = entries.find(name);
    if (it == entries.end())
      throw Error(Error::Kind::schema, "weights manifest is missing tensor " + name);
    const Entry& e = it->second;
    if (e.length / 4 != expected_count)
      throw Error(Error::Kind::schema, "tensor " + name + " has unexpected size");
    out.resize(expected_count);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + e.offset;
    for (std::size_t i = 0; i < expected_count; ++i) out[i] = read_f32_le(p + 4 * i);
    entries.erase(it);
  };

  std::vector<int> doc_index;
  extract_architecture(net, &doc_index);
  for (NodeId id : net.order) {
    NetNode& node = net.node(id);
    const std::string base = "node" + std::to_string(doc_index[id]);
    if (node.kind == NodeKind::conv) {
      take(base + ".weight", node.conv.weight_count(), node.conv.weights);
      if (entries.contains(base + ".bias")) {
        take(base + ".bias", static_cast<std::size_t>(node.conv.out_ch), node.conv.bias);
      } else {
        node.conv.bias.clear();
      }
      if (node.conv.bn.has_value()) {
        const auto c = static_cast<std::size_t>(node.conv.out_ch);
        take(base + ".bn.gamma", c, node.conv.bn->gamma);
        take(base + ".bn.beta", c, node.conv.bn->beta);
        take(base + ".bn.mean", c, node.conv.bn->mean);
        take(base + ".bn.var", c, node.conv.bn->var);
      }
    } else if (node.kind == NodeKind::gated_sum) {
      take(base + ".gates", node.gates.size(), node.gates);
    }
  }
  if (!entries.empty())
    throw Error(Error::Kind::schema,
                "weights manifest has unexpected tensor " + entries.begin()->first);
}

void save_model(const Model& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "arch.json", serialize_architecture(model.arch) + "\n");
  save_weights(model.net, dir / "weights.bin", dir / "weights.manifest.json");
}

Model load_model(const std::filesystem::path& dir) {
  Model m;
  m.arch = parse_architecture(read_file(dir / "arch.json"));
  m.net = build_network(m.arch, WeightInit::centered_uniform, 0);
  load_weights(m.net, dir / "weights.bin", dir / "weights.manifest.json");
  return m;
}

}  // namespace obfunas
