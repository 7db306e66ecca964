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

#include "obfunas/arch.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "obfunas/error.hpp"

#include <nlohmann/json.hpp>

namespace obfunas {

using nlohmann::json;

namespace {

constexpr std::string_view kArchSchema = "obfunas-arch/v1";

struct KindName {
  OpKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {OpKind::input, "input"},
    {OpKind::output, "output"},
    {OpKind::conv3x3_bn_relu, "conv3x3-bn-relu"},
    {OpKind::conv1x1_bn_relu, "conv1x1-bn-relu"},
    {OpKind::maxpool3x3, "maxpool3x3"},
    {OpKind::avgpool, "avgpool"},
    {OpKind::identity_conv, "identity-conv"},
    {OpKind::zero_gated_sum, "zero-gated-sum"},
    {OpKind::branch_op, "branch-op"},
    {OpKind::global_avgpool, "global-avgpool"},
};

}  // namespace

std::string_view op_kind_name(OpKind kind) {
  for (const auto& e : kKindNames)
    if (e.kind == kind) return e.name;
  throw Error(Error::Kind::schema, "unknown op kind");
}

OpKind op_kind_from_name(std::string_view name) {
  for (const auto& e : kKindNames)
    if (e.name == name) return e.kind;
  throw Error(Error::Kind::schema, "unknown op kind \"" + std::string(name) + "\"");
}

bool op_kind_is_conv(OpKind kind) {
  return kind == OpKind::conv3x3_bn_relu || kind == OpKind::conv1x1_bn_relu ||
         kind == OpKind::identity_conv || kind == OpKind::branch_op;
}

bool op_kind_is_interior(OpKind kind) {
  return kind != OpKind::input && kind != OpKind::output;
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::swish: return "swish";
    case Activation::fake_swish: return "fake-swish";
  }
  throw Error(Error::Kind::schema, "unknown activation");
}

Activation activation_from_name(std::string_view name) {
  if (name == "none") return Activation::none;
  if (name == "relu") return Activation::relu;
  if (name == "swish") return Activation::swish;
  if (name == "fake-swish") return Activation::fake_swish;
  throw Error(Error::Kind::schema,
              "unknown activation \"" + std::string(name) + "\"");
}

OpLabel resolve_defaults(OpLabel label) {
  const bool pool = label.kind == OpKind::maxpool3x3 || label.kind == OpKind::avgpool;
  if (op_kind_is_conv(label.kind) || pool) {
    if (label.k1 <= 0 || label.k2 <= 0) {
      int k = 1;
      switch (label.kind) {
        case OpKind::conv3x3_bn_relu:
        case OpKind::maxpool3x3:
        case OpKind::avgpool:
          k = 3;
          break;
        default:
          k = 1;
          break;
      }
      label.k1 = k;
      label.k2 = k;
    }
    if (label.stride <= 0) label.stride = 1;
    if (label.pad_h < 0) label.pad_h = (label.k1 - 1) / 2;
    if (label.pad_w < 0) label.pad_w = (label.k2 - 1) / 2;
    if (label.kind == OpKind::conv3x3_bn_relu || label.kind == OpKind::conv1x1_bn_relu) {
      label.has_bn = true;
      label.act = Activation::relu;
    }
    if (pool) {
      label.has_bn = false;
      label.act = Activation::none;
      label.in_ch = 0;
      label.out_ch = 0;
    }
  } else {
    label.k1 = 0;
    label.k2 = 0;
    label.stride = 0;
    label.pad_h = -1;
    label.pad_w = -1;
    label.in_ch = 0;
    label.out_ch = 0;
    label.has_bn = false;
    label.act = Activation::none;
  }
  return label;
}

namespace {

// Lexicographic key used for canonical tie-breaking.
auto label_key(const OpLabel& l) {
  return std::make_tuple(std::string(op_kind_name(l.kind)), l.k1, l.k2, l.stride,
                         l.pad_h, l.pad_w, l.in_ch, l.out_ch, l.has_bn,
                         std::string(activation_name(l.act)));
}

std::string edge_str(int a, int b) {
  return "(" + std::to_string(a) + "," + std::to_string(b) + ")";
}

void validate_graph(const Architecture& arch, std::vector<std::string>& out) {
  const CellGraph& g = arch.cell;
  const int n = static_cast<int>(g.node_ops.size());
  if (n < 2) {
    out.push_back("graph must have at least an input and an output node");
    return;
  }
  int inputs = 0, outputs = 0;
  for (int i = 0; i < n; ++i) {
    const OpLabel& l = g.node_ops[i];
    if (l.kind == OpKind::input) ++inputs;
    if (l.kind == OpKind::output) ++outputs;
  }
  if (g.node_ops.front().kind != OpKind::input)
    out.push_back("node 0 must be labeled input");
  if (g.node_ops.back().kind != OpKind::output)
    out.push_back("last node must be labeled output");
  if (inputs != 1)
    out.push_back("expected exactly one input node, found " + std::to_string(inputs));
  if (outputs != 1)
    out.push_back("expected exactly one output node, found " + std::to_string(outputs));
  for (int i = 1; i + 1 < n; ++i) {
    const OpLabel& l = g.node_ops[i];
    if (!op_kind_is_interior(l.kind))
      out.push_back("node " + std::to_string(i) + " has non-interior kind " +
                    std::string(op_kind_name(l.kind)));
    if (arch.family == Family::cell_stack && l.kind == OpKind::global_avgpool)
      out.push_back("node " + std::to_string(i) +
                    ": global-avgpool is not a cell operation");
  }
  for (int i = 0; i < n; ++i) {
    const OpLabel l = resolve_defaults(g.node_ops[i]);
    if (op_kind_is_conv(l.kind) || l.kind == OpKind::maxpool3x3 ||
        l.kind == OpKind::avgpool) {
      if (l.k1 < 1 || l.k2 < 1 || l.k1 % 2 == 0 || l.k2 % 2 == 0)
        out.push_back("node " + std::to_string(i) + ": kernel sizes must be odd positive, got " +
                      std::to_string(l.k1) + "x" + std::to_string(l.k2));
      if (l.stride < 1)
        out.push_back("node " + std::to_string(i) + ": stride must be positive");
      if (l.in_ch < 0 || l.out_ch < 0)
        out.push_back("node " + std::to_string(i) + ": negative channel count");
    }
  }

  if (arch.family == Family::cell_stack) {
    if (n > 7) out.push_back("node count " + std::to_string(n) + " > 7");
    if (g.edges.size() > 9)
      out.push_back("edge count " + std::to_string(g.edges.size()) + " > 9");
  }

  std::set<std::pair<int, int>> seen;
  std::vector<int> indeg(n, 0), outdeg(n, 0);
  for (const auto& [a, b] : g.edges) {
    if (a < 0 || a >= n || b < 0 || b >= n) {
      out.push_back("edge " + edge_str(a, b) + " references invalid node index");
      continue;
    }
    if (a == b) {
      out.push_back("edge " + edge_str(a, b) + " is a self-loop");
      continue;
    }
    if (a > b) {
      out.push_back("edge " + edge_str(a, b) + " not topologically ordered");
      continue;
    }
    if (!seen.insert({a, b}).second) {
      out.push_back("duplicate edge " + edge_str(a, b));
      continue;
    }
    ++outdeg[a];
    ++indeg[b];
  }
  for (int i = 0; i < n; ++i) {
    if (i != 0 && indeg[i] == 0)
      out.push_back("node " + std::to_string(i) + " has no incoming edge");
    if (i != n - 1 && outdeg[i] == 0)
      out.push_back("node " + std::to_string(i) + " has no outgoing edge");
  }
}

}  // namespace

ValidationReport validate_architecture(const Architecture& arch) {
  ValidationReport report;
  auto& out = report.diagnostics;

  if (arch.family == Family::cell_stack) {
    if (arch.stem_channels < 1) out.push_back("stem_channels must be positive");
    if (arch.num_stacks < 1) out.push_back("num_stacks must be positive");
    if (arch.cells_per_stack < 1) out.push_back("cells_per_stack must be positive");
  }
  if (arch.input_shape.c < 1 || arch.input_shape.h < 1 || arch.input_shape.w < 1)
    out.push_back("input_shape entries must be positive");
  if (arch.num_classes < 1) out.push_back("num_classes must be positive");

  validate_graph(arch, out);

  report.ok = out.empty();
  return report;
}

namespace {

void require_valid(const Architecture& arch) {
  const ValidationReport report = validate_architecture(arch);
  if (!report.ok) {
    std::string msg = "invalid architecture:";
    for (const auto& d : report.diagnostics) msg += "\n  - " + d;
    throw Error(Error::Kind::validation, msg);
  }
}

// Kahn renumbering: among ready nodes pick the smallest (label key, original
// index). Input is the unique source, so it is always emitted first; the
// output node is the unique sink and lands last.
std::vector<int> canonical_order(const CellGraph& g) {
  const int n = static_cast<int>(g.node_ops.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succs(n);
  for (const auto& [a, b] : g.edges) {
    ++indeg[b];
    succs[a].push_back(b);
  }
  std::vector<int> ready;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto best = ready.begin();
    for (auto it = std::next(ready.begin()); it != ready.end(); ++it) {
      const auto a = label_key(resolve_defaults(g.node_ops[*it]));
      const auto b = label_key(resolve_defaults(g.node_ops[*best]));
      if (std::tie(a, *it) < std::tie(b, *best)) best = it;
    }
    const int node = *best;
    ready.erase(best);
    order.push_back(node);
    for (int s : succs[node])
      if (--indeg[s] == 0) ready.push_back(s);
  }
  return order;  // size n for a DAG; validation guarantees acyclicity
}

json label_to_json(const OpLabel& raw) {
  const OpLabel l = resolve_defaults(raw);
  json node;
  node["kind"] = std::string(op_kind_name(l.kind));
  const bool pool = l.kind == OpKind::maxpool3x3 || l.kind == OpKind::avgpool;
  if (op_kind_is_conv(l.kind) || pool) {
    node["k"] = json::array({l.k1, l.k2});
    node["stride"] = l.stride;
    node["padding"] = json::array({l.pad_h, l.pad_w});
  }
  if (op_kind_is_conv(l.kind)) {
    if (l.in_ch > 0) node["in"] = l.in_ch;
    if (l.out_ch > 0) node["out"] = l.out_ch;
    if (l.kind == OpKind::identity_conv || l.kind == OpKind::branch_op) {
      if (l.has_bn) node["bn"] = true;
      if (l.act != Activation::none) node["act"] = std::string(activation_name(l.act));
    }
  }
  return node;
}

json arch_to_canonical_json(const Architecture& input) {
  const Architecture arch = canonicalize(input);
  json doc;
  doc["schema"] = std::string(kArchSchema);
  doc["family"] = arch.family == Family::cell_stack ? "cell-stack" : "generic-dag";
  if (arch.family == Family::cell_stack) {
    doc["stem_channels"] = arch.stem_channels;
    doc["num_stacks"] = arch.num_stacks;
    doc["cells_per_stack"] = arch.cells_per_stack;
  }
  doc["input_shape"] =
      json::array({arch.input_shape.c, arch.input_shape.h, arch.input_shape.w});
  doc["num_classes"] = arch.num_classes;
  json nodes = json::array();
  for (const OpLabel& l : arch.cell.node_ops) nodes.push_back(label_to_json(l));
  json edges = json::array();
  for (const auto& [a, b] : arch.cell.edges) edges.push_back(json::array({a, b}));
  doc["cell"] = json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
  return doc;
}

}  // namespace

std::vector<int> canonical_node_order(const CellGraph& graph) {
  return canonical_order(graph);
}

Architecture canonicalize(const Architecture& arch) {
  require_valid(arch);
  const std::vector<int> order = canonical_order(arch.cell);
  const int n = static_cast<int>(order.size());
  std::vector<int> new_index(n, 0);
  for (int pos = 0; pos < n; ++pos) new_index[order[pos]] = pos;

  Architecture out = arch;
  out.cell.node_ops.clear();
  out.cell.node_ops.reserve(n);
  for (int pos = 0; pos < n; ++pos)
    out.cell.node_ops.push_back(resolve_defaults(arch.cell.node_ops[order[pos]]));
  out.cell.edges.clear();
  out.cell.edges.reserve(arch.cell.edges.size());
  for (const auto& [a, b] : arch.cell.edges)
    out.cell.edges.emplace_back(new_index[a], new_index[b]);
  std::sort(out.cell.edges.begin(), out.cell.edges.end());
  if (out.family == Family::generic_dag) {
    out.stem_channels = 0;
    out.num_stacks = 0;
    out.cells_per_stack = 0;
  }
  return out;
}

std::string serialize_architecture(const Architecture& arch) {
  return arch_to_canonical_json(arch).dump();
}

namespace {

int require_positive_int(const json& doc, const char* field) {
  if (!doc.contains(field))
    throw Error(Error::Kind::schema, std::string("missing required field: ") + field);
  const json& v = doc.at(field);
  if (!v.is_number_integer())
    throw Error(Error::Kind::schema, std::string(field) + " must be an integer");
  const auto value = v.get<long long>();
  if (value < 1)
    throw Error(Error::Kind::schema, std::string(field) + " must be positive");
  return static_cast<int>(value);
}

std::pair<int, int> parse_int_pair(const json& v, const std::string& field) {
  if (v.is_number_integer()) {
    const int k = v.get<int>();
    return {k, k};
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number_integer() &&
      v[1].is_number_integer()) {
    return {v[0].get<int>(), v[1].get<int>()};
  }
  throw Error(Error::Kind::schema, field + " must be an integer or a pair of integers");
}

OpLabel parse_label(const json& node, int index) {
  const std::string ctx = "cell.nodes[" + std::to_string(index) + "]";
  if (!node.is_object())
    throw Error(Error::Kind::schema, ctx + " must be an object");
  if (!node.contains("kind"))
    throw Error(Error::Kind::schema, "missing required field: " + ctx + ".kind");
  if (!node.at("kind").is_string())
    throw Error(Error::Kind::schema, ctx + ".kind must be a string");
  OpLabel label;
  label.kind = op_kind_from_name(node.at("kind").get<std::string>());
  if (node.contains("k"))
    std::tie(label.k1, label.k2) = parse_int_pair(node.at("k"), ctx + ".k");
  if (node.contains("stride")) {
    if (!node.at("stride").is_number_integer())
      throw Error(Error::Kind::schema, ctx + ".stride must be an integer");
    label.stride = node.at("stride").get<int>();
  }
  if (node.contains("padding"))
    std::tie(label.pad_h, label.pad_w) = parse_int_pair(node.at("padding"), ctx + ".padding");
  if (node.contains("in")) {
    if (!node.at("in").is_number_integer())
      throw Error(Error::Kind::schema, ctx + ".in must be an integer");
    label.in_ch = node.at("in").get<int>();
  }
  if (node.contains("out")) {
    if (!node.at("out").is_number_integer())
      throw Error(Error::Kind::schema, ctx + ".out must be an integer");
    label.out_ch = node.at("out").get<int>();
  }
  if (node.contains("bn")) {
    if (!node.at("bn").is_boolean())
      throw Error(Error::Kind::schema, ctx + ".bn must be a boolean");
    label.has_bn = node.at("bn").get<bool>();
  }
  if (node.contains("act")) {
    if (!node.at("act").is_string())
      throw Error(Error::Kind::schema, ctx + ".act must be a string");
    label.act = activation_from_name(node.at("act").get<std::string>());
  }
  return resolve_defaults(label);
}

}  // namespace

Architecture parse_architecture(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Error::Kind::schema, std::string("document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object())
    throw Error(Error::Kind::schema, "document must be a JSON object");
  if (!doc.contains("schema"))
    throw Error(Error::Kind::schema, "missing required field: schema");
  if (!doc.at("schema").is_string() || doc.at("schema").get<std::string>() != kArchSchema)
    throw Error(Error::Kind::schema,
                "schema must be \"" + std::string(kArchSchema) + "\"");

  Architecture arch;
  if (!doc.contains("family"))
    throw Error(Error::Kind::schema, "missing required field: family");
  const std::string family = doc.at("family").is_string()
                                 ? doc.at("family").get<std::string>()
                                 : throw Error(Error::Kind::schema, "family must be a string");
  if (family == "cell-stack") {
    arch.family = Family::cell_stack;
  } else if (family == "generic-dag") {
    arch.family = Family::generic_dag;
  } else {
    throw Error(Error::Kind::schema, "family must be \"cell-stack\" or \"generic-dag\"");
  }

  if (arch.family == Family::cell_stack) {
    arch.stem_channels = require_positive_int(doc, "stem_channels");
    arch.num_stacks = require_positive_int(doc, "num_stacks");
    arch.cells_per_stack = require_positive_int(doc, "cells_per_stack");
  }

  if (!doc.contains("input_shape"))
    throw Error(Error::Kind::schema, "missing required field: input_shape");
  const json& shape = doc.at("input_shape");
  if (!shape.is_array() || shape.size() != 3 || !shape[0].is_number_integer() ||
      !shape[1].is_number_integer() || !shape[2].is_number_integer())
    throw Error(Error::Kind::schema, "input_shape must be [channels, height, width]");
  arch.input_shape = Shape{shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>()};
  if (arch.input_shape.c < 1 || arch.input_shape.h < 1 || arch.input_shape.w < 1)
    throw Error(Error::Kind::schema, "input_shape entries must be positive");

  arch.num_classes = require_positive_int(doc, "num_classes");

  if (!doc.contains("cell"))
    throw Error(Error::Kind::schema, "missing required field: cell");
  const json& cell = doc.at("cell");
  if (!cell.is_object() || !cell.contains("nodes") || !cell.contains("edges"))
    throw Error(Error::Kind::schema, "cell must be an object with nodes and edges");
  if (!cell.at("nodes").is_array())
    throw Error(Error::Kind::schema, "cell.nodes must be an array");
  int index = 0;
  for (const json& node : cell.at("nodes"))
    arch.cell.node_ops.push_back(parse_label(node, index++));
  if (!cell.at("edges").is_array())
    throw Error(Error::Kind::schema, "cell.edges must be an array");
  for (const json& e : cell.at("edges")) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
        !e[1].is_number_integer())
      throw Error(Error::Kind::schema, "cell.edges entries must be [source, target]");
    arch.cell.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }

  require_valid(arch);
  return canonicalize(arch);
}

std::string ArchHash::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

ArchHash ArchHash::from_hex(std::string_view hex) {
  if (hex.size() != 64)
    throw Error(Error::Kind::schema, "hash must be 64 hex characters");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(Error::Kind::schema, "hash contains a non-hex character");
  };
  ArchHash h;
  for (std::size_t i = 0; i < 32; ++i)
    h.bytes[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  return h;
}

std::size_t ArchHashHasher::operator()(const ArchHash& h) const {
  std::size_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | h.bytes[i];
  return v;
}

ArchHash canonical_hash(const Architecture& arch) {
  const std::string doc = serialize_architecture(arch);
  ArchHash h;
  unsigned int len = 0;
  if (EVP_Digest(doc.data(), doc.size(), h.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != h.bytes.size())
    throw Error(Error::Kind::io, "SHA-256 digest failed");
  return h;
}

void enumerate_space(const EnumerationConstraints& constraints,
                     const std::function<bool(const Architecture&)>& emit) {
  if (constraints.max_nodes < 2)
    throw Error(Error::Kind::validation, "enumeration needs max_nodes >= 2");
  if (constraints.allowed_ops.empty() && constraints.max_nodes > 2)
    throw Error(Error::Kind::validation, "enumeration needs at least one allowed op");
  for (OpKind kind : constraints.allowed_ops)
    if (!op_kind_is_interior(kind))
      throw Error(Error::Kind::validation, "allowed op kinds must be interior operations");

  std::map<std::string, Architecture> unique;  // canonical doc -> value

  Architecture proto;
  proto.family = Family::cell_stack;
  proto.stem_channels = constraints.stem_channels;
  proto.num_stacks = constraints.num_stacks;
  proto.cells_per_stack = constraints.cells_per_stack;
  proto.input_shape = constraints.input_shape;
  proto.num_classes = constraints.num_classes;

  for (int n = 2; n <= constraints.max_nodes; ++n) {
    const int interior = n - 2;
    std::vector<std::pair<int, int>> all_edges;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) all_edges.emplace_back(a, b);
    const std::size_t edge_count = all_edges.size();

    std::vector<std::size_t> op_choice(interior, 0);
    const std::size_t op_kinds =
        interior == 0 ? 1 : constraints.allowed_ops.size();
    bool ops_done = false;
    while (!ops_done) {
      Architecture arch = proto;
      arch.cell.node_ops.assign(1, OpLabel{OpKind::input});
      for (int i = 0; i < interior; ++i)
        arch.cell.node_ops.push_back(
            resolve_defaults(OpLabel{constraints.allowed_ops[op_choice[i]]}));
      arch.cell.node_ops.push_back(OpLabel{OpKind::output});

      for (std::uint64_t mask = 0; mask < (1ULL << edge_count); ++mask) {
        if (std::popcount(mask) > constraints.max_edges) continue;
        arch.cell.edges.clear();
        for (std::size_t e = 0; e < edge_count; ++e)
          if (mask & (1ULL << e)) arch.cell.edges.push_back(all_edges[e]);
        if (!validate_architecture(arch).ok) continue;
        const std::string doc = serialize_architecture(arch);
        if (!unique.contains(doc)) unique.emplace(doc, canonicalize(arch));
      }

      ops_done = true;
      for (int i = 0; i < interior; ++i) {
        if (++op_choice[i] < op_kinds) {
          ops_done = false;
          break;
        }
        op_choice[i] = 0;
      }
      if (interior == 0) break;
    }
  }

  for (const auto& [doc, arch] : unique)
    if (!emit(arch)) return;
}

std::vector<Architecture> enumerate_space(const EnumerationConstraints& constraints) {
  std::vector<Architecture> out;
  enumerate_space(constraints, [&](const Architecture& a) {
    out.push_back(a);
    return true;
  });
  return out;
}

}  // namespace obfunas
