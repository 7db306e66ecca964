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

#include "obfunas/flops.hpp"

#include <cstdio>

namespace obfunas {

std::string FlopsCount::mflops_str() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", mflops());
  return buf;
}

FlopsCount flops_of_op(const NetNode& node) {
  if (node.kind != NodeKind::conv) return FlopsCount{0};
  const auto spatial = static_cast<std::uint64_t>(node.out_shape.h) * node.out_shape.w;
  std::uint64_t value = 2ull * node.conv.k1 * node.conv.k2 * node.conv.in_ch *
                        node.conv.out_ch * spatial;
  if (!node.conv.bias.empty())
    value += static_cast<std::uint64_t>(node.conv.out_ch) * spatial;
  return FlopsCount{value};
}

FlopsCount flops_of_network(const ConcreteNetwork& net) {
  std::uint64_t total = 0;
  for (NodeId id : net.order) total += flops_of_op(net.node(id)).value;
  return FlopsCount{total};
}

FlopsCount flops_of_arch(const Architecture& arch) {
  // cost depends only on shapes, so any instantiation seed works
  return flops_of_network(build_network(arch, WeightInit::centered_uniform, 0));
}

}  // namespace obfunas
