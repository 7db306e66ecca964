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

#ifndef OBFUNAS_ORACLE_HPP_
#define OBFUNAS_ORACLE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_map>
#include <vector>

#include "obfunas/arch.hpp"

namespace obfunas {

/// Structural features the synthetic oracle scores: depth is the longest
/// path through the executable graph, width_sum the total conv output
/// channels, the counts are per executable op class, log_flops is
/// log1p(total FLOPs).
struct ArchFeatures {
  int depth = 0;
  int width_sum = 0;
  int conv_count = 0;
  int maxpool_count = 0;
  int avgpool_count = 0;
  int sum_count = 0;
  int concat_count = 0;
  int node_count = 0;
  int edge_count = 0;
  double log_flops = 0.0;
};

ArchFeatures architecture_features(const Architecture& arch);

/// Source of validation accuracy for an architecture. Either an exact lookup
/// table keyed by canonical hash, or a seeded analytic function of the
/// architecture's structural features (a sigmoid of a random linear form,
/// smooth and bounded in [0,1]).
class FitnessOracle {
 public:
  static FitnessOracle table(std::unordered_map<ArchHash, double, ArchHashHasher> rows);
  static FitnessOracle synthetic(std::uint64_t seed);

  /// Accuracy in [0,1]; table misses throw Error(oracle).
  double query(const Architecture& arch) const;

  /// Accuracy without throwing; nullopt on a table miss. The search treats
  /// misses as infeasible candidates.
  std::optional<double> try_query(const Architecture& arch) const;

  /// F = -accuracy: higher fitness means a worse model for the attacker.
  double fitness(const Architecture& arch) const { return -query(arch); }

  bool is_table() const { return is_table_; }

 private:
  FitnessOracle() = default;

  bool is_table_ = false;
  std::unordered_map<ArchHash, double, ArchHashHasher> rows_;
  double bias_ = 0.0;
  std::vector<double> coeffs_;
};

/// Reads a UTF-8 CSV with header `hash,accuracy` (hash hex-encoded, accuracy
/// in [0,1]). Malformed rows are reported with their line number; duplicate
/// hashes and out-of-range accuracies are rejected.
FitnessOracle load_accuracy_table(const std::filesystem::path& path);

/// Writes the table CSV for a set of architectures (used by `gen-table`).
void write_accuracy_table(const std::vector<Architecture>& archs,
                          const FitnessOracle& oracle,
                          const std::filesystem::path& path);

}  // namespace obfunas

#endif  // OBFUNAS_ORACLE_HPP_
