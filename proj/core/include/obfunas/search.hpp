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

#ifndef OBFUNAS_SEARCH_HPP_
#define OBFUNAS_SEARCH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "obfunas/flops.hpp"
#include "obfunas/oracle.hpp"
#include "obfunas/rng.hpp"
#include "obfunas/transforms.hpp"

namespace obfunas {

/// Hyperparameters of the FLOPs-constrained evolutionary search. The bound
/// tau is strict (a mask is feasible iff FLOPs(mask) < tau) and is given
/// either absolutely or as a multiplier of the victim's FLOPs.
struct SearchConfig {
  int population_size = 32;
  int cycles = 2000;
  int tournament_size = 4;
  std::uint64_t seed = 0;
  double tau_absolute = 0.0;    // used when > 0
  double tau_multiplier = 0.0;  // used when > 0 and tau_absolute == 0
  std::vector<StrategyKind> strategy_set;  // empty = all strategies
  int max_plan_length = 8;
  /// Debug mode: run check_function_preserving on every evaluated mask.
  bool verify_preservation = false;
};

struct HistoryRow {
  int cycle = 0;
  double best_fitness = 0.0;
  long evaluations = 0;
  double feasible_fraction = 0.0;
};

/// Audit trail of a search run. history is monotone non-decreasing in best
/// fitness; the reported mask always satisfies FLOPs < tau strictly.
struct SearchReport {
  ObfuscationPlan best_plan;
  ArchHash best_arch_hash;
  double best_fitness = 0.0;
  double victim_accuracy = 0.0;
  double mask_accuracy = 0.0;
  FlopsCount flops_victim;
  FlopsCount flops_mask;
  double tau = 0.0;  // effective absolute bound
  std::uint64_t seed = 0;
  std::vector<HistoryRow> history;

  std::string to_json() const;
  /// `cycle,best_fitness,evaluations,feasible_fraction` rows.
  std::string history_csv() const;
};

/// Uniformly samples an enabled strategy kind, then a valid target and
/// parameters for it on the given state; rejection-samples up to a bound and
/// throws Error(search) when the state admits no valid application.
StrategyApplication random_application(const Model& state,
                                       const std::vector<StrategyKind>& kinds,
                                       Rng& rng);

/// One of {append a random application, delete one, resample the parameters
/// of one}, chosen uniformly among the moves available; invalid mutants are
/// rejection-resampled up to a bound, after which the parent is returned.
ObfuscationPlan mutate(const ObfuscationPlan& plan, const Model& victim,
                       const std::vector<StrategyKind>& kinds,
                       int max_plan_length, Rng& rng);

/// Regularized evolution: aging population, tournament parent selection,
/// mutation only. Deterministic given (victim, oracle, config). Throws
/// Error(search) when no feasible plan can be seeded.
SearchReport evolve(const Model& victim, const FitnessOracle& oracle,
                    const SearchConfig& config);

/// Exhaustively enumerates plans up to max_plan_length, deduplicates masks by
/// canonical hash, and returns the true constrained optimum. Throws
/// Error(search) when the state count exceeds `budget`.
SearchReport brute_force_search(const Model& victim, const FitnessOracle& oracle,
                                double tau,
                                const std::vector<StrategyKind>& strategy_set,
                                int max_plan_length, long budget = 200000);

/// Number of reachable masks (including the victim when feasible) under the
/// same enumeration brute_force_search performs.
long count_reachable_masks(const Model& victim, double tau,
                           const std::vector<StrategyKind>& strategy_set,
                           int max_plan_length, long budget = 200000);

}  // namespace obfunas

#endif  // OBFUNAS_SEARCH_HPP_
