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

#ifndef OBFUNAS_ERROR_HPP_
#define OBFUNAS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace obfunas {

/// Single exception type for all domain errors; the kind tells callers
/// (and the CLI) which subsystem rejected the request.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    schema,      // malformed document
    validation,  // architecture invariant violated
    shape,       // tensor / shape-inference mismatch
    transform,   // obfuscation strategy precondition failed
    oracle,      // accuracy source failure (unknown architecture, bad table)
    search,      // infeasible search, budget exceeded
    io,          // file system
  };

  Error(Kind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace obfunas

#endif  // OBFUNAS_ERROR_HPP_
