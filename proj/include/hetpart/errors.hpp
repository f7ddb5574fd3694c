// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_ERRORS_HPP_
#define HETPART_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace hetpart {

// Common base so the CLI can map failures onto its exit-code contract:
//   2  malformed input, schema violation, bad configuration
//   3  partitioning infeasible under the given capacities
//   4  training diverged
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or self-inconsistent input documents.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Valid documents whose contents are unusable (missing files, missing cost
// entries, out-of-range settings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A required device class or precision is absent from the profile set.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Structural problems in a compute graph (cycles, dangling edges, bad dims).
class GraphError : public Error {
 public:
  using Error::Error;
};

// Matrix shape mismatches.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Guardrails (e.g. graph size limits) tripped.
class LimitError : public Error {
 public:
  using Error::Error;
};

// No assignment satisfies the resource capacities. Carries the first node
// that cannot be placed anywhere, when a single culprit exists.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what, int node_id = -1)
      : Error(what), node_id_(node_id) {}
  int node_id() const { return node_id_; }

 private:
  int node_id_;
};

// Training failed to produce finite losses for too long.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace hetpart

#endif  // HETPART_ERRORS_HPP_
