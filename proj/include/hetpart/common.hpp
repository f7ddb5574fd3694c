// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_COMMON_HPP_
#define HETPART_COMMON_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "hetpart/errors.hpp"

namespace hetpart {

inline constexpr std::string_view kVersion = "1.0.0";

// Schema version stamped into every JSON document we read or write.
inline constexpr int kSchemaVersion = 1;

// The three device classes of the target platform: a host CPU (PS), the
// programmable logic fabric (PL) and the AI-engine array (AIE). PS is kept
// for FP32 baselines; the partitioner only places work on PL and AIE.
enum class Device { PS, PL, AIE };

enum class Precision { FP32, FP16, BF16 };

enum class Algorithm { DQN, DDPG };

inline std::string_view to_string(Device d) {
  switch (d) {
    case Device::PS:  return "PS";
    case Device::PL:  return "PL";
    case Device::AIE: return "AIE";
  }
  return "?";
}

inline std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::FP32: return "fp32";
    case Precision::FP16: return "fp16";
    case Precision::BF16: return "bf16";
  }
  return "?";
}

inline std::string_view to_string(Algorithm a) {
  return a == Algorithm::DQN ? "dqn" : "ddpg";
}

inline Device device_from_string(std::string_view s) {
  if (s == "PS") return Device::PS;
  if (s == "PL") return Device::PL;
  if (s == "AIE") return Device::AIE;
  throw SchemaError("unknown device name '" + std::string(s) + "' (expected PS, PL or AIE)");
}

inline Precision precision_from_string(std::string_view s) {
  if (s == "fp32") return Precision::FP32;
  if (s == "fp16") return Precision::FP16;
  if (s == "bf16") return Precision::BF16;
  throw SchemaError("unknown precision '" + std::string(s) + "' (expected fp32, fp16 or bf16)");
}

inline Algorithm algorithm_from_string(std::string_view s) {
  if (s == "dqn") return Algorithm::DQN;
  if (s == "ddpg") return Algorithm::DDPG;
  throw SchemaError("unknown algorithm '" + std::string(s) + "' (expected dqn or ddpg)");
}

// Storage cost of one parameter at a given precision, in bytes.
inline int bytes_per_element(Precision p) {
  return p == Precision::FP32 ? 4 : 2;
}

}  // namespace hetpart

#endif  // HETPART_COMMON_HPP_
