// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stripe/ir.h"

namespace stripe {

// An exact inner-block shape required by a specialized compute unit; matched
// blocks are tagged for lowering.
struct StencilSpec {
  std::string name;
  std::vector<std::int64_t> out_sizes;  // matched to output indexes in order
  std::int64_t reduction_size = 1;
  DType dtype = DType::i8;
  std::string tag;

  bool operator==(const StencilSpec&) const = default;
};

struct MemUnit {
  std::string name;
  std::int64_t capacity = 0;  // elements
  std::int64_t line = 1;      // elements
  std::int64_t banks = 1;

  bool operator==(const MemUnit&) const = default;
};

struct ComputeUnit {
  std::string name;
  std::int64_t count = 1;
  std::optional<StencilSpec> stencil;

  bool operator==(const ComputeUnit&) const = default;
};

struct HardwareConfig {
  std::vector<MemUnit> mem_units;      // sorted by name
  std::vector<ComputeUnit> compute_units;

  const MemUnit* find_mem(const std::string& name) const;
  const ComputeUnit* find_compute(const std::string& name) const;

  bool operator==(const HardwareConfig&) const = default;
};

// One parameterized pass invocation.
struct PassConfig {
  std::string name;
  std::map<std::string, std::string> params;

  std::string param(const std::string& key, const std::string& fallback = "") const;
  std::int64_t param_int(const std::string& key, std::int64_t fallback) const;

  bool operator==(const PassConfig&) const = default;
};

struct Pipeline {
  std::vector<PassConfig> passes;

  bool operator==(const Pipeline&) const = default;
};

struct ConfigError : std::runtime_error {
  ConfigError(std::string code_in, const std::string& message)
      : std::runtime_error(message), code(std::move(code_in)) {}
  std::string code;  // ConfigSyntax, UnknownPass, UnknownUnit
};

// Line-oriented config format:
//   mem <name> cap=<n> line=<n> banks=<n>
//   unit <name> count=<n> stencil=<m>x<n>x<k> tag=<t>
//   pass <name> key=value ...
std::pair<HardwareConfig, Pipeline> load_config(const std::string& text);
std::string print_config(const HardwareConfig& hw, const Pipeline& pipeline);

}  // namespace stripe
