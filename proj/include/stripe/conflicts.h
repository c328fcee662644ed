// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stripe/interp.h"
#include "stripe/ir.h"

namespace stripe {

// One violation of the parallel-block dependency rules: either a buffer
// element written in one iteration and read in a different iteration of the
// same block, or an assign-aggregated element written by several iterations.
struct Conflict {
  enum class Kind { ReadWrite, AssignConflict };
  Kind kind = Kind::ReadWrite;
  std::string block_path;  // dot path of statement indices from the root
  std::string buffer;
  std::int64_t element = 0;
  std::int64_t writers = 0;     // distinct writer iterations (AssignConflict)
  std::int64_t iter_write = 0;  // witness iterations (ReadWrite)
  std::int64_t iter_read = 0;

  std::string to_string() const;
};

struct ConflictReport {
  std::vector<Conflict> conflicts;  // sorted per block by (buffer, element)
  std::int64_t total = 0;           // includes conflicts beyond the list cap

  bool empty() const { return total == 0; }
};

// Executes the program in instrumented mode on the given inputs (missing
// output buffers are created as for a normal run). An empty report means the
// program is a legal nested parallel polyhedral structure on these inputs.
ConflictReport check_parallel_semantics(const Program& program, const BufferStore& inputs);

}  // namespace stripe
