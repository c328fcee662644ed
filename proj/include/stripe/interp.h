// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stripe/ir.h"

namespace stripe {

struct Buffer {
  DType dtype = DType::i32;
  std::vector<std::int64_t> data;  // values always wrapped to dtype
};

// Flat integer tensors addressed as sum(stride * coord) + base.
using BufferStore = std::map<std::string, Buffer>;

struct ExecError : std::runtime_error {
  ExecError(std::string code_in, const std::string& message)
      : std::runtime_error(message), code(std::move(code_in)) {}
  std::string code;
};

// One iteration point: ranged index values plus evaluated aliases.
using IterationPoint = IndexEnv;

// Lexicographic order over ranged indexes in declaration order; points that
// fail any constraint are skipped; aliases are evaluated from parent_env.
std::vector<IterationPoint> enumerate_points(const Block& block, const IndexEnv& parent_env = {});

// One hop of a refinement chain, leaf first: the refinement at `depth` that
// the access passed through.
struct AccessHop {
  int depth = 0;
  const Refinement* refinement = nullptr;
};

// Execution instrumentation; every callback fires between statements of a
// serial program, so implementations need no synchronization.
class ExecObserver {
 public:
  virtual ~ExecObserver() = default;
  virtual void block_enter(const Block* block, int depth, int stmt_index) {
    (void)block, (void)depth, (void)stmt_index;
  }
  virtual void block_exit(const Block* block, int depth) { (void)block, (void)depth; }
  virtual void iteration(int depth, std::int64_t ordinal) { (void)depth, (void)ordinal; }
  virtual void access(bool is_write, const Buffer* buffer, std::int64_t addr,
                      const std::vector<AccessHop>& chain) {
    (void)is_write, (void)buffer, (void)addr, (void)chain;
  }
};

enum class IterOrder { Lex, Reversed, Shuffled };

struct ExecOptions {
  IterOrder order = IterOrder::Lex;
  std::uint64_t seed = 0;  // for Shuffled
  ExecObserver* observer = nullptr;
};

// Reference semantics: iterates points serially, runs statement lists in
// order, applies aggregation on stores. The store is updated in place.
void execute(const Program& program, BufferStore* store, const ExecOptions& opts = {});

// Allocates store buffers for a program: inputs must already be present;
// missing out/inout buffers are created filled with the aggregation identity
// (0 for assign/add, dtype min/max for max/min, 1 for mul).
void prepare_outputs(const Program& program, BufferStore* store);

}  // namespace stripe
