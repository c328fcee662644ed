// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "stripe/analysis.h"
#include "stripe/diag.h"
#include "stripe/hwconfig.h"
#include "stripe/ir.h"

namespace stripe {

struct PassError : std::runtime_error {
  PassError(std::string code_in, const std::string& message)
      : std::runtime_error(message), code(std::move(code_in)) {}
  std::string code;
};

struct TileShape {
  std::map<std::string, std::int64_t> tiles;  // index name -> tile size
  bool interleaved = false;

  std::string to_string() const;
};

// Exact nonnegative rational for cost comparison.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  bool operator<(const Rational& rhs) const { return num * rhs.den < rhs.num * den; }
  bool operator==(const Rational& rhs) const { return num * rhs.den == rhs.num * den; }
  std::string to_string() const;
};

struct TileCostReport {
  std::int64_t lines_total = 0;
  std::int64_t useful_ops = 0;
  std::int64_t tile_elements = 0;
  std::optional<std::string> excluded;

  Rational cost() const { return Rational{lines_total, useful_ops}; }
  std::string to_string() const;
};

// Splits each tiled index into an outer quotient index and an inner index of
// the tile size; constraints are pushed into the inner block through alias
// bindings, uneven divisions get an overflow constraint, and refinement
// windows are recomputed (halo widens input sizes). Refinements tagged
// `untiled` keep their full extent by construction when their indexes are
// not tiled.
Block tile_rewrite(const Block& block, const TileShape& ts);

// Cache-line cost of one tiling: lines_total sums distinct lines touched per
// tile over all tiles (overflow elements included), useful_ops counts the
// constraint-satisfying iteration points, and the memory cap excludes
// candidates whose per-tile elements (minus `untiled`-tagged refinements)
// exceed mem_cap.
TileCostReport tile_cost(const Block& block, const TileShape& ts, const CacheModel& cm,
                         std::int64_t mem_cap,
                         std::optional<std::int64_t> useful_ops_hint = std::nullopt);

struct AutotileOptions {
  std::int64_t mem_cap = 0;
  bool power_of_two = false;
  bool divisors_only = true;
  std::optional<TileShape> pinned;  // skip the search, apply this shape
};

struct AutotileResult {
  Block block;
  std::optional<TileShape> chosen;
  TileCostReport report;
  std::int64_t candidates = 0;
  std::int64_t excluded = 0;
  std::vector<Diagnostic> diags;
};

// Exhaustive search over divisor (or power-of-two) tile vectors; minimum cost
// wins with lexicographically-smallest tie-break over the index declaration
// order. If every candidate is excluded the block is returned unchanged with
// a warning.
AutotileResult autotile(const Block& block, const CacheModel& cm, const AutotileOptions& opts);

struct Refusal {
  std::string reason;
};

// Merges statements i and j (both blocks) of the parent into one block over
// their shared outer indexes, running the residual blocks serially per point.
std::variant<Block, Refusal> fuse(const Block& parent, std::size_t i, std::size_t j);

// Removes store/load round-trips through single-iteration local buffers.
Block scalarize(const Block& block, const std::set<std::string>& parent_buffers = {});

// Moves local buffers referenced by exactly one child block into that child,
// shrinking them to the per-iteration footprint; applied only when the
// per-iteration windows are pairwise disjoint.
Block localize(const Block& block, const std::set<std::string>& parent_buffers = {});

// Tiles the block so the inner shape matches the first realizable stencil
// and tags the inner block; returns the block unchanged when nothing fits.
Block stencil_match(const Block& block, const std::vector<StencilSpec>& specs);

// Splits `index` across n banks of unit_name: outputs must partition
// disjointly along that index (a reduction index is NotPartitionable).
Block partition(const Block& block, const std::string& index, std::int64_t n,
                const std::string& unit_name);

// Reorders statements to a deterministic topological order that keeps
// consumers adjacent to producers, then first-fit assigns unplaced child
// refinements into the memory unit over their live ranges.
Block schedule(const Block& block, const HardwareConfig& hw, const std::string& unit = "",
               std::vector<Diagnostic>* diags = nullptr);

// Splits a constrained block into a constraint-free interior plus boundary
// strips that keep the original constraints; the returned pieces partition
// the original iteration points and replace the block in its parent.
std::vector<Block> separate_boundary(const Block& block);

// Recomputes a local buffer's strides dense in the given dimension order and
// re-strides every window of that buffer in the subtree.
Block transpose_layout(const Block& block, const std::string& buffer,
                       const std::vector<std::size_t>& order,
                       const std::set<std::string>& parent_buffers = {});

struct PipelineResult {
  Program program;
  std::vector<std::string> reports;  // "pass=<name> key=value ..." lines
  std::vector<Diagnostic> diags;
  bool ok = true;
};

// Folds the passes in order; validate_static must be clean after every pass
// or the pipeline aborts with PassFailed diagnostics.
PipelineResult apply_pipeline(const Program& program, const Pipeline& pipeline,
                              const HardwareConfig& hw);

// Parses "x:3,y:4" (or "x=3,y=4") into a tile shape.
TileShape parse_tile_shape(const std::string& text);

}  // namespace stripe
