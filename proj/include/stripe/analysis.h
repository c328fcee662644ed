// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "stripe/interp.h"
#include "stripe/ir.h"

namespace stripe {

struct CacheModel {
  std::int64_t line = 1;      // elements per cache line
  std::int64_t capacity = 1;  // elements
};

struct FootprintDim {
  std::int64_t lo = 0;    // min offset
  std::int64_t hi = 0;    // max offset (inclusive)
  std::int64_t step = 0;  // gcd of offset coefficients, 0 for a constant
  std::int64_t size = 1;  // window extent at each offset
};

// Region of parent-buffer elements reachable by a refinement across the
// iteration points of its block; box mode overapproximates (ranges only),
// exact mode enumerates constraint-satisfying points.
struct Footprint {
  std::string buffer;
  std::vector<FootprintDim> dims;
  std::int64_t count = 0;  // exact element count, or box volume
  bool exact = false;
  std::set<std::vector<std::int64_t>> elems;  // populated in exact mode

  std::int64_t region_begin(std::size_t d) const { return dims[d].lo; }
  std::int64_t region_end(std::size_t d) const { return dims[d].hi + dims[d].size; }
};

struct DifferentBuffers : std::runtime_error {
  DifferentBuffers() : std::runtime_error("footprints refer to different buffers") {}
};

Footprint footprint(const Refinement& ref, const Block& block, bool exact = false,
                    const IndexEnv& parent_env = {});

// Box test: per-dimension intervals all intersect; exact footprints intersect
// their enumerated element sets instead.
bool regions_overlap(const Footprint& a, const Footprint& b);

// Distinct values of floor((base_offset + sum(stride * coord)) / line) over
// all elements of the footprint; buffer bases are assumed line-aligned.
std::int64_t count_cache_lines(const Footprint& fp, const std::vector<std::int64_t>& strides,
                               const CacheModel& cm, std::int64_t base_offset = 0);

struct DepEdge {
  enum class Kind { True, Anti, Output };
  int from = 0;
  int to = 0;
  std::string buffer;  // buffer or $temp name
  Kind kind = Kind::True;
};

struct DependencyDag {
  int num_stmts = 0;
  std::vector<DepEdge> edges;

  bool has_edge(int from, int to) const;
  std::string to_dot() const;
};

// Edge (s, t) exists iff s precedes t serially and the statements conflict
// (write-read, read-write or write-write) on an overlapping region or temp.
// Regions are compared at a shared iteration point, so the DAG justifies
// reordering the statement list, not merging iterations.
DependencyDag build_dependency_dag(const Block& block);

}  // namespace stripe
