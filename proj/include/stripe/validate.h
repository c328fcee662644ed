// Copyright 2026, Stripe Kit authors.
#pragma once

#include <vector>

#include "stripe/diag.h"
#include "stripe/ir.h"

namespace stripe {

// Static legality: scoping (parent indexes must be explicitly aliased),
// aggregation on writable refinements, direction and dtype consistency along
// refinement chains, and access containment. Containment is conservative:
// a program with no errors never triggers a dynamic out-of-bounds access.
std::vector<Diagnostic> validate_static(const Program& program);

// Bounds an affine expression over an integer box intersected with affine
// constraints (each interpreted as expr >= 0). The box maps symbol names to
// inclusive [lo, hi] ranges. Results are conservative: the true range of the
// expression is always contained in the returned interval.
struct BoundBox {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> ranges;
};
std::pair<std::int64_t, std::int64_t> bound_affine(const Affine& expr, const BoundBox& box,
                                                   const std::vector<Affine>& constraints);

}  // namespace stripe
