// Copyright 2026, Stripe Kit authors.
#include "stripe/validate.h"

#include <limits>
#include <numeric>
#include <sstream>

namespace stripe {

std::string Diagnostic::render(const std::string& file) const {
  std::ostringstream os;
  os << (severity == Severity::Error ? "error" : "warning") << " " << code << " " << file << ":"
     << span.line << ":" << span.column << " " << message;
  return os.str();
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& diag : diags) {
    if (diag.severity == Diagnostic::Severity::Error) return true;
  }
  return false;
}

namespace {

using Int = __int128;

std::int64_t clamp128(Int v) {
  constexpr std::int64_t lo = std::numeric_limits<std::int64_t>::min();
  constexpr std::int64_t hi = std::numeric_limits<std::int64_t>::max();
  if (v < Int(lo)) return lo;
  if (v > Int(hi)) return hi;
  return static_cast<std::int64_t>(v);
}

Int floor_div(Int a, Int b) {
  Int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) q--;
  return q;
}

Int ceil_div(Int a, Int b) { return -floor_div(-a, b); }

// Affine with __int128 coefficients, used only inside the bound search where
// rational constraint multipliers can grow intermediate values.
struct WideAffine {
  std::map<std::string, Int> terms;
  Int constant = 0;

  static WideAffine from(const Affine& expr) {
    WideAffine wide;
    wide.constant = expr.constant();
    for (const auto& [name, coeff] : expr.terms()) {
      wide.terms[name] = coeff;
    }
    return wide;
  }
};

Int eval_extreme(const WideAffine& expr, const BoundBox& box, bool maximize) {
  Int total = expr.constant;
  for (const auto& [name, coeff] : expr.terms) {
    auto it = box.ranges.find(name);
    Int lo = 0, hi = 0;
    if (it != box.ranges.end()) {
      lo = it->second.first;
      hi = it->second.second;
    }
    total += coeff * ((coeff > 0) == maximize ? hi : lo);
  }
  return total;
}

// One direction of the bound: min over nonnegative (for ub) constraint
// multipliers of the box extreme of expr + lambda * g. Candidates are the
// rationals that cancel one shared variable; each round applies the single
// best candidate (steepest descent), so the search cannot trap itself behind
// a weaker first improvement, and every intermediate is a valid bound.
Int bound_one_side(const Affine& expr, const BoundBox& box, const std::vector<Affine>& constraints,
                   bool maximize) {
  WideAffine cur = WideAffine::from(expr);
  Int denom = 1;
  auto score = [&](const WideAffine& w, Int d) {
    Int extreme = eval_extreme(w, box, maximize);
    return maximize ? floor_div(extreme, d) : ceil_div(extreme, d);
  };
  Int best = score(cur, denom);
  for (int round = 0; round < 8; round++) {
    WideAffine round_best_expr;
    Int round_best_denom = 1;
    bool improved = false;
    for (const auto& g : constraints) {
      for (const auto& [name, gcoeff] : g.terms()) {
        auto it = cur.terms.find(name);
        if (it == cur.terms.end() || it->second == 0) continue;
        // lambda = a/b with b*cur + a*denom*g cancelling `name`.
        Int a = -it->second;
        Int b = denom * gcoeff;
        if (b < 0) {
          a = -a;
          b = -b;
        }
        if (maximize ? a < 0 : a > 0) continue;  // ub needs lambda >= 0, lb <= 0
        if (a == 0) continue;
        WideAffine next;
        next.constant = b * cur.constant + a * denom * g.constant();
        for (const auto& [tname, tcoeff] : cur.terms) {
          next.terms[tname] = b * tcoeff;
        }
        for (const auto& [tname, tcoeff] : g.terms()) {
          next.terms[tname] += a * denom * tcoeff;
        }
        std::erase_if(next.terms, [](const auto& kv) { return kv.second == 0; });
        Int next_denom = b * denom;
        Int candidate = score(next, next_denom);
        if (maximize ? candidate < best : candidate > best) {
          best = candidate;
          round_best_expr = std::move(next);
          round_best_denom = next_denom;
          improved = true;
        }
      }
    }
    if (!improved) break;
    cur = std::move(round_best_expr);
    denom = round_best_denom;
  }
  return best;
}

}  // namespace

std::pair<std::int64_t, std::int64_t> bound_affine(const Affine& expr, const BoundBox& box,
                                                   const std::vector<Affine>& constraints) {
  Int lo = bound_one_side(expr, box, constraints, false);
  Int hi = bound_one_side(expr, box, constraints, true);
  return {clamp128(lo), clamp128(hi)};
}

namespace {

// Either a window into an outer buffer or a locally allocated buffer; carries
// the composed flat base expressed over path-unique symbols.
struct ChainEntry {
  const Refinement* decl = nullptr;
  Affine flat_base;          // over global symbols
  std::int64_t elements = 0;  // of the underlying buffer
  std::string root_name;
};

constexpr std::int64_t kUnboundedSpan = std::numeric_limits<std::int64_t>::max() / 4;

// Per-dimension extent the subtree can address through a refinement: the box
// span of each referencing child window plus that child's own span, or the
// window size for direct leaf uses. Halo and overflow windows are exactly as
// wide as this span; anything wider cannot ever be reached.
std::vector<std::int64_t> justified_span(const Block& owner, const Refinement& ref) {
  std::vector<std::int64_t> span(ref.rank(), 0);
  bool used = false;
  auto bump = [&](std::size_t d, std::int64_t value) { span[d] = std::max(span[d], value); };
  for (const auto& stmt : owner.stmts) {
    if (const auto* load = std::get_if<Load>(&stmt.node)) {
      if (load->from != ref.buffer) continue;
      used = true;
      for (std::size_t d = 0; d < ref.rank(); d++) bump(d, 1);
    } else if (const auto* store = std::get_if<Store>(&stmt.node)) {
      if (store->into != ref.buffer) continue;
      used = true;
      for (std::size_t d = 0; d < ref.rank(); d++) bump(d, 1);
    } else if (const auto* special = std::get_if<Special>(&stmt.node)) {
      for (const auto& arg : special->args) {
        if (arg != ref.buffer) continue;
        used = true;
        for (std::size_t d = 0; d < ref.rank(); d++) bump(d, ref.sizes[d]);
      }
    } else if (stmt.is_block()) {
      const Block& child = stmt.block();
      const Refinement* window = child.find_refinement(ref.buffer);
      if (window == nullptr || window->rank() != ref.rank()) continue;
      used = true;
      std::vector<std::int64_t> inner = justified_span(child, *window);
      for (std::size_t d = 0; d < ref.rank(); d++) {
        std::int64_t lo = 0, hi = 0;
        bool bounded = true;
        for (const auto& [name, coeff] : window->offsets[d].terms()) {
          const Index* idx = child.find_index(name);
          if (idx == nullptr || idx->is_alias()) {
            bounded = false;  // parent contribution: give up on this dim
            break;
          }
          (coeff > 0 ? hi : lo) += coeff * (idx->range - 1);
        }
        bump(d, bounded ? std::min(hi - lo + inner[d], kUnboundedSpan) : kUnboundedSpan);
      }
    }
  }
  if (!used) {
    return ref.sizes;  // unused window: nothing to justify against
  }
  return span;
}

class Validator {
 public:
  explicit Validator(const Program& program) : program_(program) {}

  std::vector<Diagnostic> run() {
    walk(program_.root, /*depth=*/0);
    return std::move(diags_);
  }

 private:
  void error(const std::string& code, const std::string& message, const SourceSpan& span) {
    diags_.push_back({Diagnostic::Severity::Error, code, message, span});
  }

  std::string fresh_symbol(const std::string& name) {
    return std::to_string(symbol_counter_++) + ":" + name;
  }

  // Rewrites an expression over a block's visible index names into the
  // global-symbol space; unknown names are reported and dropped.
  Affine globalize(const Affine& expr, const std::map<std::string, Affine>& scope,
                   const SourceSpan& span) {
    Affine result = expr.constant();
    for (const auto& [name, coeff] : expr.terms()) {
      auto it = scope.find(name);
      if (it == scope.end()) {
        error("UnboundParentIndex",
              "index '" + name + "' is not in scope; parent indexes must be passed as aliases",
              span);
        continue;
      }
      result += it->second * coeff;
    }
    return result;
  }

  void check_access(const Affine& base, std::int64_t ext_lo, std::int64_t ext_hi,
                    const ChainEntry& chain, const SourceSpan& span, const char* what) {
    auto [lo, hi] = bound_affine(base, box_, constraints_);
    if (lo + ext_lo < 0 || hi + ext_hi >= chain.elements) {
      std::ostringstream os;
      os << what << " of '" << chain.root_name << "' spans elements [" << (lo + ext_lo) << ", "
         << (hi + ext_hi) << "] outside [0, " << chain.elements << ")";
      error("RefinementOutOfBounds", os.str(), span);
    }
  }

  void walk(const Block& block, int depth) {
    // Index scope: ranged indexes become fresh box symbols, aliases resolve
    // against the parent block's own scope.
    std::map<std::string, Affine> scope;
    const std::map<std::string, Affine>* parent_scope =
        scope_stack_.empty() ? nullptr : &scope_stack_.back();
    std::size_t constraints_mark = constraints_.size();
    std::vector<std::string> own_symbols;
    bool saw_alias = false;
    for (const auto& idx : block.indexes) {
      if (scope.count(idx.name)) {
        error("DuplicateIndex", "duplicate index '" + idx.name + "'", idx.span);
        continue;
      }
      if (idx.is_alias()) {
        saw_alias = true;
        Affine resolved = idx.alias->constant();
        for (const auto& [name, coeff] : idx.alias->terms()) {
          if (parent_scope == nullptr || parent_scope->count(name) == 0) {
            error("UnboundParentIndex",
                  "alias '" + idx.name + "' references index '" + name +
                      "' which is not declared on the parent block",
                  idx.span);
            continue;
          }
          resolved += parent_scope->at(name) * coeff;
        }
        scope.emplace(idx.name, std::move(resolved));
      } else {
        if (saw_alias) {
          error("AliasOrder", "ranged index '" + idx.name + "' declared after an alias",
                idx.span);
        }
        if (idx.range < 1) {
          error("InvalidRange", "index '" + idx.name + "' has range < 1", idx.span);
        }
        std::string sym = fresh_symbol(idx.name);
        box_.ranges[sym] = {0, std::max<std::int64_t>(idx.range, 1) - 1};
        own_symbols.push_back(sym);
        scope.emplace(idx.name, Affine(sym));
      }
    }
    scope_stack_.push_back(std::move(scope));
    const auto& own_scope = scope_stack_.back();

    for (const auto& constraint : block.constraints) {
      constraints_.push_back(globalize(constraint.expr, own_scope, constraint.span));
    }

    // Refinements: resolve each against the parent chain (window) or declare
    // a local allocation; check rank/dtype/direction/size against the parent.
    std::map<std::string, ChainEntry> chains;
    for (const auto& ref : block.refinements) {
      if (chains.count(ref.buffer)) {
        error("DuplicateRefinement", "duplicate refinement '" + ref.buffer + "'", ref.span);
        continue;
      }
      if (ref.offsets.size() != ref.sizes.size() || ref.strides.size() != ref.sizes.size()) {
        error("RankMismatch", "refinement '" + ref.buffer + "' offsets/sizes/strides disagree",
              ref.span);
        continue;
      }
      for (std::int64_t size : ref.sizes) {
        if (size < 1) {
          error("InvalidSize", "refinement '" + ref.buffer + "' has size < 1", ref.span);
        }
      }
      if ((ref.dir == Dir::Out || ref.dir == Dir::InOut) && !ref.agg) {
        error("MissingAggregation",
              "writable refinement '" + ref.buffer + "' carries no aggregation op", ref.span);
      }
      if (depth == 0) {
        for (const auto& offset : ref.offsets) {
          if (!offset.is_constant()) {
            error("NonConstantRootOffset",
                  "root refinement '" + ref.buffer + "' has a non-constant offset", ref.span);
          }
        }
      }
      Affine base;
      for (std::size_t d = 0; d < ref.offsets.size(); d++) {
        base += globalize(ref.offsets[d], own_scope, ref.span) * ref.strides[d];
      }
      if (ref.location) {
        globalize(ref.location->bank, own_scope, ref.span);  // scope check only
      }
      ChainEntry entry;
      entry.decl = &ref;
      const ChainEntry* parent_entry = nullptr;
      if (!chain_stack_.empty()) {
        auto it = chain_stack_.back().find(ref.buffer);
        if (it != chain_stack_.back().end()) parent_entry = &it->second;
      }
      if (parent_entry != nullptr) {
        const Refinement& parent = *parent_entry->decl;
        if (parent.rank() != ref.rank()) {
          error("RankMismatch",
                "refinement '" + ref.buffer + "' rank differs from the parent refinement",
                ref.span);
          continue;
        }
        if (parent.dtype != ref.dtype) {
          error("DtypeMismatch", "refinement '" + ref.buffer + "' dtype differs from parent",
                ref.span);
        }
        bool dir_ok = parent.dir == Dir::InOut || parent.dir == ref.dir;
        if (!dir_ok) {
          error("DirectionMismatch",
                "refinement '" + ref.buffer + "' is " + to_string(ref.dir) +
                    " but the parent refinement is " + to_string(parent.dir),
                ref.span);
        }
        std::vector<std::int64_t> justified;
        for (std::size_t d = 0; d < ref.sizes.size(); d++) {
          if (ref.sizes[d] <= parent.sizes[d]) continue;
          // halo and overflow windows legitimately poke past the parent, but
          // only as far as the subtree can actually address
          if (justified.empty()) justified = justified_span(block, ref);
          if (ref.sizes[d] <= justified[d]) continue;
          auto [off_lo, off_hi] = bound_affine(globalize(ref.offsets[d], own_scope, ref.span),
                                               box_, constraints_);
          (void)off_lo;
          std::ostringstream os;
          os << "refinement '" << ref.buffer << "' dim " << d << " window of size "
             << ref.sizes[d] << " cannot fit in the parent extent " << parent.sizes[d]
             << " (max offset " << off_hi << " ends at " << off_hi + ref.sizes[d] << ")";
          error("RefinementOutOfBounds", os.str(), ref.span);
        }
        entry.flat_base = parent_entry->flat_base + base;
        entry.elements = parent_entry->elements;
        entry.root_name = parent_entry->root_name;
      } else if (depth == 0) {
        auto it = program_.buffers.find(ref.buffer);
        if (it == program_.buffers.end()) {
          error("UnknownBuffer", "root refinement '" + ref.buffer + "' missing from buffer table",
                ref.span);
          continue;
        }
        if (it->second.dtype != ref.dtype) {
          error("DtypeMismatch", "root refinement '" + ref.buffer + "' dtype differs from table",
                ref.span);
        }
        entry.flat_base = base;
        entry.elements = it->second.elements;
        entry.root_name = ref.buffer;
      } else {
        // Local allocation: a fresh buffer scoped to one iteration.
        for (const auto& offset : ref.offsets) {
          if (!(offset == Affine(0))) {
            error("AllocOffsetNonZero",
                  "allocation '" + ref.buffer + "' must have all-zero offsets", ref.span);
          }
        }
        std::int64_t extent = 1;
        for (std::size_t d = 0; d < ref.sizes.size(); d++) {
          std::int64_t stride = ref.strides[d] < 0 ? -ref.strides[d] : ref.strides[d];
          extent += (ref.sizes[d] - 1) * stride;
        }
        entry.flat_base = Affine(0);
        entry.elements = extent;
        entry.root_name = ref.buffer;
      }
      chains.emplace(ref.buffer, std::move(entry));
    }
    chain_stack_.push_back(std::move(chains));
    const auto& own_chains = chain_stack_.back();

    // Statements: scoping, direction discipline and access containment.
    std::set<std::string> temps;
    auto chain_of = [&](const std::string& name, const SourceSpan& span) -> const ChainEntry* {
      auto it = own_chains.find(name);
      if (it == own_chains.end()) {
        error("UndeclaredBuffer",
              "statement references buffer '" + name + "' not refined on this block", span);
        return nullptr;
      }
      return &it->second;
    };
    auto check_temp = [&](const std::string& name, const SourceSpan& span) {
      if (temps.count(name) == 0) {
        error("UndefinedTemp", "scalar temp '" + name + "' used before definition", span);
      }
    };
    for (const auto& stmt : block.stmts) {
      if (const auto* load = std::get_if<Load>(&stmt.node)) {
        if (const ChainEntry* chain = chain_of(load->from, stmt.span)) {
          if (chain->decl->dir == Dir::Out) {
            error("DirectionMismatch", "load from out refinement '" + load->from + "'",
                  stmt.span);
          }
          check_access(chain->flat_base, 0, 0, *chain, stmt.span, "load");
        }
        temps.insert(load->into);
      } else if (const auto* store = std::get_if<Store>(&stmt.node)) {
        check_temp(store->from, stmt.span);
        if (const ChainEntry* chain = chain_of(store->into, stmt.span)) {
          if (chain->decl->dir == Dir::In) {
            error("DirectionMismatch", "store to in refinement '" + store->into + "'",
                  stmt.span);
          }
          check_access(chain->flat_base, 0, 0, *chain, stmt.span, "store");
        }
      } else if (const auto* intr = std::get_if<Intrinsic>(&stmt.node)) {
        if (!is_registered_intrinsic(intr->op) || intr->op == "load" || intr->op == "store") {
          error("UnknownIntrinsic", "unknown intrinsic '" + intr->op + "'", stmt.span);
        }
        for (const auto& arg : intr->args) {
          if (const auto* temp = std::get_if<std::string>(&arg)) {
            check_temp(*temp, stmt.span);
          }
        }
        temps.insert(intr->into);
      } else if (const auto* special = std::get_if<Special>(&stmt.node)) {
        if (!is_registered_special(special->name)) {
          error("UnknownSpecial", "unknown special '" + special->name + "'", stmt.span);
        }
        for (std::size_t i = 0; i < special->args.size(); i++) {
          if (const ChainEntry* chain = chain_of(special->args[i], stmt.span)) {
            bool writes = i == 0;  // gather/scatter write their first operand
            if (writes && chain->decl->dir == Dir::In) {
              error("DirectionMismatch",
                    "special writes to in refinement '" + special->args[i] + "'", stmt.span);
            }
            if (!writes && chain->decl->dir == Dir::Out) {
              error("DirectionMismatch",
                    "special reads from out refinement '" + special->args[i] + "'", stmt.span);
            }
            std::int64_t ext_lo = 0, ext_hi = 0;
            for (std::size_t d = 0; d < chain->decl->sizes.size(); d++) {
              std::int64_t reach = (chain->decl->sizes[d] - 1) * chain->decl->strides[d];
              if (reach < 0) ext_lo += reach; else ext_hi += reach;
            }
            check_access(chain->flat_base, ext_lo, ext_hi, *chain, stmt.span, "special access");
          }
        }
      } else {
        walk(stmt.block(), depth + 1);
      }
    }

    chain_stack_.pop_back();
    scope_stack_.pop_back();
    constraints_.resize(constraints_mark);
    for (const auto& sym : own_symbols) {
      box_.ranges.erase(sym);
    }
  }

  const Program& program_;
  std::vector<Diagnostic> diags_;
  std::vector<std::map<std::string, Affine>> scope_stack_;
  std::vector<std::map<std::string, ChainEntry>> chain_stack_;
  std::vector<Affine> constraints_;
  BoundBox box_;
  int symbol_counter_ = 0;
};

}  // namespace

std::vector<Diagnostic> validate_static(const Program& program) {
  return Validator(program).run();
}

}  // namespace stripe
