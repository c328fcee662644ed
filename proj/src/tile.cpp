// Copyright 2026, Stripe Kit authors.
#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "stripe/passes.h"
#include "stripe/validate.h"

namespace stripe {

std::string TileShape::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, tile] : tiles) {
    if (!first) os << ",";
    first = false;
    os << name << ":" << tile;
  }
  if (interleaved) os << " interleaved";
  return os.str();
}

std::string Rational::to_string() const {
  std::ostringstream os;
  std::int64_t g = std::gcd(num, den);
  if (g == 0) g = 1;
  os << num / g << "/" << den / g;
  return os.str();
}

std::string TileCostReport::to_string() const {
  std::ostringstream os;
  if (excluded) {
    os << "excluded=" << *excluded << " tile_elements=" << tile_elements;
  } else {
    os << "tile_elements=" << tile_elements << " lines=" << lines_total << " ops=" << useful_ops
       << " cost=" << cost().to_string();
  }
  return os.str();
}

TileShape parse_tile_shape(const std::string& text) {
  TileShape ts;
  std::istringstream is(text);
  std::string piece;
  while (std::getline(is, piece, ',')) {
    if (piece.empty()) continue;
    std::size_t sep = piece.find_first_of(":=");
    if (sep == std::string::npos) {
      throw PassError("InvalidTile", "malformed tile entry '" + piece + "'");
    }
    ts.tiles[piece.substr(0, sep)] = std::stoll(piece.substr(sep + 1));
  }
  return ts;
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

struct TiledIndex {
  std::string name;
  std::int64_t range = 1;
  std::int64_t tile = 1;
  std::int64_t outer = 1;
  std::string alias_name;  // outer contribution alias in the inner scope
  bool uneven = false;
};

std::string fresh_alias_name(const Block& block, const std::string& base) {
  std::string name = base + "o";
  while (block.find_index(name) != nullptr) {
    name += "o";
  }
  return name;
}

// min/max of a tile-relative offset over the inner box; terms are inner
// ranged indexes after the carried alias contribution cancels out.
std::pair<std::int64_t, std::int64_t> inner_span(
    const Affine& expr, const std::map<std::string, std::int64_t>& ranges) {
  std::int64_t lo = expr.constant();
  std::int64_t hi = expr.constant();
  for (const auto& [name, coeff] : expr.terms()) {
    auto it = ranges.find(name);
    std::int64_t extent = it == ranges.end() ? 0 : it->second - 1;
    if (coeff > 0) {
      hi += coeff * extent;
    } else {
      lo += coeff * extent;
    }
  }
  return {lo, hi};
}

}  // namespace

Block tile_rewrite(const Block& block, const TileShape& ts) {
  std::vector<TiledIndex> tiled;
  std::map<std::string, std::int64_t> inner_ranges;
  for (const auto& idx : block.indexes) {
    if (idx.is_alias()) continue;
    auto it = ts.tiles.find(idx.name);
    std::int64_t tile = it == ts.tiles.end() ? idx.range : it->second;
    if (tile < 1 || tile > idx.range) {
      throw PassError("InvalidTile", "tile " + std::to_string(tile) + " invalid for index '" +
                                         idx.name + "' of range " + std::to_string(idx.range));
    }
    TiledIndex ti;
    ti.name = idx.name;
    ti.range = idx.range;
    ti.tile = tile;
    ti.outer = ceil_div(idx.range, tile);
    ti.uneven = ti.outer * tile != idx.range;
    ti.alias_name = fresh_alias_name(block, idx.name);
    tiled.push_back(std::move(ti));
    inner_ranges[idx.name] = tile;
  }
  for (const auto& [name, tile] : ts.tiles) {
    (void)tile;
    const Index* idx = block.find_index(name);
    if (idx == nullptr || idx->is_alias()) {
      throw PassError("InvalidTile", "no ranged index '" + name + "' to tile");
    }
  }
  bool any_tiled = std::any_of(tiled.begin(), tiled.end(),
                               [](const TiledIndex& ti) { return ti.tile != ti.range; });
  for (const auto& stmt : block.stmts) {
    if (std::holds_alternative<Special>(stmt.node) && any_tiled) {
      throw PassError("NotTileable", "block contains a special spanning tiled indexes");
    }
  }

  // Substitution maps over the original ranged names. The alias carries the
  // outer contribution (e.g. xo=3*x), so pushed constraints read like
  // `-1 + xo + x + i >= 0`; degenerate outer ranges drop the alias entirely.
  std::map<std::string, Affine> subst_full;     // original -> alias + inner
  std::map<std::string, Affine> subst_outer;    // original -> outer-index expr
  std::map<std::string, Affine> subst_carried;  // original -> alias only
  for (const auto& ti : tiled) {
    Affine inner_term = ts.interleaved ? Affine(ti.name, ti.outer) : Affine(ti.name);
    Affine alias_term = ti.outer > 1 ? Affine(ti.alias_name) : Affine(0);
    subst_full[ti.name] = alias_term + inner_term;
    subst_carried[ti.name] = alias_term;
    if (ti.outer > 1) {
      subst_outer[ti.name] = ts.interleaved ? Affine(ti.name) : Affine(ti.name, ti.tile);
    } else {
      subst_outer[ti.name] = Affine(0);
    }
  }

  Block inner;
  inner.tags = block.tags;
  inner.span = block.span;
  for (const auto& ti : tiled) {
    inner.indexes.push_back(Index{ti.name, ti.tile, std::nullopt, {}});
  }

  // Pushed-down constraints, then overflow constraints for uneven splits.
  std::set<std::string> used_aliases;
  auto note_aliases = [&](const Affine& expr) {
    for (const auto& ti : tiled) {
      if (expr.coeff(ti.alias_name) != 0) used_aliases.insert(ti.alias_name);
    }
  };
  for (const auto& constraint : block.constraints) {
    Constraint pushed;
    pushed.expr = affine_substitute(constraint.expr, subst_full);
    note_aliases(pushed.expr);
    inner.constraints.push_back(std::move(pushed));
  }
  for (const auto& ti : tiled) {
    if (!ti.uneven) continue;
    Constraint overflow;
    overflow.expr = Affine(ti.range - 1) - affine_substitute(Affine(ti.name), subst_full);
    note_aliases(overflow.expr);
    inner.constraints.push_back(std::move(overflow));
  }

  Block outer;
  outer.span = block.span;
  for (const auto& ti : tiled) {
    outer.indexes.push_back(Index{ti.name, ti.outer, std::nullopt, {}});
  }
  for (const auto& idx : block.indexes) {
    if (idx.is_alias()) {
      // Re-export the original alias so the inner block can rebind it.
      outer.indexes.push_back(idx);
      inner.indexes.push_back(Index{idx.name, 1, Affine(idx.name), {}});
    }
  }

  // Refinements: outer windows hold the per-tile footprint (halo included),
  // inner windows are tile-relative with the original sizes.
  for (const auto& ref : block.refinements) {
    Refinement outer_ref = ref;
    Refinement inner_ref = ref;
    outer_ref.location.reset();
    inner_ref.location.reset();
    for (std::size_t d = 0; d < ref.offsets.size(); d++) {
      Affine full = affine_substitute(ref.offsets[d], subst_full);
      Affine carried = affine_substitute(ref.offsets[d], subst_carried);
      Affine rel = full - carried;
      auto [lo, hi] = inner_span(rel, inner_ranges);
      Affine outer_off = affine_substitute(ref.offsets[d], subst_outer) + lo;
      rel -= lo;
      outer_ref.offsets[d] = std::move(outer_off);
      outer_ref.sizes[d] = hi - lo + ref.sizes[d];
      inner_ref.offsets[d] = std::move(rel);
    }
    if (ref.location) {
      Location loc = *ref.location;
      loc.bank = affine_substitute(loc.bank, subst_outer);
      outer_ref.location = std::move(loc);
    }
    outer.refinements.push_back(std::move(outer_ref));
    inner.refinements.push_back(std::move(inner_ref));
  }

  // Aliases referenced by the pushed constraints, in declaration order.
  for (const auto& ti : tiled) {
    if (used_aliases.count(ti.alias_name)) {
      Affine rhs = ts.interleaved ? Affine(ti.name) : Affine(ti.name, ti.tile);
      inner.indexes.push_back(Index{ti.alias_name, 1, std::move(rhs), {}});
    }
  }

  inner.stmts = block.stmts;
  Statement stmt;
  stmt.node = std::move(inner);
  outer.stmts.push_back(std::move(stmt));
  return outer;
}

namespace {

// Per-tile element coordinates of one inner refinement, relative to the
// outer window base. Offsets are alias-free after tile_rewrite, so the set
// only depends on the inner box.
std::vector<std::vector<std::int64_t>> tile_elements_of(const Refinement& ref,
                                                        const Block& inner) {
  std::set<std::string> seen;
  bool disjoint_dims = true;
  for (const auto& offset : ref.offsets) {
    for (const auto& [name, coeff] : offset.terms()) {
      (void)coeff;
      if (!seen.insert(name).second) disjoint_dims = false;
    }
  }
  if (disjoint_dims) {
    std::vector<std::vector<std::int64_t>> per_dim(ref.rank());
    for (std::size_t d = 0; d < ref.rank(); d++) {
      std::set<std::int64_t> offs;
      std::vector<std::pair<std::int64_t, std::int64_t>> vars;  // coeff, range
      for (const auto& [name, coeff] : ref.offsets[d].terms()) {
        const Index* idx = inner.find_index(name);
        vars.emplace_back(coeff, idx != nullptr && !idx->is_alias() ? idx->range : 1);
      }
      std::vector<std::int64_t> pos(vars.size(), 0);
      for (;;) {
        std::int64_t off = ref.offsets[d].constant();
        for (std::size_t v = 0; v < vars.size(); v++) {
          off += vars[v].first * pos[v];
        }
        for (std::int64_t w = 0; w < ref.sizes[d]; w++) {
          offs.insert(off + w);
        }
        std::size_t v = vars.size();
        bool done = true;
        while (v > 0) {
          v--;
          if (++pos[v] < vars[v].second) {
            done = false;
            break;
          }
          pos[v] = 0;
        }
        if (done) break;
      }
      per_dim[d].assign(offs.begin(), offs.end());
    }
    std::vector<std::vector<std::int64_t>> elems;
    std::vector<std::size_t> pos(per_dim.size(), 0);
    for (;;) {
      std::vector<std::int64_t> elem(per_dim.size());
      for (std::size_t d = 0; d < per_dim.size(); d++) {
        elem[d] = per_dim[d][pos[d]];
      }
      elems.push_back(std::move(elem));
      std::size_t d = per_dim.size();
      bool done = true;
      while (d > 0) {
        d--;
        if (++pos[d] < per_dim[d].size()) {
          done = false;
          break;
        }
        pos[d] = 0;
      }
      if (done || per_dim.empty()) break;
    }
    return elems;
  }
  // An index shared between dimensions: enumerate box points exactly.
  Block box;
  box.indexes = inner.indexes;
  std::set<std::vector<std::int64_t>> elems;
  for (const auto& point : enumerate_points(box)) {
    std::vector<std::int64_t> base(ref.rank());
    for (std::size_t d = 0; d < ref.rank(); d++) {
      base[d] = affine_eval(ref.offsets[d], point);
    }
    std::vector<std::int64_t> w(ref.rank(), 0);
    for (;;) {
      std::vector<std::int64_t> elem(ref.rank());
      for (std::size_t d = 0; d < ref.rank(); d++) {
        elem[d] = base[d] + w[d];
      }
      elems.insert(std::move(elem));
      std::size_t d = ref.rank();
      bool done = true;
      while (d > 0) {
        d--;
        if (++w[d] < ref.sizes[d]) {
          done = false;
          break;
        }
        w[d] = 0;
      }
      if (done) break;
    }
  }
  return {elems.begin(), elems.end()};
}

std::int64_t count_valid_points(const Block& block) {
  std::vector<const Index*> ranged;
  IndexEnv env;
  for (const auto& idx : block.indexes) {
    if (idx.is_alias()) {
      throw PassError("InvalidTile", "tile_cost requires alias-free blocks");
    }
    ranged.push_back(&idx);
  }
  std::int64_t count = 0;
  std::vector<std::int64_t> coords(ranged.size(), 0);
  for (;;) {
    for (std::size_t i = 0; i < ranged.size(); i++) {
      env[ranged[i]->name] = coords[i];
    }
    bool ok = true;
    for (const auto& constraint : block.constraints) {
      if (affine_eval(constraint.expr, env) < 0) {
        ok = false;
        break;
      }
    }
    if (ok) count++;
    std::size_t d = ranged.size();
    while (d > 0) {
      d--;
      if (++coords[d] < ranged[d]->range) break;
      coords[d] = 0;
      if (d == 0) return count;
    }
    if (ranged.empty()) return count;
  }
}

std::int64_t floor_div64(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) q--;
  return q;
}

}  // namespace

TileCostReport tile_cost(const Block& block, const TileShape& ts, const CacheModel& cm,
                         std::int64_t mem_cap, std::optional<std::int64_t> useful_ops_hint) {
  Block outer = tile_rewrite(block, ts);
  const Block& inner = outer.stmts.front().block();
  TileCostReport report;
  // A tile window never needs more memory per dimension than the
  // constraint-clipped extent the whole block can touch: the halo widens
  // tiles, but a full-range tile is just the tensor itself.
  BoundBox box;
  std::vector<Affine> constraints;
  for (const auto& idx : block.indexes) {
    if (!idx.is_alias()) box.ranges[idx.name] = {0, idx.range - 1};
  }
  for (const auto& constraint : block.constraints) {
    constraints.push_back(constraint.expr);
  }
  for (std::size_t r = 0; r < inner.refinements.size(); r++) {
    const Refinement& iref = inner.refinements[r];
    if (iref.has_tag("untiled")) continue;
    const Refinement& orig = block.refinements[r];
    std::int64_t elements = 1;
    for (std::size_t d = 0; d < iref.rank(); d++) {
      auto [lo, hi] = bound_affine(orig.offsets[d], box, constraints);
      elements *= std::min(outer.refinements[r].sizes[d], hi + orig.sizes[d] - lo);
    }
    report.tile_elements += elements;
  }
  if (report.tile_elements > mem_cap) {
    report.excluded = "MemCap";
    return report;
  }
  report.useful_ops = useful_ops_hint ? *useful_ops_hint : count_valid_points(block);

  // Per-refinement flattened tile elements; the distinct-line count per tile
  // depends only on the tile base modulo the line size, so cache by residue.
  struct RefCost {
    std::vector<std::int64_t> flat;  // flattened relative element offsets
    Affine base;                     // flat base over outer indexes
    std::unordered_map<std::int64_t, std::int64_t> by_residue;
  };
  std::vector<RefCost> costs;
  for (std::size_t r = 0; r < inner.refinements.size(); r++) {
    const Refinement& iref = inner.refinements[r];
    const Refinement& oref = outer.refinements[r];
    RefCost rc;
    for (const auto& elem : tile_elements_of(iref, inner)) {
      std::int64_t flat = 0;
      for (std::size_t d = 0; d < elem.size(); d++) {
        flat += elem[d] * iref.strides[d];
      }
      rc.flat.push_back(flat);
    }
    for (std::size_t d = 0; d < oref.offsets.size(); d++) {
      rc.base += oref.offsets[d] * oref.strides[d];
    }
    costs.push_back(std::move(rc));
  }
  auto lines_at = [&](RefCost* rc, std::int64_t base) {
    std::int64_t residue = ((base % cm.line) + cm.line) % cm.line;
    auto it = rc->by_residue.find(residue);
    if (it != rc->by_residue.end()) return it->second;
    std::set<std::int64_t> lines;
    for (std::int64_t flat : rc->flat) {
      lines.insert(floor_div64(residue + flat, cm.line));
    }
    std::int64_t count = static_cast<std::int64_t>(lines.size());
    rc->by_residue.emplace(residue, count);
    return count;
  };
  for (const auto& point : enumerate_points(outer)) {
    for (auto& rc : costs) {
      report.lines_total += lines_at(&rc, affine_eval(rc.base, point));
    }
  }
  return report;
}

namespace {

std::vector<std::int64_t> tile_candidates(std::int64_t range, bool power_of_two) {
  std::vector<std::int64_t> result;
  if (power_of_two) {
    for (std::int64_t t = 1; t <= range; t *= 2) {
      result.push_back(t);
    }
  } else {
    for (std::int64_t t = 1; t <= range; t++) {
      if (range % t == 0) result.push_back(t);
    }
  }
  return result;
}

}  // namespace

AutotileResult autotile(const Block& block, const CacheModel& cm, const AutotileOptions& opts) {
  AutotileResult result;
  if (opts.pinned) {
    result.chosen = opts.pinned;
    result.report = tile_cost(block, *opts.pinned, cm, opts.mem_cap);
    result.block = tile_rewrite(block, *opts.pinned);
    result.candidates = 1;
    return result;
  }
  std::vector<std::string> names;
  std::vector<std::vector<std::int64_t>> candidates;
  for (const auto& idx : block.indexes) {
    if (idx.is_alias()) continue;
    names.push_back(idx.name);
    candidates.push_back(tile_candidates(idx.range, opts.power_of_two));
  }
  std::int64_t useful_ops = count_valid_points(block);
  std::optional<TileShape> best;
  std::optional<Rational> best_cost;
  std::vector<std::size_t> pos(names.size(), 0);
  for (;;) {
    TileShape ts;
    for (std::size_t i = 0; i < names.size(); i++) {
      ts.tiles[names[i]] = candidates[i][pos[i]];
    }
    result.candidates++;
    TileCostReport report = tile_cost(block, ts, cm, opts.mem_cap, useful_ops);
    if (report.excluded) {
      result.excluded++;
    } else {
      Rational cost = report.cost();
      // Candidates arrive in lexicographic order, so a strict improvement
      // rule keeps the lexicographically smallest tile vector among ties.
      if (!best_cost || cost < *best_cost) {
        best_cost = cost;
        best = ts;
        result.report = report;
      }
    }
    std::size_t d = names.size();
    bool done = true;
    while (d > 0) {
      d--;
      if (++pos[d] < candidates[d].size()) {
        done = false;
        break;
      }
      pos[d] = 0;
    }
    if (done || names.empty()) break;
  }
  if (!best) {
    result.block = block;
    result.diags.push_back({Diagnostic::Severity::Warning, "NoFeasibleTile",
                            "every tile candidate exceeded the memory cap", block.span});
    return result;
  }
  result.chosen = best;
  result.block = tile_rewrite(block, *best);
  return result;
}

Block stencil_match(const Block& block, const std::vector<StencilSpec>& specs) {
  std::set<std::string> out_names;
  std::set<std::string> in_names;
  for (const auto& ref : block.refinements) {
    for (const auto& offset : ref.offsets) {
      for (const auto& [name, coeff] : offset.terms()) {
        (void)coeff;
        if (ref.dir == Dir::In) {
          in_names.insert(name);
        } else {
          out_names.insert(name);
        }
      }
    }
  }
  std::vector<const Index*> out_idxs;
  std::vector<const Index*> red_idxs;
  for (const auto& idx : block.indexes) {
    if (idx.is_alias()) continue;
    if (out_names.count(idx.name)) {
      out_idxs.push_back(&idx);
    } else if (in_names.count(idx.name)) {
      red_idxs.push_back(&idx);
    }
  }
  for (const auto& spec : specs) {
    bool dtype_ok = true;
    for (const auto& ref : block.refinements) {
      if (ref.dtype != spec.dtype) dtype_ok = false;
    }
    if (!dtype_ok) continue;
    std::map<std::string, std::int64_t> assignment;
    std::set<std::string> taken;
    bool ok = true;
    for (std::int64_t size : spec.out_sizes) {
      bool found = false;
      for (const Index* idx : out_idxs) {
        if (taken.count(idx->name) || idx->range % size != 0) continue;
        assignment[idx->name] = size;
        taken.insert(idx->name);
        found = true;
        break;
      }
      if (!found) {
        ok = false;
        break;
      }
    }
    if (ok) {
      bool found = false;
      for (const Index* idx : red_idxs) {
        if (idx->range % spec.reduction_size != 0) continue;
        assignment[idx->name] = spec.reduction_size;
        found = true;
        break;
      }
      ok = found;
    }
    if (!ok) continue;
    bool exact = true;
    for (const auto& [name, size] : assignment) {
      if (block.find_index(name)->range != size) exact = false;
    }
    if (exact) {
      Block tagged = block;
      tagged.tags.insert(spec.tag);
      return tagged;
    }
    TileShape ts;
    ts.tiles = assignment;
    Block outer = tile_rewrite(block, ts);
    outer.stmts.front().block().tags.insert(spec.tag);
    return outer;
  }
  return block;
}

namespace {

// Interval region of a refinement over the outer block's box with the
// partition index pinned to one bank.
std::vector<std::pair<std::int64_t, std::int64_t>> bank_region(const Refinement& ref,
                                                               const Block& outer,
                                                               const std::string& part,
                                                               std::int64_t value) {
  std::vector<std::pair<std::int64_t, std::int64_t>> region(ref.rank());
  std::map<std::string, Affine> fix{{part, Affine(value)}};
  for (std::size_t d = 0; d < ref.rank(); d++) {
    Affine off = affine_substitute(ref.offsets[d], fix);
    std::int64_t lo = off.constant();
    std::int64_t hi = off.constant();
    for (const auto& [name, coeff] : off.terms()) {
      const Index* idx = outer.find_index(name);
      std::int64_t extent = idx != nullptr && !idx->is_alias() ? idx->range - 1 : 0;
      if (coeff > 0) {
        hi += coeff * extent;
      } else {
        lo += coeff * extent;
      }
    }
    region[d] = {lo, hi + ref.sizes[d]};  // [begin, end)
  }
  return region;
}

}  // namespace

Block partition(const Block& block, const std::string& index, std::int64_t n,
                const std::string& unit_name) {
  const Index* idx = block.find_index(index);
  if (idx == nullptr || idx->is_alias()) {
    throw PassError("NotPartitionable", "no ranged index '" + index + "' to partition");
  }
  if (n < 1) {
    throw PassError("NotPartitionable", "bank count must be >= 1");
  }
  if (n == 1) {
    Block banked = block;
    for (auto& ref : banked.refinements) {
      std::int64_t address = ref.location ? ref.location->address : 0;
      ref.location = Location{unit_name, Affine(0), address};
    }
    return banked;
  }
  TileShape ts;
  ts.tiles[index] = ceil_div(idx->range, n);
  Block outer = tile_rewrite(block, ts);
  std::int64_t banks = 0;
  for (const auto& oidx : outer.indexes) {
    if (oidx.name == index && !oidx.is_alias()) banks = oidx.range;
  }
  for (const auto& ref : outer.refinements) {
    if (ref.dir == Dir::In) continue;
    for (std::int64_t a = 0; a < banks; a++) {
      for (std::int64_t b = a + 1; b < banks; b++) {
        auto ra = bank_region(ref, outer, index, a);
        auto rb = bank_region(ref, outer, index, b);
        bool disjoint = false;
        for (std::size_t d = 0; d < ra.size(); d++) {
          if (ra[d].second <= rb[d].first || rb[d].second <= ra[d].first) disjoint = true;
        }
        if (!disjoint) {
          throw PassError("NotPartitionable",
                          "out footprints of '" + ref.buffer + "' overlap across banks of '" +
                              index + "'");
        }
      }
    }
  }
  for (auto& ref : outer.refinements) {
    std::int64_t address = ref.location ? ref.location->address : 0;
    ref.location = Location{unit_name, Affine(index), address};
  }
  return outer;
}

}  // namespace stripe
