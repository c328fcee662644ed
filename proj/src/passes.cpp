// Copyright 2026, Stripe Kit authors.
#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "stripe/passes.h"
#include "stripe/validate.h"

namespace stripe {

namespace {

std::vector<const Index*> wide_indexes(const Block& block) {
  std::vector<const Index*> result;
  for (const auto& idx : block.indexes) {
    if (!idx.is_alias() && idx.range > 1) result.push_back(&idx);
  }
  return result;
}

bool subtree_refines(const Block& block, const std::string& name) {
  for (const auto& ref : block.refinements) {
    if (ref.buffer == name) return true;
  }
  for (const auto& stmt : block.stmts) {
    if (stmt.is_block() && subtree_refines(stmt.block(), name)) return true;
  }
  return false;
}

// Per-dimension shape of a residual refinement at one shared point: a base
// affine over the fused block's indexes plus a constant interval from the
// residual's own ranged indexes and the window size.
struct SharedWindow {
  std::vector<Affine> base;           // over fused index names
  std::vector<std::int64_t> lo;       // inclusive interval around the base
  std::vector<std::int64_t> hi;
  bool ok = true;
};

SharedWindow shared_window(const Refinement& ref, const Block& residual) {
  SharedWindow win;
  std::map<std::string, Affine> rename;
  std::map<std::string, std::int64_t> ranges;
  for (const auto& idx : residual.indexes) {
    if (!idx.is_alias()) {
      std::string sym = "\t" + idx.name;
      rename.emplace(idx.name, Affine(sym));
      ranges.emplace(sym, idx.range);
    }
  }
  for (const auto& idx : residual.indexes) {
    if (idx.is_alias()) rename.emplace(idx.name, *idx.alias);
  }
  win.base.resize(ref.rank());
  win.lo.assign(ref.rank(), 0);
  win.hi.assign(ref.rank(), 0);
  for (std::size_t d = 0; d < ref.rank(); d++) {
    Affine offset = affine_substitute(ref.offsets[d], rename);
    Affine base = offset.constant();
    for (const auto& [name, coeff] : offset.terms()) {
      auto it = ranges.find(name);
      if (it != ranges.end()) {
        if (coeff > 0) {
          win.hi[d] += coeff * (it->second - 1);
        } else {
          win.lo[d] += coeff * (it->second - 1);
        }
      } else {
        base += Affine(name, coeff);
      }
    }
    win.hi[d] += ref.sizes[d] - 1;
    win.base[d] = std::move(base);
  }
  return win;
}

// Residual of a fused operand: matched wide indexes become aliases bound to
// the fused block's indexes; everything else is untouched.
Block make_residual(const Block& block, const std::vector<const Index*>& matched,
                    const std::vector<std::string>& fused_names) {
  Block residual = block;
  residual.annotation.reset();
  std::set<std::string> matched_names;
  for (const auto* idx : matched) {
    matched_names.insert(idx->name);
  }
  std::vector<Index> indexes;
  for (const auto& idx : residual.indexes) {
    if (!idx.is_alias() && matched_names.count(idx.name)) continue;
    if (idx.is_alias()) continue;
    indexes.push_back(idx);
  }
  for (const auto& idx : residual.indexes) {
    if (idx.is_alias()) indexes.push_back(idx);
  }
  for (std::size_t p = 0; p < matched.size(); p++) {
    indexes.push_back(Index{matched[p]->name, 1, Affine(fused_names[p]), {}});
  }
  residual.indexes = std::move(indexes);
  return residual;
}

}  // namespace

std::variant<Block, Refusal> fuse(const Block& parent, std::size_t i, std::size_t j) {
  if (i >= j || j >= parent.stmts.size()) return Refusal{"BadIndices"};
  if (!parent.stmts[i].is_block() || !parent.stmts[j].is_block()) return Refusal{"NotBlocks"};
  const Block& a = parent.stmts[i].block();
  const Block& b = parent.stmts[j].block();

  DependencyDag dag = build_dependency_dag(parent);
  for (std::size_t s = i + 1; s < j; s++) {
    if (dag.has_edge(static_cast<int>(s), static_cast<int>(j))) {
      return Refusal{"InterveningConflict"};
    }
  }

  std::vector<const Index*> wa = wide_indexes(a);
  std::vector<const Index*> wb = wide_indexes(b);
  std::size_t shared = 0;
  while (shared < wa.size() && shared < wb.size() &&
         wa[shared]->range == wb[shared]->range) {
    shared++;
  }
  if (shared == 0) return Refusal{"NoSharedIndexes"};
  wa.resize(shared);
  wb.resize(shared);

  Block fused;
  fused.span = a.span;
  std::vector<std::string> fused_names;
  for (const auto* idx : wa) {
    fused.indexes.push_back(Index{idx->name, idx->range, std::nullopt, {}});
    fused_names.push_back(idx->name);
  }

  Block res_a = make_residual(a, wa, fused_names);
  Block res_b = make_residual(b, wb, fused_names);

  // Pass-through refinements for every parent buffer either side touches.
  struct Use {
    bool read = false;
    bool written = false;
    std::optional<AggOp> agg;
    std::set<std::string> tags;
  };
  std::map<std::string, Use> uses;
  std::vector<std::string> order;
  for (const Block* side : {&a, &b}) {
    for (const auto& ref : side->refinements) {
      if (parent.find_refinement(ref.buffer) == nullptr) continue;  // local to the residual
      auto [it, fresh] = uses.try_emplace(ref.buffer);
      if (fresh) order.push_back(ref.buffer);
      if (ref.dir != Dir::Out) it->second.read = true;
      if (ref.dir != Dir::In) {
        it->second.written = true;
        if (!it->second.agg) it->second.agg = ref.agg;
      }
      it->second.tags.insert(ref.tags.begin(), ref.tags.end());
    }
  }
  for (const auto& name : order) {
    const Use& use = uses.at(name);
    const Refinement& parent_ref = *parent.find_refinement(name);
    Refinement ref;
    ref.buffer = name;
    ref.dir = use.read && use.written ? Dir::InOut : use.written ? Dir::Out : Dir::In;
    ref.agg = use.written ? use.agg : std::nullopt;
    ref.dtype = parent_ref.dtype;
    ref.offsets.assign(parent_ref.rank(), Affine(0));
    ref.sizes = parent_ref.sizes;
    ref.strides = parent_ref.strides;
    ref.tags = use.tags;
    fused.refinements.push_back(std::move(ref));
  }

  // Tighten each pass-through to the union of the per-point windows the two
  // residuals actually use, so later localization sees tile-sized views. A
  // buffer whose sides disagree on the affine base keeps the full view.
  for (auto& ref : fused.refinements) {
    std::vector<SharedWindow> wins;
    for (const Block* residual : {&res_a, &res_b}) {
      const Refinement* side = residual->find_refinement(ref.buffer);
      if (side != nullptr) wins.push_back(shared_window(*side, *residual));
    }
    bool ok = !wins.empty();
    for (std::size_t w = 1; ok && w < wins.size(); w++) {
      for (std::size_t d = 0; d < ref.rank(); d++) {
        if (wins[w].base[d] - wins[w].base[d].constant() !=
            wins[0].base[d] - wins[0].base[d].constant()) {
          ok = false;
        }
      }
    }
    if (!ok) continue;
    std::vector<Affine> offsets(ref.rank());
    std::vector<std::int64_t> sizes(ref.rank());
    for (std::size_t d = 0; d < ref.rank(); d++) {
      std::int64_t lo = wins[0].base[d].constant() + wins[0].lo[d];
      std::int64_t hi = wins[0].base[d].constant() + wins[0].hi[d];
      for (std::size_t w = 1; w < wins.size(); w++) {
        lo = std::min(lo, wins[w].base[d].constant() + wins[w].lo[d]);
        hi = std::max(hi, wins[w].base[d].constant() + wins[w].hi[d]);
      }
      offsets[d] = wins[0].base[d] - wins[0].base[d].constant() + lo;
      sizes[d] = hi - lo + 1;
    }
    ref.offsets = std::move(offsets);
    ref.sizes = std::move(sizes);
  }

  // Legality over the shared box: the producer's per-point writes must cover
  // the consumer's per-point reads, per-point writes must not overlap across
  // points, and cross reads/writes between the two sides must be disjoint.
  Block shared_box;
  shared_box.indexes = fused.indexes;
  auto dir_reads = [](Dir dir) { return dir != Dir::Out; };
  auto dir_writes = [](Dir dir) { return dir != Dir::In; };
  for (const auto& ref_a : res_a.refinements) {
    const Refinement* ref_b = res_b.find_refinement(ref_a.buffer);
    if (ref_b == nullptr) continue;
    if (parent.find_refinement(ref_a.buffer) == nullptr) continue;
    bool a_writes_b_reads = dir_writes(ref_a.dir) && dir_reads(ref_b->dir);
    bool a_reads_b_writes = dir_reads(ref_a.dir) && dir_writes(ref_b->dir);
    bool both_write = dir_writes(ref_a.dir) && dir_writes(ref_b->dir);
    if (both_write) return Refusal{"WritesOverlap"};
    if (!a_writes_b_reads && !a_reads_b_writes) continue;
    std::set<std::vector<std::int64_t>> a_all;
    std::set<std::vector<std::int64_t>> b_all;
    bool a_dup = false;
    for (const auto& point : enumerate_points(shared_box)) {
      Footprint fa = footprint(ref_a, res_a, /*exact=*/true, point);
      Footprint fb = footprint(*ref_b, res_b, /*exact=*/true, point);
      if (a_writes_b_reads) {
        for (const auto& elem : fb.elems) {
          if (fa.elems.count(elem) == 0) return Refusal{"FootprintNotCovered"};
        }
        for (const auto& elem : fa.elems) {
          if (!a_all.insert(elem).second) a_dup = true;
        }
      } else {
        a_all.insert(fa.elems.begin(), fa.elems.end());
        b_all.insert(fb.elems.begin(), fb.elems.end());
      }
    }
    if (a_writes_b_reads && a_dup) return Refusal{"WritesOverlap"};
    if (a_reads_b_writes) {
      // the later statement must not write anything the earlier one read,
      // at any pair of shared points
      for (const auto& elem : b_all) {
        if (a_all.count(elem)) return Refusal{"ReadWriteHazard"};
      }
    }
  }

  // Rebase residual offsets against the tightened windows; the window base
  // is rewritten into each residual's matched-alias names first.
  auto rebase = [&](Block* residual, const std::vector<const Index*>& matched) {
    std::map<std::string, Affine> to_residual;
    for (std::size_t p = 0; p < fused_names.size(); p++) {
      to_residual[fused_names[p]] = Affine(matched[p]->name);
    }
    for (auto& ref : residual->refinements) {
      const Refinement* window = fused.find_refinement(ref.buffer);
      if (window == nullptr) continue;
      for (std::size_t d = 0; d < ref.rank(); d++) {
        ref.offsets[d] -= affine_substitute(window->offsets[d], to_residual);
      }
    }
  };
  rebase(&res_a, wa);
  rebase(&res_b, wb);

  Statement sa;
  sa.node = std::move(res_a);
  Statement sb;
  sb.node = std::move(res_b);
  fused.stmts.push_back(std::move(sa));
  fused.stmts.push_back(std::move(sb));
  return fused;
}

namespace {

bool defines_temp(const Statement& stmt, const std::string& temp) {
  if (const auto* load = std::get_if<Load>(&stmt.node)) return load->into == temp;
  if (const auto* intr = std::get_if<Intrinsic>(&stmt.node)) return intr->into == temp;
  return false;
}

bool uses_temp_outside_store(const Statement& stmt, const std::string& temp) {
  if (const auto* intr = std::get_if<Intrinsic>(&stmt.node)) {
    for (const auto& arg : intr->args) {
      if (const auto* name = std::get_if<std::string>(&arg)) {
        if (*name == temp) return true;
      }
    }
  }
  return false;
}

// One store/load round-trip through a per-iteration local buffer.
struct Roundtrip {
  std::string buffer;
  std::size_t store_idx = 0;
  std::string source;             // temp stored into the buffer
  std::vector<std::size_t> loads;  // later loads of the same buffer
};

bool find_roundtrip(const Block& block, const std::string& buffer, Roundtrip* rt) {
  const Refinement* ref = block.find_refinement(buffer);
  if (ref == nullptr || ref->agg != AggOp::Assign) return false;
  rt->buffer = buffer;
  rt->loads.clear();
  bool have_store = false;
  for (std::size_t k = 0; k < block.stmts.size(); k++) {
    const Statement& stmt = block.stmts[k];
    if (const auto* store = std::get_if<Store>(&stmt.node)) {
      if (store->into != buffer) continue;
      if (have_store) return false;  // single store only
      have_store = true;
      rt->store_idx = k;
      rt->source = store->from;
    } else if (const auto* load = std::get_if<Load>(&stmt.node)) {
      if (load->from != buffer) continue;
      if (!have_store) return false;  // load before the value exists
      rt->loads.push_back(k);
    } else if (const auto* special = std::get_if<Special>(&stmt.node)) {
      for (const auto& arg : special->args) {
        if (arg == buffer) return false;
      }
    } else if (stmt.is_block()) {
      if (subtree_refines(stmt.block(), buffer)) return false;
    }
  }
  if (!have_store) return false;
  // The source temp must stay live and unmodified past the store.
  for (std::size_t k = rt->store_idx + 1; k < block.stmts.size(); k++) {
    if (defines_temp(block.stmts[k], rt->source)) return false;
  }
  // Every loaded temp feeds only stores of equal-or-narrower width.
  int bits = dtype_bits(ref->dtype);
  for (std::size_t load_idx : rt->loads) {
    const auto& load = std::get<Load>(block.stmts[load_idx].node);
    for (std::size_t k = load_idx + 1; k < block.stmts.size(); k++) {
      const Statement& stmt = block.stmts[k];
      if (defines_temp(stmt, load.into)) return false;
      if (uses_temp_outside_store(stmt, load.into)) return false;
      if (const auto* store = std::get_if<Store>(&stmt.node)) {
        if (store->from != load.into) continue;
        const Refinement* target = block.find_refinement(store->into);
        if (target == nullptr || dtype_bits(target->dtype) > bits) return false;
      }
    }
  }
  return true;
}

void apply_roundtrip(Block* block, const Roundtrip& rt) {
  std::set<std::string> loaded;
  for (std::size_t idx : rt.loads) {
    loaded.insert(std::get<Load>(block->stmts[idx].node).into);
  }
  std::vector<Statement> stmts;
  for (std::size_t k = 0; k < block->stmts.size(); k++) {
    if (k == rt.store_idx || std::count(rt.loads.begin(), rt.loads.end(), k) > 0) {
      continue;
    }
    Statement stmt = block->stmts[k];
    if (auto* store = std::get_if<Store>(&stmt.node)) {
      if (loaded.count(store->from)) store->from = rt.source;
    }
    stmts.push_back(std::move(stmt));
  }
  block->stmts = std::move(stmts);
  std::erase_if(block->refinements,
                [&](const Refinement& ref) { return ref.buffer == rt.buffer; });
}

}  // namespace

Block scalarize(const Block& block, const std::set<std::string>& parent_buffers) {
  Block out = block;
  std::set<std::string> own;
  for (const auto& ref : out.refinements) {
    own.insert(ref.buffer);
  }
  for (auto& stmt : out.stmts) {
    if (stmt.is_block()) {
      stmt.node = scalarize(stmt.block(), own);
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& ref : out.refinements) {
      if (parent_buffers.count(ref.buffer)) continue;  // window, not a local buffer
      Roundtrip rt;
      if (find_roundtrip(out, ref.buffer, &rt)) {
        apply_roundtrip(&out, rt);
        changed = true;
        break;
      }
    }
  }
  return out;
}

namespace {

std::vector<std::int64_t> dense_strides(const std::vector<std::int64_t>& sizes) {
  std::vector<std::int64_t> strides(sizes.size(), 1);
  for (std::size_t d = sizes.size(); d-- > 1;) {
    strides[d - 1] = strides[d] * sizes[d];
  }
  return strides;
}

void restride_subtree(Block* block, const std::string& buffer,
                      const std::vector<std::int64_t>& strides) {
  for (auto& ref : block->refinements) {
    if (ref.buffer == buffer) ref.strides = strides;
  }
  for (auto& stmt : block->stmts) {
    if (stmt.is_block()) restride_subtree(&stmt.block(), buffer, strides);
  }
}

// Pairwise-disjoint per-iteration windows: sufficient for scoping the buffer
// to a single iteration. Offsets must not involve parent aliases; constraints
// that do are ignored, which only adds windows and stays conservative.
bool windows_disjoint(const Block& child, const Refinement& ref) {
  for (const auto& offset : ref.offsets) {
    for (const auto& [name, coeff] : offset.terms()) {
      (void)coeff;
      const Index* idx = child.find_index(name);
      if (idx == nullptr || idx->is_alias()) return false;
    }
  }
  Block box;
  box.indexes = child.indexes;
  for (const auto& constraint : child.constraints) {
    bool own_only = true;
    for (const auto& [name, coeff] : constraint.expr.terms()) {
      (void)coeff;
      const Index* idx = child.find_index(name);
      if (idx == nullptr || idx->is_alias()) own_only = false;
    }
    if (own_only) box.constraints.push_back(constraint);
  }
  std::erase_if(box.indexes, [](const Index& idx) { return idx.is_alias(); });
  std::unordered_set<std::int64_t> cells;
  std::vector<std::int64_t> spans(ref.rank());
  std::vector<std::int64_t> mins(ref.rank());
  // conservative global bounds for a collision-free flat encoding
  for (std::size_t d = 0; d < ref.rank(); d++) {
    std::int64_t lo = ref.offsets[d].constant();
    std::int64_t hi = lo;
    for (const auto& [name, coeff] : ref.offsets[d].terms()) {
      std::int64_t extent = child.find_index(name)->range - 1;
      if (coeff > 0) {
        hi += coeff * extent;
      } else {
        lo += coeff * extent;
      }
    }
    mins[d] = lo;
    spans[d] = hi - lo + ref.sizes[d];
  }
  for (const auto& point : enumerate_points(box)) {
    std::vector<std::int64_t> base(ref.rank());
    for (std::size_t d = 0; d < ref.rank(); d++) {
      base[d] = affine_eval(ref.offsets[d], point);
    }
    std::vector<std::int64_t> w(ref.rank(), 0);
    for (;;) {
      std::int64_t flat = 0;
      for (std::size_t d = 0; d < ref.rank(); d++) {
        flat = flat * spans[d] + (base[d] + w[d] - mins[d]);
      }
      if (!cells.insert(flat).second) return false;
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
  return true;
}

}  // namespace

Block localize(const Block& block, const std::set<std::string>& parent_buffers) {
  Block out = block;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t r = 0; r < out.refinements.size(); r++) {
      const std::string name = out.refinements[r].buffer;
      if (parent_buffers.count(name)) continue;  // not a local buffer
      // exactly one referencing statement, and it must be a child block
      int ref_stmt = -1;
      bool multiple = false;
      for (std::size_t k = 0; k < out.stmts.size(); k++) {
        const Statement& stmt = out.stmts[k];
        bool references = false;
        if (const auto* load = std::get_if<Load>(&stmt.node)) {
          references = load->from == name;
        } else if (const auto* store = std::get_if<Store>(&stmt.node)) {
          references = store->into == name;
        } else if (const auto* special = std::get_if<Special>(&stmt.node)) {
          references = std::count(special->args.begin(), special->args.end(), name) > 0;
        } else {
          references = subtree_refines(stmt.block(), name);
        }
        if (references) {
          multiple = ref_stmt >= 0;
          if (multiple) break;
          ref_stmt = static_cast<int>(k);
        }
      }
      if (multiple || ref_stmt < 0) continue;
      Statement& target = out.stmts[ref_stmt];
      if (!target.is_block()) continue;
      Block& child = target.block();
      Refinement* window = child.find_refinement(name);
      if (window == nullptr) continue;
      if (!windows_disjoint(child, *window)) continue;
      // Move: the child's window becomes a per-iteration allocation.
      window->offsets.assign(window->rank(), Affine(0));
      std::vector<std::int64_t> strides = dense_strides(window->sizes);
      window->strides = strides;
      for (auto& stmt : child.stmts) {
        if (stmt.is_block()) restride_subtree(&stmt.block(), name, strides);
      }
      out.refinements.erase(out.refinements.begin() + static_cast<std::ptrdiff_t>(r));
      changed = true;
      break;
    }
  }
  std::set<std::string> own;
  for (const auto& ref : out.refinements) {
    own.insert(ref.buffer);
  }
  for (auto& stmt : out.stmts) {
    if (stmt.is_block()) {
      stmt.node = localize(stmt.block(), own);
    }
  }
  return out;
}

Block schedule(const Block& block, const HardwareConfig& hw, const std::string& unit,
               std::vector<Diagnostic>* diags) {
  Block out = block;
  DependencyDag dag = build_dependency_dag(out);
  int n = dag.num_stmts;
  std::vector<int> indegree(n, 0);
  for (const auto& edge : dag.edges) {
    indegree[edge.to]++;
  }
  std::set<int> ready;
  for (int s = 0; s < n; s++) {
    if (indegree[s] == 0) ready.insert(s);
  }
  std::vector<int> order;
  int last = -1;
  while (!ready.empty()) {
    int pick = -1;
    if (last >= 0) {
      // keep consumers adjacent to their producer
      for (const auto& edge : dag.edges) {
        if (edge.from == last && edge.kind == DepEdge::Kind::True && ready.count(edge.to)) {
          if (pick < 0 || edge.to < pick) pick = edge.to;
        }
      }
    }
    if (pick < 0) pick = *ready.begin();
    ready.erase(pick);
    order.push_back(pick);
    last = pick;
    for (const auto& edge : dag.edges) {
      if (edge.from == pick && --indegree[edge.to] == 0) {
        ready.insert(edge.to);
      }
    }
  }
  std::vector<Statement> stmts;
  stmts.reserve(out.stmts.size());
  for (int s : order) {
    stmts.push_back(std::move(out.stmts[s]));
  }
  out.stmts = std::move(stmts);

  const MemUnit* mem = nullptr;
  if (!unit.empty()) {
    mem = hw.find_mem(unit);
  } else if (!hw.mem_units.empty()) {
    mem = &hw.mem_units.front();
  }
  if (mem == nullptr) {
    if (diags) {
      diags->push_back({Diagnostic::Severity::Warning, "NoMemoryUnit",
                        "schedule has no memory unit to place into", out.span});
    }
    return out;
  }

  // First-fit placement of unplaced child refinements over buffer live ranges.
  std::map<std::string, std::pair<int, int>> live;
  for (int k = 0; k < static_cast<int>(out.stmts.size()); k++) {
    if (!out.stmts[k].is_block()) continue;
    for (const auto& ref : out.stmts[k].block().refinements) {
      auto [it, fresh] = live.try_emplace(ref.buffer, std::make_pair(k, k));
      if (!fresh) it->second.second = k;
    }
  }
  struct Placed {
    std::int64_t begin;
    std::int64_t end;
    int live_begin;
    int live_end;
  };
  std::vector<Placed> placed;
  for (int k = 0; k < static_cast<int>(out.stmts.size()); k++) {
    if (!out.stmts[k].is_block()) continue;
    for (auto& ref : out.stmts[k].block().refinements) {
      if (ref.location) continue;
      auto range = live.at(ref.buffer);
      std::int64_t size = ref.elements();
      std::int64_t addr = 0;
      bool moved = true;
      while (moved) {
        moved = false;
        for (const auto& p : placed) {
          bool live_overlap = !(range.second < p.live_begin || p.live_end < range.first);
          if (live_overlap && addr < p.end && p.begin < addr + size) {
            addr = p.end;
            moved = true;
          }
        }
      }
      if (addr + size > mem->capacity) {
        if (diags) {
          diags->push_back({Diagnostic::Severity::Warning, "CapacityExceeded",
                            "no room in unit '" + mem->name + "' for '" + ref.buffer + "'",
                            ref.span});
        }
        continue;
      }
      placed.push_back({addr, addr + size, range.first, range.second});
      ref.location = Location{mem->name, Affine(0), addr};
    }
  }
  return out;
}

namespace {

// Applies `name -> name + shift` to everything on the block that lives in
// its own index scope: constraints, refinement offsets, location banks and
// the immediate children's alias targets.
void shift_own_scope(Block* block, const std::map<std::string, Affine>& shift) {
  for (auto& constraint : block->constraints) {
    constraint.expr = affine_substitute(constraint.expr, shift);
  }
  for (auto& ref : block->refinements) {
    for (auto& offset : ref.offsets) {
      offset = affine_substitute(offset, shift);
    }
    if (ref.location) {
      ref.location->bank = affine_substitute(ref.location->bank, shift);
    }
  }
  for (auto& stmt : block->stmts) {
    if (!stmt.is_block()) continue;
    for (auto& idx : stmt.block().indexes) {
      if (idx.is_alias()) {
        idx.alias = affine_substitute(*idx.alias, shift);
      }
    }
  }
}

Block make_piece(const Block& block, const std::vector<std::pair<std::int64_t, std::int64_t>>& bounds,
                 bool keep_constraints) {
  Block piece = block;
  piece.annotation.reset();
  std::map<std::string, Affine> shift;
  std::size_t r = 0;
  for (auto& idx : piece.indexes) {
    if (idx.is_alias()) continue;
    auto [lo, hi] = bounds[r++];
    idx.range = hi - lo + 1;
    if (lo != 0) {
      shift[idx.name] = Affine(idx.name) + lo;
    }
  }
  if (!keep_constraints) piece.constraints.clear();
  if (!shift.empty()) shift_own_scope(&piece, shift);
  return piece;
}

}  // namespace

std::vector<Block> separate_boundary(const Block& block) {
  if (block.constraints.empty()) return {block};
  std::vector<const Index*> ranged;
  for (const auto& idx : block.indexes) {
    if (!idx.is_alias()) ranged.push_back(&idx);
  }
  std::map<std::string, std::size_t> position;
  for (std::size_t r = 0; r < ranged.size(); r++) {
    position[ranged[r]->name] = r;
  }
  for (const auto& constraint : block.constraints) {
    for (const auto& [name, coeff] : constraint.expr.terms()) {
      (void)coeff;
      if (position.count(name) == 0) return {block};  // alias-dependent constraint
    }
  }

  // Shrink per-index interior bounds until every constraint holds over the
  // whole interior box; tighten the widest participating index first.
  std::vector<std::int64_t> lo(ranged.size(), 0);
  std::vector<std::int64_t> hi(ranged.size());
  for (std::size_t r = 0; r < ranged.size(); r++) {
    hi[r] = ranged[r]->range - 1;
  }
  for (;;) {
    bool all_ok = true;
    for (const auto& constraint : block.constraints) {
      std::int64_t worst = constraint.expr.constant();
      for (const auto& [name, coeff] : constraint.expr.terms()) {
        std::size_t r = position.at(name);
        worst += coeff * (coeff > 0 ? lo[r] : hi[r]);
      }
      if (worst >= 0) continue;
      all_ok = false;
      if (constraint.expr.terms().empty()) {
        throw PassError("NoInteriorRegion", "constant constraint is never satisfied");
      }
      std::size_t pick = 0;
      std::int64_t pick_span = -1;
      std::int64_t pick_coeff = 0;
      for (const auto& [name, coeff] : constraint.expr.terms()) {
        std::size_t r = position.at(name);
        std::int64_t span = hi[r] - lo[r];
        if (span > pick_span) {
          pick_span = span;
          pick = r;
          pick_coeff = coeff;
        }
      }
      std::int64_t need = -worst;  // raise the worst case to zero
      if (pick_coeff > 0) {
        lo[pick] += (need + pick_coeff - 1) / pick_coeff;
      } else {
        hi[pick] -= (need - pick_coeff - 1) / -pick_coeff;
      }
      if (lo[pick] > hi[pick]) {
        throw PassError("NoInteriorRegion", "constraint tightening emptied the interior");
      }
      break;
    }
    if (all_ok) break;
  }

  std::vector<Block> pieces;
  std::vector<std::pair<std::int64_t, std::int64_t>> interior(ranged.size());
  for (std::size_t r = 0; r < ranged.size(); r++) {
    interior[r] = {lo[r], hi[r]};
  }
  pieces.push_back(make_piece(block, interior, /*keep_constraints=*/false));
  // Boundary strips: dims before d pinned to the interior, dim d outside it,
  // later dims full; the strips plus the interior tile the original box.
  for (std::size_t d = 0; d < ranged.size(); d++) {
    auto strip = interior;
    for (std::size_t later = d + 1; later < ranged.size(); later++) {
      strip[later] = {0, ranged[later]->range - 1};
    }
    if (lo[d] > 0) {
      strip[d] = {0, lo[d] - 1};
      pieces.push_back(make_piece(block, strip, /*keep_constraints=*/true));
    }
    if (hi[d] < ranged[d]->range - 1) {
      strip[d] = {hi[d] + 1, ranged[d]->range - 1};
      pieces.push_back(make_piece(block, strip, /*keep_constraints=*/true));
    }
  }
  return pieces;
}

Block transpose_layout(const Block& block, const std::string& buffer,
                       const std::vector<std::size_t>& order,
                       const std::set<std::string>& parent_buffers) {
  const Refinement* ref = block.find_refinement(buffer);
  if (ref == nullptr) {
    throw PassError("UnknownBuffer", "no refinement '" + buffer + "' on this block");
  }
  if (parent_buffers.count(buffer)) {
    throw PassError("ExternalBufferImmutable",
                    "buffer '" + buffer + "' is a window onto an outer buffer");
  }
  std::size_t rank = ref->rank();
  std::vector<bool> seen(rank, false);
  if (order.size() != rank) {
    throw PassError("BadPermutation", "dimension order length mismatch");
  }
  for (std::size_t d : order) {
    if (d >= rank || seen[d]) {
      throw PassError("BadPermutation", "dimension order is not a permutation");
    }
    seen[d] = true;
  }
  // stride of dim d = product of sizes of dims after d in the new order
  std::vector<std::int64_t> strides(rank, 1);
  std::int64_t running = 1;
  for (std::size_t p = rank; p-- > 0;) {
    strides[order[p]] = running;
    running *= ref->sizes[order[p]];
  }
  if (strides == ref->strides) return block;
  Block out = block;
  restride_subtree(&out, buffer, strides);
  return out;
}

namespace {

std::int64_t count_blocks(const Block& block) {
  std::int64_t count = 1;
  for (const auto& stmt : block.stmts) {
    if (stmt.is_block()) count += count_blocks(stmt.block());
  }
  return count;
}

std::set<std::string> scope_above(const Program& program, const std::string& path) {
  std::set<std::string> names;
  if (path.empty()) {
    for (const auto& [name, decl] : program.buffers) {
      (void)decl;
      names.insert(name);
    }
    return names;
  }
  const Block* cur = &program.root;
  std::istringstream is(path);
  std::string piece;
  while (std::getline(is, piece, '.')) {
    for (const auto& ref : cur->refinements) {
      names.insert(ref.buffer);
    }
    cur = &cur->stmts.at(std::stoul(piece)).block();
  }
  return names;
}

std::vector<std::string> kernel_paths(const Program& program, const PassConfig& cfg) {
  if (cfg.params.count("block")) {
    return {cfg.param("block")};
  }
  std::vector<std::string> paths;
  for (std::size_t k = 0; k < program.root.stmts.size(); k++) {
    if (program.root.stmts[k].is_block()) {
      paths.push_back(std::to_string(k));
    }
  }
  return paths;
}

void boundary_walk(Block* block) {
  for (auto& stmt : block->stmts) {
    if (stmt.is_block()) boundary_walk(&stmt.block());
  }
  std::vector<Statement> stmts;
  for (auto& stmt : block->stmts) {
    if (stmt.is_block() && !stmt.block().constraints.empty()) {
      for (auto& piece : separate_boundary(stmt.block())) {
        Statement s;
        s.span = stmt.span;
        s.node = std::move(piece);
        stmts.push_back(std::move(s));
      }
    } else {
      stmts.push_back(std::move(stmt));
    }
  }
  block->stmts = std::move(stmts);
}

}  // namespace

PipelineResult apply_pipeline(const Program& program, const Pipeline& pipeline,
                              const HardwareConfig& hw) {
  PipelineResult result;
  result.program = program;
  auto fail = [&](const std::string& code, const std::string& message) {
    result.ok = false;
    result.diags.push_back({Diagnostic::Severity::Error, code, message, {}});
    return result;
  };
  for (const auto& cfg : pipeline.passes) {
    std::ostringstream report;
    report << "pass=" << cfg.name;
    try {
      if (cfg.name == "autotile") {
        const MemUnit* mem = hw.find_mem(cfg.param("unit"));
        CacheModel cm;
        AutotileOptions opts;
        if (mem != nullptr) {
          cm = {mem->line, mem->capacity};
          opts.mem_cap = mem->capacity;
        } else {
          cm = {cfg.param_int("line", 8), cfg.param_int("cap", 512)};
          opts.mem_cap = cm.capacity;
        }
        opts.mem_cap = cfg.param_int("mem_cap", opts.mem_cap);
        opts.power_of_two = cfg.param_int("power_of_two", 0) != 0;
        opts.divisors_only = cfg.param_int("divisors_only", 1) != 0;
        if (cfg.params.count("tiles")) {
          opts.pinned = parse_tile_shape(cfg.param("tiles"));
        }
        for (const auto& path : kernel_paths(result.program, cfg)) {
          Block* target = block_at_path(&result.program.root, path);
          if (target == nullptr) return fail("PassFailed", "bad block path '" + path + "'");
          AutotileResult at = autotile(*target, cm, opts);
          *target = std::move(at.block);
          for (auto& diag : at.diags) result.diags.push_back(diag);
          if (at.chosen) {
            report << " tile=" << at.chosen->to_string() << " " << at.report.to_string();
          } else {
            report << " tile=none";
          }
          report << " candidates=" << at.candidates << " excluded=" << at.excluded;
        }
      } else if (cfg.name == "stencil") {
        std::vector<StencilSpec> specs;
        std::string unit = cfg.param("unit");
        for (const auto& cu : hw.compute_units) {
          if (cu.stencil && (unit.empty() || cu.name == unit)) {
            specs.push_back(*cu.stencil);
          }
        }
        for (const auto& path : kernel_paths(result.program, cfg)) {
          Block* target = block_at_path(&result.program.root, path);
          if (target == nullptr) return fail("PassFailed", "bad block path '" + path + "'");
          *target = stencil_match(*target, specs);
        }
        report << " specs=" << specs.size();
      } else if (cfg.name == "partition") {
        for (const auto& path : kernel_paths(result.program, cfg)) {
          Block* target = block_at_path(&result.program.root, path);
          if (target == nullptr) return fail("PassFailed", "bad block path '" + path + "'");
          *target = partition(*target, cfg.param("index"), cfg.param_int("n", 1),
                              cfg.param("unit", "bank"));
        }
        report << " index=" << cfg.param("index") << " n=" << cfg.param_int("n", 1);
      } else if (cfg.name == "fuse") {
        Block* target = block_at_path(&result.program.root, cfg.param("block"));
        if (target == nullptr) return fail("PassFailed", "bad block path");
        std::size_t i = static_cast<std::size_t>(cfg.param_int("i", 0));
        std::size_t j = static_cast<std::size_t>(cfg.param_int("j", 1));
        auto fused = fuse(*target, i, j);
        if (const auto* refusal = std::get_if<Refusal>(&fused)) {
          report << " refused=" << refusal->reason;
        } else {
          target->stmts[i].node = std::move(std::get<Block>(fused));
          target->stmts.erase(target->stmts.begin() + static_cast<std::ptrdiff_t>(j));
          report << " fused=" << i << "+" << j;
        }
      } else if (cfg.name == "scalarize") {
        result.program.root = scalarize(result.program.root, scope_above(result.program, ""));
      } else if (cfg.name == "localize") {
        result.program.root = localize(result.program.root, scope_above(result.program, ""));
      } else if (cfg.name == "schedule") {
        Block* target = block_at_path(&result.program.root, cfg.param("block"));
        if (target == nullptr) return fail("PassFailed", "bad block path");
        *target = schedule(*target, hw, cfg.param("unit"), &result.diags);
      } else if (cfg.name == "separate_boundary") {
        Block* target = block_at_path(&result.program.root, cfg.param("block"));
        if (target == nullptr) return fail("PassFailed", "bad block path");
        boundary_walk(target);
      } else if (cfg.name == "transpose") {
        std::string path = cfg.param("block");
        Block* target = block_at_path(&result.program.root, path);
        if (target == nullptr) return fail("PassFailed", "bad block path");
        std::vector<std::size_t> order;
        std::istringstream is(cfg.param("order"));
        std::string piece;
        while (std::getline(is, piece, ',')) {
          order.push_back(std::stoul(piece));
        }
        *target = transpose_layout(*target, cfg.param("buffer"), order,
                                   scope_above(result.program, path));
      } else {
        return fail("UnknownPass", "unknown pass '" + cfg.name + "'");
      }
    } catch (const PassError& err) {
      return fail("PassFailed", "pass '" + cfg.name + "': " + err.what());
    }
    rebind_buffers(&result.program);
    auto diags = validate_static(result.program);
    if (has_errors(diags)) {
      for (auto& diag : diags) result.diags.push_back(diag);
      return fail("PassFailed", "pass '" + cfg.name + "' produced an invalid program");
    }
    report << " blocks=" << count_blocks(result.program.root);
    result.reports.push_back(report.str());
  }
  return result;
}

}  // namespace stripe
