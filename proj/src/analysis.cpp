// Copyright 2026, Stripe Kit authors.
#include "stripe/analysis.h"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace stripe {

Footprint footprint(const Refinement& ref, const Block& block, bool exact,
                    const IndexEnv& parent_env) {
  Footprint fp;
  fp.buffer = ref.buffer;
  fp.exact = exact;
  std::size_t rank = ref.rank();
  fp.dims.resize(rank);
  if (exact) {
    auto points = enumerate_points(block, parent_env);
    bool first = true;
    std::vector<std::int64_t> offsets(rank);
    for (const auto& point : points) {
      for (std::size_t d = 0; d < rank; d++) {
        offsets[d] = affine_eval(ref.offsets[d], point);
        if (first || offsets[d] < fp.dims[d].lo) fp.dims[d].lo = offsets[d];
        if (first || offsets[d] > fp.dims[d].hi) fp.dims[d].hi = offsets[d];
      }
      first = false;
      std::vector<std::int64_t> coords(rank, 0);
      for (;;) {
        std::vector<std::int64_t> elem(rank);
        for (std::size_t d = 0; d < rank; d++) {
          elem[d] = offsets[d] + coords[d];
        }
        fp.elems.insert(std::move(elem));
        std::size_t d = rank;
        bool done = true;
        while (d > 0) {
          d--;
          if (++coords[d] < ref.sizes[d]) {
            done = false;
            break;
          }
          coords[d] = 0;
        }
        if (done) break;
      }
    }
    fp.count = static_cast<std::int64_t>(fp.elems.size());
  } else {
    fp.count = 1;
    for (std::size_t d = 0; d < rank; d++) {
      std::int64_t lo = ref.offsets[d].constant();
      std::int64_t hi = lo;
      std::int64_t step = 0;
      for (const auto& [name, coeff] : ref.offsets[d].terms()) {
        const Index* idx = block.find_index(name);
        if (idx != nullptr && !idx->is_alias()) {
          if (coeff > 0) {
            hi += coeff * (idx->range - 1);
          } else {
            lo += coeff * (idx->range - 1);
          }
          step = std::gcd(step, coeff < 0 ? -coeff : coeff);
        } else {
          // alias or free name: needs a parent environment to pin down
          auto it = parent_env.end();
          if (idx != nullptr && idx->is_alias()) {
            std::int64_t value = affine_eval(*idx->alias, parent_env);
            lo += coeff * value;
            hi += coeff * value;
          } else if ((it = parent_env.find(name)) != parent_env.end()) {
            lo += coeff * it->second;
            hi += coeff * it->second;
          } else {
            throw UnboundIndex(name);
          }
        }
      }
      fp.dims[d] = {lo, hi, step, ref.sizes[d]};
      fp.count *= hi + ref.sizes[d] - lo;
    }
  }
  // dim metadata for exact mode
  if (exact) {
    for (std::size_t d = 0; d < rank; d++) {
      fp.dims[d].size = ref.sizes[d];
      std::int64_t step = 0;
      for (const auto& [name, coeff] : ref.offsets[d].terms()) {
        const Index* idx = block.find_index(name);
        if (idx != nullptr && !idx->is_alias()) {
          step = std::gcd(step, coeff < 0 ? -coeff : coeff);
        }
      }
      fp.dims[d].step = step;
    }
  }
  return fp;
}

bool regions_overlap(const Footprint& a, const Footprint& b) {
  if (a.buffer != b.buffer) {
    throw DifferentBuffers();
  }
  if (a.exact && b.exact) {
    const auto& small = a.elems.size() <= b.elems.size() ? a : b;
    const auto& large = a.elems.size() <= b.elems.size() ? b : a;
    for (const auto& elem : small.elems) {
      if (large.elems.count(elem)) return true;
    }
    return false;
  }
  if (a.dims.size() != b.dims.size()) {
    throw DifferentBuffers();
  }
  for (std::size_t d = 0; d < a.dims.size(); d++) {
    if (a.region_end(d) <= b.region_begin(d) || b.region_end(d) <= a.region_begin(d)) {
      return false;
    }
  }
  return true;
}

namespace {

std::int64_t floor_div64(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) q--;
  return q;
}

}  // namespace

std::int64_t count_cache_lines(const Footprint& fp, const std::vector<std::int64_t>& strides,
                               const CacheModel& cm, std::int64_t base_offset) {
  std::set<std::int64_t> lines;
  if (fp.exact) {
    for (const auto& elem : fp.elems) {
      std::int64_t flat = base_offset;
      for (std::size_t d = 0; d < strides.size(); d++) {
        flat += strides[d] * elem[d];
      }
      lines.insert(floor_div64(flat, cm.line));
    }
    return static_cast<std::int64_t>(lines.size());
  }
  // Box mode: per-dimension coordinate lists, then the cartesian product.
  std::vector<std::vector<std::int64_t>> coords(fp.dims.size());
  for (std::size_t d = 0; d < fp.dims.size(); d++) {
    std::set<std::int64_t> vals;
    std::int64_t step = fp.dims[d].step == 0 ? fp.dims[d].hi - fp.dims[d].lo + 1 : fp.dims[d].step;
    if (step <= 0) step = 1;
    for (std::int64_t off = fp.dims[d].lo; off <= fp.dims[d].hi; off += step) {
      for (std::int64_t w = 0; w < fp.dims[d].size; w++) {
        vals.insert(off + w);
      }
    }
    coords[d].assign(vals.begin(), vals.end());
  }
  std::vector<std::size_t> pos(coords.size(), 0);
  for (;;) {
    std::int64_t flat = base_offset;
    for (std::size_t d = 0; d < coords.size(); d++) {
      flat += strides[d] * coords[d][pos[d]];
    }
    lines.insert(floor_div64(flat, cm.line));
    std::size_t d = coords.size();
    bool done = true;
    while (d > 0) {
      d--;
      if (++pos[d] < coords[d].size()) {
        done = false;
        break;
      }
      pos[d] = 0;
    }
    if (done || coords.empty()) break;
  }
  return static_cast<std::int64_t>(lines.size());
}

bool DependencyDag::has_edge(int from, int to) const {
  for (const auto& edge : edges) {
    if (edge.from == from && edge.to == to) return true;
  }
  return false;
}

std::string DependencyDag::to_dot() const {
  std::ostringstream os;
  os << "digraph deps {\n";
  for (int i = 0; i < num_stmts; i++) {
    os << "  s" << i << ";\n";
  }
  for (const auto& edge : edges) {
    const char* kind = edge.kind == DepEdge::Kind::True    ? "true"
                       : edge.kind == DepEdge::Kind::Anti ? "anti"
                                                          : "output";
    os << "  s" << edge.from << " -> s" << edge.to << " [label=\"" << edge.buffer << " " << kind
       << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

namespace {

// Access region of one statement for one buffer, at a shared iteration point
// of the owning block: a symbolic base over names shared between statements
// (the owner's indexes and inner alias targets) plus a constant interval
// from the statement's own inner indexes and window sizes.
struct Region {
  std::vector<Affine> base;
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;  // inclusive
};

struct StmtAccess {
  std::map<std::string, Region> reads;
  std::map<std::string, Region> writes;
  std::set<std::string> temp_defs;
  std::set<std::string> temp_uses;
};

Region region_at_shared_point(const Refinement& ref, const Block* inner) {
  Region region;
  std::size_t rank = ref.rank();
  region.base.resize(rank);
  region.lo.assign(rank, 0);
  region.hi.assign(rank, 0);
  // Rename the inner block's ranged indexes first so alias targets in the
  // shared scope cannot be captured by shadowing inner names.
  std::map<std::string, Affine> rename;
  std::map<std::string, std::int64_t> inner_ranges;
  if (inner != nullptr) {
    for (const auto& idx : inner->indexes) {
      if (!idx.is_alias()) {
        std::string sym = "\t" + idx.name;  // tab prefix cannot collide with parsed names
        rename.emplace(idx.name, Affine(sym));
        inner_ranges.emplace(sym, idx.range);
      }
    }
    for (const auto& idx : inner->indexes) {
      if (idx.is_alias()) rename.emplace(idx.name, *idx.alias);
    }
  }
  for (std::size_t d = 0; d < rank; d++) {
    Affine offset = ref.offsets[d];
    if (inner != nullptr) {
      offset = affine_substitute(offset, rename);
      Affine base = offset.constant();
      for (const auto& [name, coeff] : offset.terms()) {
        auto it = inner_ranges.find(name);
        if (it != inner_ranges.end()) {
          if (coeff > 0) {
            region.hi[d] += coeff * (it->second - 1);
          } else {
            region.lo[d] += coeff * (it->second - 1);
          }
        } else {
          base += Affine(name, coeff);
        }
      }
      region.base[d] = base;
    } else {
      region.base[d] = offset;
    }
    region.hi[d] += ref.sizes[d] - 1;
  }
  return region;
}

bool regions_conflict(const Region& a, const Region& b) {
  if (a.base.size() != b.base.size()) return true;
  for (std::size_t d = 0; d < a.base.size(); d++) {
    Affine diff = a.base[d] - b.base[d];
    if (!diff.is_constant()) continue;  // symbolic mismatch: assume overlap in this dim
    std::int64_t c = diff.constant();
    // overlap iff 0 in [c + a.lo - b.hi, c + a.hi - b.lo]
    if (c + a.lo[d] - b.hi[d] > 0 || c + a.hi[d] - b.lo[d] < 0) {
      return false;
    }
  }
  return true;
}

StmtAccess stmt_access(const Block& owner, const Statement& stmt) {
  StmtAccess access;
  auto add = [&](const std::string& name, Dir dir, Region region) {
    if (dir == Dir::In || dir == Dir::InOut) {
      access.reads.emplace(name, region);
    }
    if (dir == Dir::Out || dir == Dir::InOut) {
      access.writes.emplace(name, region);
    }
  };
  if (const auto* load = std::get_if<Load>(&stmt.node)) {
    if (const Refinement* ref = owner.find_refinement(load->from)) {
      add(load->from, Dir::In, region_at_shared_point(*ref, nullptr));
    }
    access.temp_defs.insert(load->into);
  } else if (const auto* store = std::get_if<Store>(&stmt.node)) {
    if (const Refinement* ref = owner.find_refinement(store->into)) {
      add(store->into, Dir::Out, region_at_shared_point(*ref, nullptr));
    }
    access.temp_uses.insert(store->from);
  } else if (const auto* intr = std::get_if<Intrinsic>(&stmt.node)) {
    for (const auto& arg : intr->args) {
      if (const auto* temp = std::get_if<std::string>(&arg)) {
        access.temp_uses.insert(*temp);
      }
    }
    access.temp_defs.insert(intr->into);
  } else if (const auto* special = std::get_if<Special>(&stmt.node)) {
    for (std::size_t i = 0; i < special->args.size(); i++) {
      if (const Refinement* ref = owner.find_refinement(special->args[i])) {
        add(special->args[i], i == 0 ? Dir::Out : Dir::In, region_at_shared_point(*ref, nullptr));
      }
    }
  } else {
    const Block& child = stmt.block();
    for (const auto& ref : child.refinements) {
      if (owner.find_refinement(ref.buffer) == nullptr) continue;  // local allocation
      add(ref.buffer, ref.dir, region_at_shared_point(ref, &child));
    }
  }
  return access;
}

}  // namespace

DependencyDag build_dependency_dag(const Block& block) {
  DependencyDag dag;
  dag.num_stmts = static_cast<int>(block.stmts.size());
  std::vector<StmtAccess> accesses;
  accesses.reserve(block.stmts.size());
  for (const auto& stmt : block.stmts) {
    accesses.push_back(stmt_access(block, stmt));
  }
  for (int s = 0; s < dag.num_stmts; s++) {
    for (int t = s + 1; t < dag.num_stmts; t++) {
      std::set<std::string> reported;
      auto consider = [&](const std::map<std::string, Region>& from,
                          const std::map<std::string, Region>& to, DepEdge::Kind kind) {
        for (const auto& [name, region] : from) {
          if (reported.count(name)) continue;
          auto it = to.find(name);
          if (it != to.end() && regions_conflict(region, it->second)) {
            dag.edges.push_back({s, t, name, kind});
            reported.insert(name);
          }
        }
      };
      consider(accesses[s].writes, accesses[t].reads, DepEdge::Kind::True);
      consider(accesses[s].reads, accesses[t].writes, DepEdge::Kind::Anti);
      consider(accesses[s].writes, accesses[t].writes, DepEdge::Kind::Output);
      for (const auto& temp : accesses[s].temp_defs) {
        if (accesses[t].temp_uses.count(temp)) {
          dag.edges.push_back({s, t, temp, DepEdge::Kind::True});
        } else if (accesses[t].temp_defs.count(temp)) {
          dag.edges.push_back({s, t, temp, DepEdge::Kind::Output});
        }
      }
      for (const auto& temp : accesses[s].temp_uses) {
        if (accesses[t].temp_defs.count(temp)) {
          dag.edges.push_back({s, t, temp, DepEdge::Kind::Anti});
        }
      }
    }
  }
  return dag;
}

}  // namespace stripe
