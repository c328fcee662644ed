// Copyright 2026, Stripe Kit authors.
#include "stripe/interp.h"

#include <algorithm>
#include <deque>
#include <memory>
#include <numeric>
#include <optional>

namespace stripe {

std::vector<IterationPoint> enumerate_points(const Block& block, const IndexEnv& parent_env) {
  std::vector<IterationPoint> points;
  IndexEnv env;
  std::vector<const Index*> ranged;
  for (const auto& idx : block.indexes) {
    if (idx.is_alias()) {
      env[idx.name] = affine_eval(*idx.alias, parent_env);
    } else {
      ranged.push_back(&idx);
    }
  }
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
    if (ok) {
      points.push_back(env);
    }
    // odometer, last index fastest
    std::size_t d = ranged.size();
    while (d > 0) {
      d--;
      if (++coords[d] < ranged[d]->range) break;
      coords[d] = 0;
      if (d == 0) return points;
    }
    if (ranged.empty()) return points;
  }
}

namespace {

// splitmix64; used instead of std::shuffle's URBG path so shuffled iteration
// orders are reproducible across standard library implementations.
std::uint64_t mix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct CAffine {
  std::int64_t constant = 0;
  std::vector<std::pair<int, std::int64_t>> terms;  // env slot, coefficient

  std::int64_t eval(const std::vector<std::int64_t>& env) const {
    std::int64_t total = constant;
    for (const auto& [slot, coeff] : terms) {
      total += coeff * env[slot];
    }
    return total;
  }
};

struct CRef {
  const Refinement* ref = nullptr;
  int parent = -1;  // view index in the parent frame; -1 for external/alloc
  bool external = false;
  bool alloc = false;
  CAffine flat_base;
  std::int64_t alloc_elems = 0;
  AggOp agg = AggOp::Assign;
  DType dtype = DType::i32;
};

enum class IntrOp {
  Add, Sub, Mul, Neg, Max, Min,
  CmpEq, CmpNe, CmpLt, CmpLe, CmpGt, CmpGe,
  Select, Constant,
};

struct COperand {
  bool imm = false;
  std::int64_t value = 0;  // immediate or temp slot
};

struct CLoad {
  int view = 0;
  int temp = 0;
};
struct CStoreStmt {
  int view = 0;
  int temp = 0;
};
struct CIntr {
  IntrOp op;
  int temp = 0;
  std::vector<COperand> args;
};
struct CSpecial {
  bool gather = false;
  int dst = 0;
  int src = 0;
  int idx = 0;
};

struct CBlock;

struct CStmt {
  std::variant<CLoad, CStoreStmt, CIntr, CSpecial, std::unique_ptr<CBlock>> node;
  const Statement* stmt = nullptr;
};

struct CBlock {
  const Block* block = nullptr;
  std::vector<std::pair<int, std::int64_t>> ranged;  // slot, range
  std::vector<std::pair<int, CAffine>> aliases;      // slot, expr over parent slots
  std::vector<CAffine> constraints;
  std::vector<CRef> refs;
  std::vector<CStmt> stmts;
  int num_temps = 0;
  int env_size = 0;
};

struct RtView {
  Buffer* buffer = nullptr;
  std::int64_t base = 0;
  const CRef* cref = nullptr;
  int depth = 0;
};

struct Frame {
  const CBlock* cb = nullptr;
  std::vector<RtView> views;
  std::vector<std::int64_t> temps;
  std::vector<std::unique_ptr<Buffer>> allocs;
  std::int64_t ordinal = 0;
};

std::optional<IntrOp> intr_from_string(const std::string& name) {
  if (name == "add") return IntrOp::Add;
  if (name == "sub") return IntrOp::Sub;
  if (name == "mul") return IntrOp::Mul;
  if (name == "neg") return IntrOp::Neg;
  if (name == "max") return IntrOp::Max;
  if (name == "min") return IntrOp::Min;
  if (name == "cmp_eq") return IntrOp::CmpEq;
  if (name == "cmp_ne") return IntrOp::CmpNe;
  if (name == "cmp_lt") return IntrOp::CmpLt;
  if (name == "cmp_le") return IntrOp::CmpLe;
  if (name == "cmp_gt") return IntrOp::CmpGt;
  if (name == "cmp_ge") return IntrOp::CmpGe;
  if (name == "select") return IntrOp::Select;
  if (name == "constant") return IntrOp::Constant;
  return std::nullopt;
}

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

class Executor {
 public:
  Executor(const Program& program, BufferStore* store, const ExecOptions& opts)
      : program_(program), store_(store), opts_(opts) {}

  void run() {
    for (const auto& [name, decl] : program_.buffers) {
      auto it = store_->find(name);
      if (it == store_->end()) {
        throw ExecError("MissingBuffer", "buffer '" + name + "' not present in store");
      }
      if (static_cast<std::int64_t>(it->second.data.size()) != decl.elements) {
        throw ExecError("MissingBuffer",
                        "buffer '" + name + "' has " + std::to_string(it->second.data.size()) +
                            " elements, expected " + std::to_string(decl.elements));
      }
    }
    std::map<std::string, int> no_views;
    auto root = compile(program_.root, 0, no_views);
    run_block(*root, -1);
  }

 private:
  std::unique_ptr<CBlock> compile(const Block& block, int parent_env_size,
                                  const std::map<std::string, int>& parent_views) {
    auto cb = std::make_unique<CBlock>();
    cb->block = &block;
    int slot = parent_env_size;
    std::map<std::string, int> own_slots;  // includes inherited names via scopes_
    for (const auto& idx : block.indexes) {
      own_slots[idx.name] = slot;
      if (idx.is_alias()) {
        cb->aliases.emplace_back(slot, compile_affine(*idx.alias, scopes_));
      } else {
        cb->ranged.emplace_back(slot, idx.range);
      }
      slot++;
    }
    cb->env_size = slot;
    scopes_.push_back(&own_slots);
    for (const auto& constraint : block.constraints) {
      cb->constraints.push_back(compile_affine(constraint.expr, scopes_));
    }
    std::map<std::string, int> own_views;
    for (const auto& ref : block.refinements) {
      CRef cref;
      cref.ref = &ref;
      cref.dtype = ref.dtype;
      cref.agg = ref.agg.value_or(AggOp::Assign);
      for (std::size_t d = 0; d < ref.offsets.size(); d++) {
        CAffine offset = compile_affine(ref.offsets[d], scopes_);
        cref.flat_base.constant += offset.constant * ref.strides[d];
        for (auto [term_slot, coeff] : offset.terms) {
          cref.flat_base.terms.emplace_back(term_slot, coeff * ref.strides[d]);
        }
      }
      auto pit = parent_views.find(ref.buffer);
      if (pit != parent_views.end()) {
        cref.parent = pit->second;
      } else if (scopes_.size() == 1) {
        cref.external = true;
      } else {
        cref.alloc = true;
        std::int64_t extent = 1;
        for (std::size_t d = 0; d < ref.sizes.size(); d++) {
          std::int64_t stride = ref.strides[d] < 0 ? -ref.strides[d] : ref.strides[d];
          extent += (ref.sizes[d] - 1) * stride;
        }
        cref.alloc_elems = extent;
      }
      own_views[ref.buffer] = static_cast<int>(cb->refs.size());
      cb->refs.push_back(std::move(cref));
    }
    std::map<std::string, int> temp_slots;
    for (const auto& stmt : block.stmts) {
      CStmt cstmt;
      cstmt.stmt = &stmt;
      if (const auto* child = std::get_if<Block>(&stmt.node)) {
        cstmt.node = compile(*child, cb->env_size, own_views);
      } else if (const auto* load = std::get_if<Load>(&stmt.node)) {
        CLoad cload;
        cload.view = view_of(own_views, load->from);
        cload.temp = temp_slot(&temp_slots, load->into, true);
        cstmt.node = cload;
      } else if (const auto* store = std::get_if<Store>(&stmt.node)) {
        CStoreStmt cstore;
        cstore.view = view_of(own_views, store->into);
        cstore.temp = temp_slot(&temp_slots, store->from, false);
        cstmt.node = cstore;
      } else if (const auto* intr = std::get_if<Intrinsic>(&stmt.node)) {
        auto op = intr_from_string(intr->op);
        if (!op) {
          throw ExecError("UnknownIntrinsic", "unknown intrinsic '" + intr->op + "'");
        }
        CIntr cintr;
        cintr.op = *op;
        for (const auto& arg : intr->args) {
          COperand operand;
          if (const auto* imm = std::get_if<std::int64_t>(&arg)) {
            operand.imm = true;
            operand.value = *imm;
          } else {
            operand.value = temp_slot(&temp_slots, std::get<std::string>(arg), false);
          }
          cintr.args.push_back(operand);
        }
        cintr.temp = temp_slot(&temp_slots, intr->into, true);
        cstmt.node = std::move(cintr);
      } else {
        const auto& special = std::get<Special>(stmt.node);
        if (!is_registered_special(special.name)) {
          throw ExecError("UnknownSpecial", "unknown special '" + special.name + "'");
        }
        if (special.args.size() != 3) {
          throw ExecError("UnknownSpecial",
                          "special '" + special.name + "' expects 3 refinement operands");
        }
        CSpecial cspecial;
        cspecial.gather = special.name == "gather";
        cspecial.dst = view_of(own_views, special.args[0]);
        cspecial.src = view_of(own_views, special.args[1]);
        cspecial.idx = view_of(own_views, special.args[2]);
        cstmt.node = cspecial;
      }
      cb->stmts.push_back(std::move(cstmt));
    }
    cb->num_temps = static_cast<int>(temp_slots.size());
    scopes_.pop_back();
    return cb;
  }

  static int view_of(const std::map<std::string, int>& views, const std::string& name) {
    auto it = views.find(name);
    if (it == views.end()) {
      throw ExecError("MissingBuffer", "statement names undeclared buffer '" + name + "'");
    }
    return it->second;
  }

  static int temp_slot(std::map<std::string, int>* temps, const std::string& name, bool define) {
    auto it = temps->find(name);
    if (it != temps->end()) return it->second;
    if (!define) {
      throw ExecError("UndefinedTemp", "use of undefined scalar temp '" + name + "'");
    }
    int slot = static_cast<int>(temps->size());
    temps->emplace(name, slot);
    return slot;
  }

  static CAffine compile_affine(const Affine& expr,
                                const std::vector<std::map<std::string, int>*>& scopes) {
    CAffine result;
    result.constant = expr.constant();
    for (const auto& [name, coeff] : expr.terms()) {
      int slot = -1;
      for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
        auto found = (*it)->find(name);
        if (found != (*it)->end()) {
          slot = found->second;
          break;
        }
      }
      if (slot < 0) {
        throw UnboundIndex(name);
      }
      result.terms.emplace_back(slot, coeff);
    }
    return result;
  }

  void run_block(const CBlock& cb, int stmt_index) {
    int depth = static_cast<int>(frames_.size());
    if (opts_.observer) {
      opts_.observer->block_enter(cb.block, depth, stmt_index);
    }
    if (static_cast<int>(env_.size()) < cb.env_size) {
      env_.resize(cb.env_size, 0);
    }
    frames_.emplace_back();
    Frame& frame = frames_.back();
    frame.cb = &cb;
    frame.views.resize(cb.refs.size());
    frame.temps.resize(cb.num_temps);
    for (const auto& [slot, expr] : cb.aliases) {
      env_[slot] = expr.eval(env_);
    }
    if (opts_.order == IterOrder::Lex) {
      std::vector<std::int64_t> coords(cb.ranged.size(), 0);
      bool done = false;
      while (!done) {
        for (std::size_t i = 0; i < cb.ranged.size(); i++) {
          env_[cb.ranged[i].first] = coords[i];
        }
        run_point(&frame);
        done = true;
        std::size_t d = cb.ranged.size();
        while (d > 0) {
          d--;
          if (++coords[d] < cb.ranged[d].second) {
            done = false;
            break;
          }
          coords[d] = 0;
        }
        if (cb.ranged.empty()) break;
      }
    } else {
      std::vector<std::vector<std::int64_t>> points;
      std::vector<std::int64_t> coords(cb.ranged.size(), 0);
      bool done = cb.ranged.empty();
      points.push_back(coords);
      while (!done) {
        std::size_t d = cb.ranged.size();
        done = true;
        while (d > 0) {
          d--;
          if (++coords[d] < cb.ranged[d].second) {
            done = false;
            break;
          }
          coords[d] = 0;
        }
        if (!done) points.push_back(coords);
      }
      if (opts_.order == IterOrder::Reversed) {
        std::reverse(points.begin(), points.end());
      } else {
        std::uint64_t state = opts_.seed + 0x51700000u + depth;
        for (std::size_t i = points.size(); i > 1; i--) {
          std::swap(points[i - 1], points[mix64(state) % i]);
        }
      }
      for (const auto& point : points) {
        for (std::size_t i = 0; i < cb.ranged.size(); i++) {
          env_[cb.ranged[i].first] = point[i];
        }
        run_point(&frame);
      }
    }
    frames_.pop_back();
    if (opts_.observer) {
      opts_.observer->block_exit(cb.block, depth);
    }
  }

  void run_point(Frame* frame) {
    const CBlock& cb = *frame->cb;
    for (const auto& constraint : cb.constraints) {
      if (constraint.eval(env_) < 0) return;
    }
    int depth = static_cast<int>(frames_.size()) - 1;
    if (opts_.observer) {
      opts_.observer->iteration(depth, frame->ordinal);
    }
    frame->allocs.clear();
    for (std::size_t i = 0; i < cb.refs.size(); i++) {
      const CRef& cref = cb.refs[i];
      RtView& view = frame->views[i];
      view.cref = &cref;
      view.depth = depth;
      if (cref.external) {
        view.buffer = &store_->at(cref.ref->buffer);
        view.base = cref.flat_base.eval(env_);
      } else if (cref.alloc) {
        frame->allocs.push_back(std::make_unique<Buffer>());
        view.buffer = frame->allocs.back().get();
        view.buffer->dtype = cref.dtype;
        view.buffer->data.assign(cref.alloc_elems, 0);
        view.base = 0;
      } else {
        const RtView& parent = frames_[depth - 1].views[cref.parent];
        view.buffer = parent.buffer;
        view.base = parent.base + cref.flat_base.eval(env_);
      }
    }
    std::fill(frame->temps.begin(), frame->temps.end(), 0);
    for (const auto& cstmt : cb.stmts) {
      run_stmt(cstmt, frame);
    }
    frame->ordinal++;
  }

  std::int64_t checked_read(const RtView& view, std::int64_t addr) {
    if (addr < 0 || addr >= static_cast<std::int64_t>(view.buffer->data.size())) {
      throw ExecError("OutOfBoundsAccess",
                      "read of '" + view.cref->ref->buffer + "' at element " +
                          std::to_string(addr) + " outside [0, " +
                          std::to_string(view.buffer->data.size()) + ")");
    }
    if (opts_.observer) notify(false, view, addr);
    return view.buffer->data[addr];
  }

  void checked_write(const RtView& view, std::int64_t addr, std::int64_t value, AggOp agg,
                     DType dtype) {
    if (addr < 0 || addr >= static_cast<std::int64_t>(view.buffer->data.size())) {
      throw ExecError("OutOfBoundsAccess",
                      "write of '" + view.cref->ref->buffer + "' at element " +
                          std::to_string(addr) + " outside [0, " +
                          std::to_string(view.buffer->data.size()) + ")");
    }
    auto& cell = view.buffer->data[addr];
    cell = apply_aggregation(agg, cell, value, dtype);
    if (opts_.observer) notify(true, view, addr);
  }

  void notify(bool is_write, const RtView& leaf, std::int64_t addr) {
    chain_.clear();
    const RtView* view = &leaf;
    for (;;) {
      if (view->cref->alloc) break;
      chain_.push_back(AccessHop{view->depth, view->cref->ref});
      if (view->cref->external) break;
      view = &frames_[view->depth - 1].views[view->cref->parent];
    }
    opts_.observer->access(is_write, leaf.buffer, addr, chain_);
  }

  void run_stmt(const CStmt& cstmt, Frame* frame) {
    if (const auto* load = std::get_if<CLoad>(&cstmt.node)) {
      const RtView& view = frame->views[load->view];
      frame->temps[load->temp] = checked_read(view, view.base);
    } else if (const auto* store = std::get_if<CStoreStmt>(&cstmt.node)) {
      const RtView& view = frame->views[store->view];
      checked_write(view, view.base, frame->temps[store->temp], view.cref->agg,
                    view.cref->dtype);
    } else if (const auto* intr = std::get_if<CIntr>(&cstmt.node)) {
      frame->temps[intr->temp] = eval_intrinsic(*intr, frame->temps);
    } else if (const auto* special = std::get_if<CSpecial>(&cstmt.node)) {
      run_special(*special, frame);
    } else {
      run_block(*std::get<std::unique_ptr<CBlock>>(cstmt.node),
                static_cast<int>(&cstmt - frame->cb->stmts.data()));
    }
  }

  std::int64_t eval_intrinsic(const CIntr& intr, const std::vector<std::int64_t>& temps) {
    auto arg = [&](std::size_t i) -> std::int64_t {
      const COperand& operand = intr.args.at(i);
      return operand.imm ? operand.value : temps[operand.value];
    };
    switch (intr.op) {
      case IntrOp::Add: return wrap_add(arg(0), arg(1));
      case IntrOp::Sub: return wrap_sub(arg(0), arg(1));
      case IntrOp::Mul: return wrap_mul(arg(0), arg(1));
      case IntrOp::Neg: return wrap_sub(0, arg(0));
      case IntrOp::Max: return std::max(arg(0), arg(1));
      case IntrOp::Min: return std::min(arg(0), arg(1));
      case IntrOp::CmpEq: return arg(0) == arg(1) ? 1 : 0;
      case IntrOp::CmpNe: return arg(0) != arg(1) ? 1 : 0;
      case IntrOp::CmpLt: return arg(0) < arg(1) ? 1 : 0;
      case IntrOp::CmpLe: return arg(0) <= arg(1) ? 1 : 0;
      case IntrOp::CmpGt: return arg(0) > arg(1) ? 1 : 0;
      case IntrOp::CmpGe: return arg(0) >= arg(1) ? 1 : 0;
      case IntrOp::Select: return arg(0) != 0 ? arg(1) : arg(2);
      case IntrOp::Constant: return arg(0);
    }
    return 0;
  }

  // gather: dst[v] = src[idx[v], v1..]; scatter: dst[idx[v], v1..] agg= src[v].
  void run_special(const CSpecial& special, Frame* frame) {
    const RtView& dst = frame->views[special.dst];
    const RtView& src = frame->views[special.src];
    const RtView& idx = frame->views[special.idx];
    const auto& walk_ref = special.gather ? *dst.cref->ref : *src.cref->ref;
    if (idx.cref->ref->sizes != walk_ref.sizes) {
      throw ExecError("UnknownSpecial", "index operand shape must match the walked operand");
    }
    if (dst.cref->ref->rank() != src.cref->ref->rank()) {
      throw ExecError("UnknownSpecial", "gather/scatter operands must have equal rank");
    }
    std::vector<std::int64_t> coords(walk_ref.rank(), 0);
    for (;;) {
      std::int64_t idx_addr = idx.base;
      for (std::size_t d = 0; d < coords.size(); d++) {
        idx_addr += coords[d] * idx.cref->ref->strides[d];
      }
      std::int64_t picked = checked_read(idx, idx_addr);
      if (special.gather) {
        if (picked < 0 || picked >= src.cref->ref->sizes[0]) {
          throw ExecError("OutOfBoundsAccess",
                          "gather index " + std::to_string(picked) + " outside [0, " +
                              std::to_string(src.cref->ref->sizes[0]) + ")");
        }
        std::int64_t src_addr = src.base + picked * src.cref->ref->strides[0];
        std::int64_t dst_addr = dst.base;
        for (std::size_t d = 1; d < coords.size(); d++) {
          src_addr += coords[d] * src.cref->ref->strides[d];
        }
        for (std::size_t d = 0; d < coords.size(); d++) {
          dst_addr += coords[d] * dst.cref->ref->strides[d];
        }
        checked_write(dst, dst_addr, checked_read(src, src_addr), dst.cref->agg,
                      dst.cref->dtype);
      } else {
        if (picked < 0 || picked >= dst.cref->ref->sizes[0]) {
          throw ExecError("OutOfBoundsAccess",
                          "scatter index " + std::to_string(picked) + " outside [0, " +
                              std::to_string(dst.cref->ref->sizes[0]) + ")");
        }
        std::int64_t src_addr = src.base;
        std::int64_t dst_addr = dst.base + picked * dst.cref->ref->strides[0];
        for (std::size_t d = 0; d < coords.size(); d++) {
          src_addr += coords[d] * src.cref->ref->strides[d];
        }
        for (std::size_t d = 1; d < coords.size(); d++) {
          dst_addr += coords[d] * dst.cref->ref->strides[d];
        }
        checked_write(dst, dst_addr, checked_read(src, src_addr), dst.cref->agg,
                      dst.cref->dtype);
      }
      std::size_t d = coords.size();
      while (d > 0) {
        d--;
        if (++coords[d] < walk_ref.sizes[d]) break;
        coords[d] = 0;
        if (d == 0) return;
      }
      if (coords.empty()) return;
    }
  }

  const Program& program_;
  BufferStore* store_;
  const ExecOptions& opts_;
  std::vector<std::map<std::string, int>*> scopes_;
  std::vector<std::int64_t> env_;
  std::deque<Frame> frames_;  // stable references across nested run_block calls
  std::vector<AccessHop> chain_;
};

}  // namespace

void execute(const Program& program, BufferStore* store, const ExecOptions& opts) {
  Executor(program, store, opts).run();
}

void prepare_outputs(const Program& program, BufferStore* store) {
  for (const auto& ref : program.root.refinements) {
    if (ref.dir == Dir::In || store->count(ref.buffer) != 0) continue;
    // Use the deepest write's aggregation to pick the fill value.
    AggOp agg = ref.agg.value_or(AggOp::Assign);
    std::vector<const Block*> queue = {&program.root};
    while (!queue.empty()) {
      const Block* block = queue.back();
      queue.pop_back();
      const Refinement* found = block->find_refinement(ref.buffer);
      if (block != &program.root && (found == nullptr || !found->agg)) continue;
      if (found && found->agg) agg = *found->agg;
      for (const auto& stmt : block->stmts) {
        if (stmt.is_block()) queue.push_back(&stmt.block());
      }
    }
    std::int64_t fill = 0;
    if (agg == AggOp::Max) fill = dtype_min(ref.dtype);
    if (agg == AggOp::Min) fill = dtype_max(ref.dtype);
    if (agg == AggOp::Mul) fill = 1;
    Buffer buffer;
    buffer.dtype = ref.dtype;
    buffer.data.assign(program.buffers.at(ref.buffer).elements, fill);
    (*store)[ref.buffer] = std::move(buffer);
  }
}

}  // namespace stripe
