// Copyright 2026, Stripe Kit authors.
#include "stripe/ir.h"

#include <algorithm>
#include <array>
#include <sstream>

namespace stripe {

const char* to_string(DType dtype) {
  switch (dtype) {
    case DType::i8: return "i8";
    case DType::i16: return "i16";
    case DType::i32: return "i32";
  }
  return "?";
}

std::optional<DType> dtype_from_string(const std::string& text) {
  if (text == "i8") return DType::i8;
  if (text == "i16") return DType::i16;
  if (text == "i32") return DType::i32;
  return std::nullopt;
}

int dtype_bits(DType dtype) {
  switch (dtype) {
    case DType::i8: return 8;
    case DType::i16: return 16;
    case DType::i32: return 32;
  }
  return 0;
}

std::int64_t dtype_min(DType dtype) { return -(std::int64_t{1} << (dtype_bits(dtype) - 1)); }

std::int64_t dtype_max(DType dtype) { return (std::int64_t{1} << (dtype_bits(dtype) - 1)) - 1; }

std::int64_t wrap_value(DType dtype, std::int64_t value) {
  int bits = dtype_bits(dtype);
  std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::uint64_t raw = static_cast<std::uint64_t>(value) & mask;
  std::uint64_t sign = std::uint64_t{1} << (bits - 1);
  if (raw & sign) {
    raw |= ~mask;
  }
  return static_cast<std::int64_t>(raw);
}

const char* to_string(Dir dir) {
  switch (dir) {
    case Dir::In: return "in";
    case Dir::Out: return "out";
    case Dir::InOut: return "inout";
  }
  return "?";
}

const char* to_string(AggOp op) {
  switch (op) {
    case AggOp::Assign: return "assign";
    case AggOp::Add: return "add";
    case AggOp::Max: return "max";
    case AggOp::Min: return "min";
    case AggOp::Mul: return "mul";
  }
  return "?";
}

std::optional<AggOp> agg_from_string(const std::string& text) {
  if (text == "assign") return AggOp::Assign;
  if (text == "add") return AggOp::Add;
  if (text == "max") return AggOp::Max;
  if (text == "min") return AggOp::Min;
  if (text == "mul") return AggOp::Mul;
  return std::nullopt;
}

std::int64_t apply_aggregation(AggOp op, std::int64_t current, std::int64_t incoming,
                               DType dtype) {
  std::int64_t value = wrap_value(dtype, incoming);
  switch (op) {
    case AggOp::Assign:
      return value;
    case AggOp::Add:
      return wrap_value(dtype, static_cast<std::int64_t>(static_cast<std::uint64_t>(current) +
                                                         static_cast<std::uint64_t>(value)));
    case AggOp::Max:
      return std::max(current, value);
    case AggOp::Min:
      return std::min(current, value);
    case AggOp::Mul:
      return wrap_value(dtype, static_cast<std::int64_t>(static_cast<std::uint64_t>(current) *
                                                         static_cast<std::uint64_t>(value)));
  }
  return value;
}

std::int64_t Refinement::elements() const {
  std::int64_t total = 1;
  for (std::int64_t size : sizes) {
    total *= size;
  }
  return total;
}

bool Statement::is_block() const { return std::holds_alternative<Block>(node); }
const Block& Statement::block() const { return std::get<Block>(node); }
Block& Statement::block() { return std::get<Block>(node); }

std::int64_t Block::range_product() const {
  std::int64_t total = 1;
  for (const auto& idx : indexes) {
    if (!idx.is_alias()) {
      total *= idx.range;
    }
  }
  return total;
}

std::int64_t Block::printed_annotation() const {
  return annotation.value_or(range_product());
}

const Refinement* Block::find_refinement(const std::string& name) const {
  for (const auto& ref : refinements) {
    if (ref.buffer == name) return &ref;
  }
  return nullptr;
}

Refinement* Block::find_refinement(const std::string& name) {
  for (auto& ref : refinements) {
    if (ref.buffer == name) return &ref;
  }
  return nullptr;
}

const Index* Block::find_index(const std::string& name) const {
  for (const auto& idx : indexes) {
    if (idx.name == name) return &idx;
  }
  return nullptr;
}

void rebind_buffers(Program* program) {
  program->buffers.clear();
  for (const auto& ref : program->root.refinements) {
    std::int64_t extent = 1;
    for (std::size_t d = 0; d < ref.sizes.size(); d++) {
      extent += (ref.sizes[d] - 1) * (ref.strides[d] < 0 ? -ref.strides[d] : ref.strides[d]);
    }
    program->buffers[ref.buffer] = BufferDecl{ref.dtype, extent};
  }
}

Program make_program(Block root) {
  Program program;
  program.root = std::move(root);
  if (!program.root.annotation) {
    program.root.annotation = program.root.range_product();
  }
  rebind_buffers(&program);
  return program;
}

namespace {

const std::set<std::string>& intrinsic_registry() {
  static const std::set<std::string> registry = {
      "load", "store", "add", "sub", "mul", "neg", "max", "min",
      "cmp_eq", "cmp_ne", "cmp_lt", "cmp_le", "cmp_gt", "cmp_ge",
      "select", "constant"};
  return registry;
}

}  // namespace

bool is_registered_intrinsic(const std::string& op) { return intrinsic_registry().count(op) != 0; }

bool is_registered_special(const std::string& name) { return name == "gather" || name == "scatter"; }

namespace {

// Renaming context for modulo-naming comparison: a stack of per-block index
// bijections plus a per-statement-list temp bijection.
struct RenameScope {
  std::map<std::string, std::string> fwd;
  std::map<std::string, std::string> rev;

  bool bind(const std::string& a, const std::string& b) {
    auto fit = fwd.find(a);
    auto rit = rev.find(b);
    if (fit == fwd.end() && rit == rev.end()) {
      fwd[a] = b;
      rev[b] = a;
      return true;
    }
    return fit != fwd.end() && fit->second == b && rit != rev.end() && rit->second == a;
  }
};

struct EqContext {
  bool modulo = false;
  std::vector<RenameScope> index_scopes;

  bool indexes_match(const std::string& a, const std::string& b) const {
    if (!modulo) return a == b;
    for (auto it = index_scopes.rbegin(); it != index_scopes.rend(); ++it) {
      auto fit = it->fwd.find(a);
      auto rit = it->rev.find(b);
      if (fit != it->fwd.end() || rit != it->rev.end()) {
        return fit != it->fwd.end() && fit->second == b && rit != it->rev.end() &&
               rit->second == a;
      }
    }
    return a == b;  // free names must match exactly
  }
};

bool affine_equal(const Affine& a, const Affine& b, const EqContext& ctx) {
  if (a.constant() != b.constant() || a.terms().size() != b.terms().size()) return false;
  if (!ctx.modulo) return a.terms() == b.terms();
  // Map a's terms through the bijection and compare as sets.
  for (const auto& [name, coeff] : a.terms()) {
    bool found = false;
    for (const auto& [bname, bcoeff] : b.terms()) {
      if (ctx.indexes_match(name, bname)) {
        if (bcoeff != coeff) return false;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

bool refinement_equal(const Refinement& a, const Refinement& b, const EqContext& ctx) {
  if (a.dir != b.dir || a.buffer != b.buffer || a.agg != b.agg || a.dtype != b.dtype ||
      a.sizes != b.sizes || a.strides != b.strides || a.tags != b.tags ||
      a.offsets.size() != b.offsets.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.offsets.size(); i++) {
    if (!affine_equal(a.offsets[i], b.offsets[i], ctx)) return false;
  }
  if (a.location.has_value() != b.location.has_value()) return false;
  if (a.location) {
    if (a.location->unit != b.location->unit || a.location->address != b.location->address ||
        !affine_equal(a.location->bank, b.location->bank, ctx)) {
      return false;
    }
  }
  return true;
}

bool block_equal(const Block& a, const Block& b, EqContext* ctx);

bool operand_equal(const Operand& a, const Operand& b, const RenameScope& temps, bool modulo) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<std::int64_t>(a)) {
    return std::get<std::int64_t>(a) == std::get<std::int64_t>(b);
  }
  const auto& ta = std::get<std::string>(a);
  const auto& tb = std::get<std::string>(b);
  if (!modulo) return ta == tb;
  auto fit = temps.fwd.find(ta);
  auto rit = temps.rev.find(tb);
  if (fit == temps.fwd.end() && rit == temps.rev.end()) return ta == tb;
  return fit != temps.fwd.end() && fit->second == tb && rit != temps.rev.end() &&
         rit->second == ta;
}

bool stmts_equal(const std::vector<Statement>& a, const std::vector<Statement>& b,
                 EqContext* ctx) {
  if (a.size() != b.size()) return false;
  RenameScope temps;
  for (std::size_t i = 0; i < a.size(); i++) {
    const auto& na = a[i].node;
    const auto& nb = b[i].node;
    if (na.index() != nb.index()) return false;
    if (std::holds_alternative<Block>(na)) {
      if (!block_equal(std::get<Block>(na), std::get<Block>(nb), ctx)) return false;
    } else if (std::holds_alternative<Load>(na)) {
      const auto& la = std::get<Load>(na);
      const auto& lb = std::get<Load>(nb);
      if (la.from != lb.from) return false;
      if (ctx->modulo ? !temps.bind(la.into, lb.into) : la.into != lb.into) return false;
    } else if (std::holds_alternative<Store>(na)) {
      const auto& sa = std::get<Store>(na);
      const auto& sb = std::get<Store>(nb);
      if (sa.into != sb.into) return false;
      if (!operand_equal(Operand{sa.from}, Operand{sb.from}, temps, ctx->modulo)) return false;
    } else if (std::holds_alternative<Intrinsic>(na)) {
      const auto& ia = std::get<Intrinsic>(na);
      const auto& ib = std::get<Intrinsic>(nb);
      if (ia.op != ib.op || ia.args.size() != ib.args.size()) return false;
      for (std::size_t k = 0; k < ia.args.size(); k++) {
        if (!operand_equal(ia.args[k], ib.args[k], temps, ctx->modulo)) return false;
      }
      if (ctx->modulo ? !temps.bind(ia.into, ib.into) : ia.into != ib.into) return false;
    } else {
      const auto& pa = std::get<Special>(na);
      const auto& pb = std::get<Special>(nb);
      if (pa.name != pb.name || pa.args != pb.args) return false;
    }
  }
  return true;
}

bool block_equal(const Block& a, const Block& b, EqContext* ctx) {
  if (a.tags != b.tags || a.printed_annotation() != b.printed_annotation() ||
      a.indexes.size() != b.indexes.size() || a.constraints.size() != b.constraints.size() ||
      a.refinements.size() != b.refinements.size()) {
    return false;
  }
  // Alias RHS expressions live in the parent scope; compare them before
  // pushing this block's own bijection.
  for (std::size_t i = 0; i < a.indexes.size(); i++) {
    const auto& ia = a.indexes[i];
    const auto& ib = b.indexes[i];
    if (ia.is_alias() != ib.is_alias() || (!ia.is_alias() && ia.range != ib.range)) return false;
    if (ia.is_alias() && !affine_equal(*ia.alias, *ib.alias, *ctx)) return false;
    if (!ctx->modulo && ia.name != ib.name) return false;
  }
  ctx->index_scopes.emplace_back();
  bool ok = true;
  if (ctx->modulo) {
    for (std::size_t i = 0; i < a.indexes.size(); i++) {
      if (!ctx->index_scopes.back().bind(a.indexes[i].name, b.indexes[i].name)) {
        ok = false;
        break;
      }
    }
  }
  for (std::size_t i = 0; ok && i < a.constraints.size(); i++) {
    ok = affine_equal(a.constraints[i].expr, b.constraints[i].expr, *ctx);
  }
  for (std::size_t i = 0; ok && i < a.refinements.size(); i++) {
    ok = refinement_equal(a.refinements[i], b.refinements[i], *ctx);
  }
  if (ok) ok = stmts_equal(a.stmts, b.stmts, ctx);
  ctx->index_scopes.pop_back();
  return ok;
}

}  // namespace

bool structural_equal(const Block& a, const Block& b, bool modulo_renaming) {
  EqContext ctx;
  ctx.modulo = modulo_renaming;
  return block_equal(a, b, &ctx);
}

bool structural_equal(const Program& a, const Program& b, bool modulo_renaming) {
  return structural_equal(a.root, b.root, modulo_renaming);
}

namespace {

void strip_block_tags(Block* block) {
  block->tags.clear();
  for (auto& ref : block->refinements) {
    ref.tags.clear();
  }
  for (auto& stmt : block->stmts) {
    if (stmt.is_block()) {
      strip_block_tags(&stmt.block());
    }
  }
}

}  // namespace

Program strip_tags(Program program) {
  strip_block_tags(&program.root);
  return program;
}

Block* block_at_path(Block* root, const std::string& path) {
  if (path.empty()) return root;
  Block* cur = root;
  std::istringstream is(path);
  std::string piece;
  while (std::getline(is, piece, '.')) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(piece);
    } catch (const std::exception&) {
      return nullptr;
    }
    if (idx >= cur->stmts.size() || !cur->stmts[idx].is_block()) return nullptr;
    cur = &cur->stmts[idx].block();
  }
  return cur;
}

const Block* block_at_path(const Block* root, const std::string& path) {
  return block_at_path(const_cast<Block*>(root), path);
}

}  // namespace stripe
