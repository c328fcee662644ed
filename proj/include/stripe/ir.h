// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "stripe/affine.h"

namespace stripe {

// Source position of a parsed node. Constructed IR carries the default
// (all-zero) span; structural equality never looks at spans.
struct SourceSpan {
  int line = 0;
  int column = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

enum class DType { i8, i16, i32 };

const char* to_string(DType dtype);
std::optional<DType> dtype_from_string(const std::string& text);
int dtype_bits(DType dtype);
std::int64_t dtype_min(DType dtype);
std::int64_t dtype_max(DType dtype);
// Wraps a value to two's complement at the dtype width (sign extended).
std::int64_t wrap_value(DType dtype, std::int64_t value);

enum class Dir { In, Out, InOut };

const char* to_string(Dir dir);

enum class AggOp { Assign, Add, Max, Min, Mul };

const char* to_string(AggOp op);
std::optional<AggOp> agg_from_string(const std::string& text);

// assign performs a plain store; the others read-modify-write, wrapping at
// the refinement dtype so any iteration order yields the same result.
std::int64_t apply_aggregation(AggOp op, std::int64_t current, std::int64_t incoming,
                               DType dtype = DType::i32);

// A ranged iteration index, or an alias binding a parent index expression
// into the block's scope (alias RHS is affine over the parent's indexes).
struct Index {
  std::string name;
  std::int64_t range = 1;
  std::optional<Affine> alias;
  SourceSpan span;

  bool is_alias() const { return alias.has_value(); }
};

// Interpreted as expr >= 0.
struct Constraint {
  Affine expr;
  SourceSpan span;
};

struct Location {
  std::string unit;
  Affine bank;
  std::int64_t address = 0;
};

// A window into a parent-scope buffer: per-dimension affine offset (over the
// declaring block's own indexes), size, and stride. A refinement whose name
// is not bound in the parent scope declares a fresh local buffer instead,
// zero-filled per iteration of the declaring block.
struct Refinement {
  Dir dir = Dir::In;
  std::string buffer;
  std::vector<Affine> offsets;
  std::optional<AggOp> agg;
  DType dtype = DType::i32;
  std::vector<std::int64_t> sizes;
  std::vector<std::int64_t> strides;
  std::optional<Location> location;
  std::set<std::string> tags;
  SourceSpan span;

  std::size_t rank() const { return sizes.size(); }
  std::int64_t elements() const;
  bool has_tag(const std::string& tag) const { return tags.count(tag) != 0; }
};

struct Statement;

// Scalar operand of an intrinsic: a $temp name or an integer immediate.
using Operand = std::variant<std::string, std::int64_t>;

struct Load {
  std::string into;  // $temp
  std::string from;  // refinement name
};

struct Store {
  std::string into;  // refinement name
  std::string from;  // $temp
};

struct Intrinsic {
  std::string op;
  std::string into;  // $temp
  std::vector<Operand> args;
};

struct Special {
  std::string name;
  std::vector<std::string> args;  // refinement names
};

struct Block {
  std::vector<Index> indexes;
  std::vector<Constraint> constraints;
  std::vector<Refinement> refinements;
  std::vector<Statement> stmts;
  std::set<std::string> tags;
  // The `:N` header annotation; defaults to the product of declared ranges.
  std::optional<std::int64_t> annotation;
  SourceSpan span;

  std::int64_t range_product() const;
  std::int64_t printed_annotation() const;
  const Refinement* find_refinement(const std::string& name) const;
  Refinement* find_refinement(const std::string& name);
  const Index* find_index(const std::string& name) const;
  bool has_tag(const std::string& tag) const { return tags.count(tag) != 0; }
};

struct Statement {
  std::variant<Block, Load, Store, Intrinsic, Special> node;
  SourceSpan span;

  bool is_block() const;
  const Block& block() const;
  Block& block();
};

struct BufferDecl {
  DType dtype = DType::i32;
  std::int64_t elements = 0;
};

// A program is a root block whose refinements bind the externally supplied
// buffers; the buffer table is derived from those refinements.
struct Program {
  Block root;
  std::map<std::string, BufferDecl> buffers;
};

// Recomputes the buffer table from the root refinements.
void rebind_buffers(Program* program);
Program make_program(Block root);

const char* intrinsic_registry_name();
bool is_registered_intrinsic(const std::string& op);
bool is_registered_special(const std::string& name);

// Tree identity; with modulo_renaming, identity up to a consistent bijection
// of index names and scalar temp names (buffer names always compare exactly).
bool structural_equal(const Block& a, const Block& b, bool modulo_renaming = false);
bool structural_equal(const Program& a, const Program& b, bool modulo_renaming = false);

// Removes every tag from every block and refinement; never changes output.
Program strip_tags(Program program);

// Follows a dot path of statement indices ("0.1") from the root; every step
// must land on a block statement. Returns nullptr when the path is invalid.
Block* block_at_path(Block* root, const std::string& path);
const Block* block_at_path(const Block* root, const std::string& path);

}  // namespace stripe
