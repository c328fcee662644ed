// Copyright 2026, Stripe Kit authors.
#include "support.h"

#include <sstream>

namespace stripe::testing {

namespace {

Refinement make_ref(Dir dir, const std::string& name, std::vector<Affine> offsets,
                    std::optional<AggOp> agg, DType dtype, std::vector<std::int64_t> sizes,
                    std::vector<std::int64_t> strides) {
  Refinement ref;
  ref.dir = dir;
  ref.buffer = name;
  ref.offsets = std::move(offsets);
  ref.agg = agg;
  ref.dtype = dtype;
  ref.sizes = std::move(sizes);
  ref.strides = std::move(strides);
  return ref;
}

Statement stmt_of(Block block) {
  Statement stmt;
  stmt.node = std::move(block);
  return stmt;
}

Statement load_of(const std::string& temp, const std::string& buffer) {
  Statement stmt;
  stmt.node = Load{temp, buffer};
  return stmt;
}

Statement store_of(const std::string& buffer, const std::string& temp) {
  Statement stmt;
  stmt.node = Store{buffer, temp};
  return stmt;
}

Statement intr_of(const std::string& op, const std::string& into, std::vector<Operand> args) {
  Statement stmt;
  stmt.node = Intrinsic{op, into, std::move(args)};
  return stmt;
}

}  // namespace

GeneratedProgram gen_matmul(std::int64_t M, std::int64_t N, std::int64_t K, DType dtype) {
  Block kernel;
  kernel.indexes = {{"m", M, {}, {}}, {"n", N, {}, {}}, {"k", K, {}, {}}};
  kernel.refinements = {
      make_ref(Dir::In, "A", {Affine("m"), Affine("k")}, {}, dtype, {1, 1}, {K, 1}),
      make_ref(Dir::In, "B", {Affine("k"), Affine("n")}, {}, dtype, {1, 1}, {N, 1}),
      make_ref(Dir::Out, "C", {Affine("m"), Affine("n")}, AggOp::Add, dtype, {1, 1}, {N, 1}),
  };
  kernel.stmts.push_back(load_of("$a", "A"));
  kernel.stmts.push_back(load_of("$b", "B"));
  kernel.stmts.push_back(intr_of("mul", "$p", {Operand{"$a"}, Operand{"$b"}}));
  kernel.stmts.push_back(store_of("C", "$p"));

  Block root;
  root.refinements = {
      make_ref(Dir::In, "A", {Affine(0), Affine(0)}, {}, dtype, {M, K}, {K, 1}),
      make_ref(Dir::In, "B", {Affine(0), Affine(0)}, {}, dtype, {K, N}, {N, 1}),
      make_ref(Dir::Out, "C", {Affine(0), Affine(0)}, AggOp::Assign, dtype, {M, N}, {N, 1}),
  };
  root.stmts.push_back(stmt_of(std::move(kernel)));

  GeneratedProgram gen;
  gen.program = make_program(std::move(root));
  gen.oracle = [=](BufferStore* store) {
    matmul_oracle(store->at("A").data, store->at("B").data, &store->at("C").data, dtype, M, N, K);
  };
  return gen;
}

GeneratedProgram gen_conv(std::int64_t H, std::int64_t W, std::int64_t C, std::int64_t K,
                          DType dtype) {
  Block kernel;
  kernel.indexes = {{"x", H, {}, {}}, {"y", W, {}, {}}, {"i", 3, {}, {}},
                    {"j", 3, {}, {}}, {"c", C, {}, {}}, {"k", K, {}, {}}};
  kernel.constraints = {
      {Affine("x") + Affine("i") - 1, {}},
      {Affine(H) - Affine("x") - Affine("i"), {}},
      {Affine("y") + Affine("j") - 1, {}},
      {Affine(W) - Affine("y") - Affine("j"), {}},
  };
  kernel.refinements = {
      make_ref(Dir::In, "I", {Affine("x") + Affine("i") - 1, Affine("y") + Affine("j") - 1,
                              Affine("c")},
               {}, dtype, {1, 1, 1}, {W * C, C, 1}),
      make_ref(Dir::In, "F", {Affine("i"), Affine("j"), Affine("k"), Affine("c")}, {}, dtype,
               {1, 1, 1, 1}, {3 * K * C, K * C, C, 1}),
      make_ref(Dir::Out, "O", {Affine("x"), Affine("y"), Affine("k")}, AggOp::Add, dtype,
               {1, 1, 1}, {W * K, K, 1}),
  };
  kernel.refinements[1].tags.insert("untiled");
  kernel.stmts.push_back(load_of("$i", "I"));
  kernel.stmts.push_back(load_of("$f", "F"));
  kernel.stmts.push_back(intr_of("mul", "$p", {Operand{"$i"}, Operand{"$f"}}));
  kernel.stmts.push_back(store_of("O", "$p"));

  Block root;
  root.refinements = {
      make_ref(Dir::In, "I", {Affine(0), Affine(0), Affine(0)}, {}, dtype, {H, W, C},
               {W * C, C, 1}),
      make_ref(Dir::In, "F", {Affine(0), Affine(0), Affine(0), Affine(0)}, {}, dtype,
               {3, 3, K, C}, {3 * K * C, K * C, C, 1}),
      make_ref(Dir::Out, "O", {Affine(0), Affine(0), Affine(0)}, AggOp::Assign, dtype, {H, W, K},
               {W * K, K, 1}),
  };
  root.refinements[1].tags.insert("untiled");
  root.stmts.push_back(stmt_of(std::move(kernel)));

  GeneratedProgram gen;
  gen.program = make_program(std::move(root));
  gen.oracle = [=](BufferStore* store) {
    conv_oracle(store->at("I").data, store->at("F").data, &store->at("O").data, dtype, H, W, C, K,
                H, W);
  };
  return gen;
}

GeneratedProgram gen_maxpool(std::int64_t H, std::int64_t W, std::int64_t C, DType dtype) {
  Block kernel;
  kernel.indexes = {{"x", H / 2, {}, {}}, {"y", W / 2, {}, {}}, {"c", C, {}, {}},
                    {"i", 2, {}, {}}, {"j", 2, {}, {}}};
  kernel.refinements = {
      make_ref(Dir::In, "I",
               {Affine("x", 2) + Affine("i"), Affine("y", 2) + Affine("j"), Affine("c")}, {},
               dtype, {1, 1, 1}, {W * C, C, 1}),
      make_ref(Dir::Out, "O", {Affine("x"), Affine("y"), Affine("c")}, AggOp::Max, dtype,
               {1, 1, 1}, {(W / 2) * C, C, 1}),
  };
  kernel.stmts.push_back(load_of("$v", "I"));
  kernel.stmts.push_back(store_of("O", "$v"));

  Block root;
  root.refinements = {
      make_ref(Dir::In, "I", {Affine(0), Affine(0), Affine(0)}, {}, dtype, {H, W, C},
               {W * C, C, 1}),
      make_ref(Dir::Out, "O", {Affine(0), Affine(0), Affine(0)}, AggOp::Assign, dtype,
               {H / 2, W / 2, C}, {(W / 2) * C, C, 1}),
  };
  root.stmts.push_back(stmt_of(std::move(kernel)));

  GeneratedProgram gen;
  gen.program = make_program(std::move(root));
  gen.oracle = [=](BufferStore* store) {
    maxpool_oracle(store->at("I").data, &store->at("O").data, dtype, H, W, C);
  };
  return gen;
}

GeneratedProgram gen_random_program(Rng* rng) {
  std::vector<DType> dtypes = {DType::i8, DType::i16, DType::i32};
  DType dtype = rng->pick(dtypes);
  switch (rng->next() % 3) {
    case 0:
      return gen_matmul(rng->range(2, 24), rng->range(2, 24), rng->range(2, 24), dtype);
    case 1:
      return gen_conv(rng->range(4, 14), rng->range(4, 14), rng->range(1, 6), rng->range(1, 6),
                      dtype);
    default:
      return gen_maxpool(2 * rng->range(2, 14), 2 * rng->range(2, 14), rng->range(1, 6), dtype);
  }
}

namespace {

// Small random valid single-kernel programs: 1-3 input windows, one output,
// optional constraint, a chain of intrinsics.
Block gen_kernel(Rng* rng, const std::vector<Refinement>& parents) {
  Block kernel;
  int nidx = static_cast<int>(rng->range(1, 3));
  for (int i = 0; i < nidx; i++) {
    kernel.indexes.push_back(Index{"i" + std::to_string(i), rng->range(1, 4), {}, {}});
  }
  if (rng->next() % 2 == 0) {
    // a satisfiable constraint: i0 + bound >= 0 is always true for bound >= 0
    kernel.constraints.push_back({Affine("i0") + rng->range(0, 2), {}});
  }
  if (rng->next() % 4 == 0) {
    kernel.tags.insert("hot");
  }
  std::vector<std::string> temps;
  for (const auto& parent : parents) {
    Refinement ref = parent;
    ref.tags.clear();
    for (std::size_t d = 0; d < ref.rank(); d++) {
      std::int64_t extent = parent.sizes[d];
      // pick an in-bounds window: offset = idx (when it fits) or constant
      std::string idx = "i" + std::to_string(rng->range(0, nidx - 1));
      std::int64_t range = kernel.find_index(idx)->range;
      if (range <= extent) {
        ref.offsets[d] = Affine(idx);
        ref.sizes[d] = extent - range + 1;
      } else {
        ref.offsets[d] = Affine(rng->range(0, extent - 1));
        ref.sizes[d] = 1;
      }
    }
    kernel.refinements.push_back(std::move(ref));
  }
  for (const auto& ref : kernel.refinements) {
    if (ref.dir != Dir::Out) {
      std::string temp = "$t" + std::to_string(temps.size());
      Statement stmt;
      stmt.node = Load{temp, ref.buffer};
      kernel.stmts.push_back(std::move(stmt));
      temps.push_back(temp);
    }
  }
  std::string cur = temps.empty() ? "$c" : temps.front();
  if (temps.empty()) {
    Statement stmt;
    stmt.node = Intrinsic{"constant", "$c", {Operand{rng->range(-5, 5)}}};
    kernel.stmts.push_back(std::move(stmt));
  }
  for (std::size_t i = 1; i < temps.size(); i++) {
    std::vector<std::string> ops = {"add", "mul", "max", "min", "sub"};
    std::string next = "$x" + std::to_string(i);
    Statement stmt;
    stmt.node = Intrinsic{rng->pick(ops), next, {Operand{cur}, Operand{temps[i]}}};
    kernel.stmts.push_back(std::move(stmt));
    cur = next;
  }
  for (const auto& ref : kernel.refinements) {
    if (ref.dir == Dir::Out) {
      Statement stmt;
      stmt.node = Store{ref.buffer, cur};
      kernel.stmts.push_back(std::move(stmt));
    }
  }
  return kernel;
}

}  // namespace

Program gen_random_text_program(Rng* rng) {
  std::vector<DType> dtypes = {DType::i8, DType::i16, DType::i32};
  DType dtype = rng->pick(dtypes);
  Block root;
  int nin = static_cast<int>(rng->range(1, 2));
  for (int i = 0; i < nin; i++) {
    std::int64_t d0 = rng->range(2, 6);
    std::int64_t d1 = rng->range(2, 6);
    root.refinements.push_back(make_ref(Dir::In, "IN" + std::to_string(i),
                                        {Affine(0), Affine(0)}, {}, dtype, {d0, d1}, {d1, 1}));
  }
  std::int64_t d0 = rng->range(2, 6);
  std::int64_t d1 = rng->range(2, 6);
  std::vector<AggOp> aggs = {AggOp::Assign, AggOp::Add, AggOp::Max, AggOp::Min, AggOp::Mul};
  root.refinements.push_back(make_ref(Dir::Out, "OUT", {Affine(0), Affine(0)}, rng->pick(aggs),
                                      dtype, {d0, d1}, {d1, 1}));
  int nkernels = static_cast<int>(rng->range(1, 2));
  for (int k = 0; k < nkernels; k++) {
    root.stmts.push_back(stmt_of(gen_kernel(rng, root.refinements)));
  }
  return make_program(std::move(root));
}

namespace {

Affine rename_affine(const Affine& expr, const std::map<std::string, std::string>& names) {
  Affine result = expr.constant();
  for (const auto& [name, coeff] : expr.terms()) {
    auto it = names.find(name);
    result += Affine(it == names.end() ? name : it->second, coeff);
  }
  return result;
}

Block rename_block(const Block& block, const std::string& suffix,
                   const std::map<std::string, std::string>& parent_names) {
  Block out = block;
  std::map<std::string, std::string> own;
  for (auto& idx : out.indexes) {
    own[idx.name] = idx.name + suffix;
    if (idx.alias) {
      idx.alias = rename_affine(*idx.alias, parent_names);
    }
  }
  for (auto& idx : out.indexes) {
    idx.name = own.at(idx.name);
  }
  for (auto& constraint : out.constraints) {
    constraint.expr = rename_affine(constraint.expr, own);
  }
  for (auto& ref : out.refinements) {
    for (auto& offset : ref.offsets) {
      offset = rename_affine(offset, own);
    }
    if (ref.location) {
      ref.location->bank = rename_affine(ref.location->bank, own);
    }
  }
  std::map<std::string, std::string> temps;
  for (auto& stmt : out.stmts) {
    if (stmt.is_block()) {
      stmt.node = rename_block(stmt.block(), suffix, own);
    } else if (auto* load = std::get_if<Load>(&stmt.node)) {
      temps[load->into] = load->into + suffix;
      load->into = temps.at(load->into);
    } else if (auto* store = std::get_if<Store>(&stmt.node)) {
      auto it = temps.find(store->from);
      if (it != temps.end()) store->from = it->second;
    } else if (auto* intr = std::get_if<Intrinsic>(&stmt.node)) {
      for (auto& arg : intr->args) {
        if (auto* temp = std::get_if<std::string>(&arg)) {
          auto it = temps.find(*temp);
          if (it != temps.end()) *temp = it->second;
        }
      }
      temps[intr->into] = intr->into + suffix;
      intr->into = temps.at(intr->into);
    }
  }
  return out;
}

}  // namespace

Block rename_tree(const Block& block, const std::string& suffix) {
  return rename_block(block, suffix, {});
}

}  // namespace stripe::testing
