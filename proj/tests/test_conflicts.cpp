// Copyright 2026, Stripe Kit authors.
#include <doctest.h>

#include "stripe/conflicts.h"
#include "stripe/text.h"
#include "stripe/validate.h"
#include "support.h"

using namespace stripe;
using namespace stripe::testing;

TEST_CASE("the conv fixture is conflict free under add aggregation") {
  Program p = load_fixture("fig6a_fixed_i32.stripe");
  Rng rng(11);
  ConflictReport report = check_parallel_semantics(p, random_inputs(p, &rng));
  CHECK(report.empty());
}

TEST_CASE("assign aggregation with 72 writers per element") {
  Program p = load_fixture("fig6a_fixed_i32.stripe");
  p.root.stmts[0].block().find_refinement("O")->agg = AggOp::Assign;
  Rng rng(12);
  ConflictReport report = check_parallel_semantics(p, random_inputs(p, &rng));
  CHECK_FALSE(report.empty());
  // every output element is written by several iterations; the interior ones
  // by the full 3*3*8 = 72 reduction
  std::int64_t assign_conflicts = 0;
  std::int64_t interior72 = 0;
  for (const auto& conflict : report.conflicts) {
    if (conflict.kind != Conflict::Kind::AssignConflict) continue;
    assign_conflicts++;
    if (conflict.writers == 72) interior72++;
  }
  CHECK(assign_conflicts == 12 * 16 * 16);
  CHECK(interior72 == 10 * 14 * 16);  // interior spatial positions
}

TEST_CASE("cross-iteration write then read") {
  Program p = load_fixture("accum_rw.stripe");
  BufferStore inputs;
  inputs["ACC"] = {DType::i32, {0}};
  ConflictReport report = check_parallel_semantics(p, inputs);
  REQUIRE_FALSE(report.empty());
  bool found = false;
  for (const auto& conflict : report.conflicts) {
    if (conflict.kind == Conflict::Kind::ReadWrite && conflict.buffer == "ACC") {
      found = true;
      CHECK(conflict.iter_write != conflict.iter_read);
    }
  }
  CHECK(found);
}

TEST_CASE("a single writer under assign is legal") {
  Program p = parse_program(
      "block []:1 (\n"
      "\tout B[0]:assign i32(1):(1)\n"
      ") {\n"
      "\tblock [] (\n"
      "\t\tout B[0]:assign i32(1):(1)\n"
      "\t) {\n"
      "\t\t$c = constant(5)\n"
      "\t\tB = store($c)\n"
      "\t}\n"
      "}\n");
  ConflictReport report = check_parallel_semantics(p, {});
  CHECK(report.empty());
}

TEST_CASE("same-iteration write then read is legal") {
  // the conv+relu wrapper writes T and reads it within one iteration
  Program p = load_fixture("conv_relu.stripe");
  Rng rng(13);
  CHECK(check_parallel_semantics(p, random_inputs(p, &rng)).empty());
}

TEST_CASE("no false positives on random valid programs") {
  Rng rng(99);
  for (int trial = 0; trial < 40; trial++) {
    GeneratedProgram gen = gen_random_program(&rng);
    REQUIRE_FALSE(has_errors(validate_static(gen.program)));
    ConflictReport report = check_parallel_semantics(gen.program, random_inputs(gen.program, &rng));
    CAPTURE(trial);
    CHECK(report.empty());
  }
}

TEST_CASE("conflict rendering") {
  Conflict conflict;
  conflict.kind = Conflict::Kind::AssignConflict;
  conflict.block_path = "root.0";
  conflict.buffer = "O";
  conflict.element = 17;
  conflict.writers = 72;
  CHECK(conflict.to_string() == "AssignConflict block=root.0 buffer=O element=17 writers=72");
}
