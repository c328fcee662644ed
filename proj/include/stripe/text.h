// Copyright 2026, Stripe Kit authors.
#pragma once

#include <stdexcept>
#include <string>

#include "stripe/ir.h"

namespace stripe {

// Thrown for malformed text (code "SyntaxError") and for accesses naming an
// undeclared buffer or index (code "ScopeError").
struct ParseError : std::runtime_error {
  ParseError(std::string code_in, const std::string& message, SourceSpan span_in)
      : std::runtime_error(message), code(std::move(code_in)), span(span_in) {}
  std::string code;
  SourceSpan span;
};

Program parse_program(const std::string& text);

// Deterministic canonical form; parse_program(print_program(p)) is
// structurally equal to p.
std::string print_program(const Program& program);
std::string print_block(const Block& block);

}  // namespace stripe
