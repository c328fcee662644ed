// Copyright 2026, Stripe Kit authors.
#pragma once

#include <string>
#include <vector>

#include "stripe/ir.h"

namespace stripe {

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  SourceSpan span;

  // Renders as "severity CODE file:line:col message".
  std::string render(const std::string& file) const;
};

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace stripe
