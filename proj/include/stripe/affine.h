// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace stripe {

// Integer-coefficient affine polynomial over named indexes. Zero-coefficient
// terms are never stored; equality is structural.
class Affine {
 public:
  Affine() = default;
  Affine(std::int64_t constant) : constant_(constant) {}  // NOLINT(runtime/explicit)
  explicit Affine(const std::string& index, std::int64_t coeff = 1);

  const std::map<std::string, std::int64_t>& terms() const { return terms_; }
  std::int64_t constant() const { return constant_; }
  bool is_constant() const { return terms_.empty(); }
  std::int64_t coeff(const std::string& name) const;

  Affine& operator+=(const Affine& rhs);
  Affine& operator-=(const Affine& rhs);
  Affine& operator*=(std::int64_t scale);

  friend Affine operator+(Affine lhs, const Affine& rhs) { return lhs += rhs; }
  friend Affine operator-(Affine lhs, const Affine& rhs) { return lhs -= rhs; }
  friend Affine operator*(Affine lhs, std::int64_t scale) { return lhs *= scale; }
  friend Affine operator*(std::int64_t scale, Affine rhs) { return rhs *= scale; }
  Affine operator-() const;

  bool operator==(const Affine& rhs) const = default;

  // Canonical form: terms in name order, constant last, e.g. "3*x + i - 1".
  std::string to_string() const;

 private:
  std::map<std::string, std::int64_t> terms_;
  std::int64_t constant_ = 0;
};

using IndexEnv = std::map<std::string, std::int64_t>;

struct UnboundIndex : std::runtime_error {
  explicit UnboundIndex(const std::string& name)
      : std::runtime_error("unbound index '" + name + "'"), index(name) {}
  std::string index;
};

std::int64_t affine_eval(const Affine& expr, const IndexEnv& env);

// Replaces each bound index with its expression and flattens to normal form.
// Indexes absent from the bindings are left untouched.
Affine affine_substitute(const Affine& expr, const std::map<std::string, Affine>& bindings);

}  // namespace stripe
