// Copyright 2026, Stripe Kit authors.
#include "stripe/affine.h"

#include <sstream>

namespace stripe {

Affine::Affine(const std::string& index, std::int64_t coeff) {
  if (coeff != 0) {
    terms_[index] = coeff;
  }
}

std::int64_t Affine::coeff(const std::string& name) const {
  auto it = terms_.find(name);
  return it == terms_.end() ? 0 : it->second;
}

Affine& Affine::operator+=(const Affine& rhs) {
  for (const auto& [name, coeff] : rhs.terms_) {
    auto it = terms_.find(name);
    if (it == terms_.end()) {
      terms_.emplace(name, coeff);
    } else if ((it->second += coeff) == 0) {
      terms_.erase(it);
    }
  }
  constant_ += rhs.constant_;
  return *this;
}

Affine& Affine::operator-=(const Affine& rhs) { return *this += -rhs; }

Affine& Affine::operator*=(std::int64_t scale) {
  if (scale == 0) {
    terms_.clear();
    constant_ = 0;
    return *this;
  }
  for (auto& [name, coeff] : terms_) {
    coeff *= scale;
  }
  constant_ *= scale;
  return *this;
}

Affine Affine::operator-() const {
  Affine result = *this;
  result *= -1;
  return result;
}

std::string Affine::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, coeff] : terms_) {
    if (first) {
      if (coeff == -1) {
        os << "-";
      } else if (coeff != 1) {
        os << coeff << "*";
      }
      os << name;
      first = false;
      continue;
    }
    std::int64_t mag = coeff < 0 ? -coeff : coeff;
    os << (coeff < 0 ? " - " : " + ");
    if (mag != 1) {
      os << mag << "*";
    }
    os << name;
  }
  if (first) {
    os << constant_;
  } else if (constant_ > 0) {
    os << " + " << constant_;
  } else if (constant_ < 0) {
    os << " - " << -constant_;
  }
  return os.str();
}

std::int64_t affine_eval(const Affine& expr, const IndexEnv& env) {
  std::int64_t total = expr.constant();
  for (const auto& [name, coeff] : expr.terms()) {
    auto it = env.find(name);
    if (it == env.end()) {
      throw UnboundIndex(name);
    }
    total += coeff * it->second;
  }
  return total;
}

Affine affine_substitute(const Affine& expr, const std::map<std::string, Affine>& bindings) {
  Affine result = expr.constant();
  for (const auto& [name, coeff] : expr.terms()) {
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      result += Affine(name, coeff);
    } else {
      result += it->second * coeff;
    }
  }
  return result;
}

}  // namespace stripe
