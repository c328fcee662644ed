// Copyright 2026, Stripe Kit authors.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stripe/interp.h"
#include "stripe/io.h"
#include "stripe/ir.h"
#include "stripe/text.h"

namespace stripe::testing {

inline std::string testdata(const std::string& name) {
  return std::string(STRIPE_TESTDATA) + "/" + name;
}

inline std::string configs(const std::string& name) {
  return std::string(STRIPE_CONFIGS) + "/" + name;
}

inline Program load_fixture(const std::string& name) {
  return parse_program(read_file(testdata(name)));
}

// Deterministic splitmix64 generator, independent of the standard library.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // inclusive range
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[next() % items.size()];
  }
};

// Random wrapped values for every in/inout root buffer; outputs are left to
// prepare_outputs.
inline BufferStore random_inputs(const Program& program, Rng* rng) {
  BufferStore store;
  for (const auto& ref : program.root.refinements) {
    if (ref.dir == Dir::Out) continue;
    const BufferDecl& decl = program.buffers.at(ref.buffer);
    Buffer buffer;
    buffer.dtype = decl.dtype;
    buffer.data.resize(decl.elements);
    for (auto& v : buffer.data) {
      v = wrap_value(decl.dtype, static_cast<std::int64_t>(rng->next()));
    }
    store[ref.buffer] = std::move(buffer);
  }
  prepare_outputs(program, &store);
  return store;
}

inline BufferStore run_program(const Program& program, BufferStore store,
                               const ExecOptions& opts = {}) {
  execute(program, &store, opts);
  return store;
}

inline bool stores_equal(const BufferStore& a, const BufferStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, buffer] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.data != buffer.data) return false;
  }
  return true;
}

inline bool outputs_equal(const Program& program, const BufferStore& a, const BufferStore& b) {
  for (const auto& ref : program.root.refinements) {
    if (ref.dir == Dir::In) continue;
    if (a.at(ref.buffer).data != b.at(ref.buffer).data) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Brute-force executors written directly from the math; these never touch the
// interpreter and act as the independent semantic oracle.

// out[x,y,k] += sum_{i,j,c} in[x+i-1, y+j-1, c] * flt[i,j,k,c], with the halo
// constraints 1 <= x+i <= xc and 1 <= y+j <= yc.
inline void conv_oracle(const std::vector<std::int64_t>& in, const std::vector<std::int64_t>& flt,
                        std::vector<std::int64_t>* out, DType dtype, std::int64_t H,
                        std::int64_t W, std::int64_t C, std::int64_t K, std::int64_t xc,
                        std::int64_t yc) {
  for (std::int64_t x = 0; x < H; x++) {
    for (std::int64_t y = 0; y < W; y++) {
      for (std::int64_t i = 0; i < 3; i++) {
        for (std::int64_t j = 0; j < 3; j++) {
          if (x + i < 1 || x + i > xc || y + j < 1 || y + j > yc) continue;
          for (std::int64_t c = 0; c < C; c++) {
            std::int64_t iv = in[(x + i - 1) * W * C + (y + j - 1) * C + c];
            for (std::int64_t k = 0; k < K; k++) {
              std::int64_t fv = flt[i * 3 * K * C + j * K * C + k * C + c];
              auto& cell = (*out)[x * W * K + y * K + k];
              cell = apply_aggregation(AggOp::Add, cell, iv * fv, dtype);
            }
          }
        }
      }
    }
  }
}

inline void matmul_oracle(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                          std::vector<std::int64_t>* c, DType dtype, std::int64_t M,
                          std::int64_t N, std::int64_t K) {
  for (std::int64_t m = 0; m < M; m++) {
    for (std::int64_t n = 0; n < N; n++) {
      for (std::int64_t k = 0; k < K; k++) {
        auto& cell = (*c)[m * N + n];
        cell = apply_aggregation(AggOp::Add, cell, a[m * K + k] * b[k * N + n], dtype);
      }
    }
  }
}

inline void maxpool_oracle(const std::vector<std::int64_t>& in, std::vector<std::int64_t>* out,
                           DType dtype, std::int64_t H, std::int64_t W, std::int64_t C) {
  for (std::int64_t x = 0; x < H / 2; x++) {
    for (std::int64_t y = 0; y < W / 2; y++) {
      for (std::int64_t c = 0; c < C; c++) {
        for (std::int64_t i = 0; i < 2; i++) {
          for (std::int64_t j = 0; j < 2; j++) {
            auto& cell = (*out)[x * (W / 2) * C + y * C + c];
            cell = apply_aggregation(AggOp::Max, cell,
                                     in[(2 * x + i) * W * C + (2 * y + j) * C + c], dtype);
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Random program generator over matmul / conv / maxpool shapes.

struct GeneratedProgram {
  Program program;
  // runs the brute-force math on the store in place
  std::function<void(BufferStore*)> oracle;
};

GeneratedProgram gen_matmul(std::int64_t M, std::int64_t N, std::int64_t K, DType dtype);
GeneratedProgram gen_conv(std::int64_t H, std::int64_t W, std::int64_t C, std::int64_t K,
                          DType dtype);
GeneratedProgram gen_maxpool(std::int64_t H, std::int64_t W, std::int64_t C, DType dtype);
GeneratedProgram gen_random_program(Rng* rng);

// Small random valid block trees for text round-trip and equality properties.
Program gen_random_text_program(Rng* rng);

// Consistently renames every index (and scalar temp) in the tree by
// appending a suffix; used to exercise modulo-renaming equality.
Block rename_tree(const Block& block, const std::string& suffix);

}  // namespace stripe::testing
