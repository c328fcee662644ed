// Copyright 2026, Stripe Kit authors.
#include "stripe/conflicts.h"

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace stripe {

std::string Conflict::to_string() const {
  std::ostringstream os;
  if (kind == Kind::AssignConflict) {
    os << "AssignConflict block=" << block_path << " buffer=" << buffer
       << " element=" << element << " writers=" << writers;
  } else {
    os << "ReadWrite block=" << block_path << " buffer=" << buffer << " element=" << element
       << " write_iter=" << iter_write << " read_iter=" << iter_read;
  }
  return os.str();
}

namespace {

constexpr std::int64_t kMaxConflicts = 100000;

struct Track {
  const Refinement* ref = nullptr;
  std::int64_t first_writer = -1;
  std::int64_t last_writer = -1;
  std::int64_t writers = 0;
  std::int64_t first_reader = -1;
  std::int64_t last_reader = -1;
  std::int64_t readers = 0;
  bool rw_flagged = false;
};

struct ElemKey {
  const Buffer* buffer;
  std::int64_t addr;
  bool operator==(const ElemKey&) const = default;
};

struct ElemKeyHash {
  std::size_t operator()(const ElemKey& key) const {
    std::size_t h = std::hash<const void*>()(key.buffer);
    return h ^ (std::hash<std::int64_t>()(key.addr) + 0x9e3779b9 + (h << 6) + (h >> 2));
  }
};

struct Instance {
  const Block* block = nullptr;
  std::string path;
  std::int64_t ordinal = 0;
  std::unordered_map<ElemKey, Track, ElemKeyHash> elems;
};

class Checker : public ExecObserver {
 public:
  explicit Checker(ConflictReport* report) : report_(report) {}

  void block_enter(const Block* block, int depth, int stmt_index) override {
    Instance inst;
    inst.block = block;
    if (depth == 0) {
      inst.path = "root";
    } else {
      inst.path = stack_[depth - 1].path + "." + std::to_string(stmt_index);
    }
    stack_.push_back(std::move(inst));
  }

  void iteration(int depth, std::int64_t ordinal) override { stack_[depth].ordinal = ordinal; }

  void access(bool is_write, const Buffer* buffer, std::int64_t addr,
              const std::vector<AccessHop>& chain) override {
    for (const auto& hop : chain) {
      Instance& inst = stack_[hop.depth];
      Track& track = inst.elems[ElemKey{buffer, addr}];
      if (track.ref == nullptr) track.ref = hop.refinement;
      std::int64_t iter = inst.ordinal;
      if (is_write) {
        if (!track.rw_flagged && track.readers > 0 &&
            (track.readers > 1 || track.first_reader != iter)) {
          track.rw_flagged = true;
          emit_read_write(inst, hop.refinement, addr, iter,
                          track.first_reader != iter ? track.first_reader : track.last_reader);
        }
        if (track.last_writer != iter) {
          track.last_writer = iter;
          track.writers++;
          if (track.first_writer < 0) track.first_writer = iter;
        }
      } else {
        if (!track.rw_flagged && track.writers > 0 &&
            (track.writers > 1 || track.first_writer != iter)) {
          track.rw_flagged = true;
          emit_read_write(inst, hop.refinement, addr,
                          track.first_writer != iter ? track.first_writer : track.last_writer,
                          iter);
        }
        if (track.last_reader != iter) {
          track.last_reader = iter;
          track.readers++;
          if (track.first_reader < 0) track.first_reader = iter;
        }
      }
    }
  }

  void block_exit(const Block* block, int depth) override {
    (void)block, (void)depth;
    Instance& inst = stack_.back();
    std::vector<Conflict> found;
    for (const auto& [key, track] : inst.elems) {
      if (track.writers > 1 && track.ref->agg == AggOp::Assign) {
        Conflict conflict;
        conflict.kind = Conflict::Kind::AssignConflict;
        conflict.block_path = inst.path;
        conflict.buffer = track.ref->buffer;
        conflict.element = key.addr;
        conflict.writers = track.writers;
        found.push_back(std::move(conflict));
      }
    }
    std::sort(found.begin(), found.end(), [](const Conflict& a, const Conflict& b) {
      return std::tie(a.buffer, a.element) < std::tie(b.buffer, b.element);
    });
    for (auto& conflict : found) {
      report_->total++;
      if (static_cast<std::int64_t>(report_->conflicts.size()) < kMaxConflicts) {
        report_->conflicts.push_back(std::move(conflict));
      }
    }
    stack_.pop_back();
  }

 private:
  void emit_read_write(const Instance& inst, const Refinement* ref, std::int64_t addr,
                       std::int64_t iter_write, std::int64_t iter_read) {
    report_->total++;
    if (static_cast<std::int64_t>(report_->conflicts.size()) >= kMaxConflicts) return;
    Conflict conflict;
    conflict.kind = Conflict::Kind::ReadWrite;
    conflict.block_path = inst.path;
    conflict.buffer = ref->buffer;
    conflict.element = addr;
    conflict.iter_write = iter_write;
    conflict.iter_read = iter_read;
    report_->conflicts.push_back(std::move(conflict));
  }

  ConflictReport* report_;
  std::vector<Instance> stack_;
};

}  // namespace

ConflictReport check_parallel_semantics(const Program& program, const BufferStore& inputs) {
  ConflictReport report;
  BufferStore store = inputs;
  prepare_outputs(program, &store);
  Checker checker(&report);
  ExecOptions opts;
  opts.observer = &checker;
  execute(program, &store, opts);
  return report;
}

}  // namespace stripe
