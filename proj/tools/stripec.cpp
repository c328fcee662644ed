// Copyright 2026, Stripe Kit authors.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stripe/conflicts.h"
#include "stripe/hwconfig.h"
#include "stripe/interp.h"
#include "stripe/io.h"
#include "stripe/passes.h"
#include "stripe/text.h"
#include "stripe/validate.h"

namespace {

using namespace stripe;

Program load_program_or_exit(const std::string& path) {
  try {
    return parse_program(read_file(path));
  } catch (const ParseError& err) {
    std::cerr << "error " << err.code << " " << path << ":" << err.span.line << ":"
              << err.span.column << " " << err.what() << "\n";
    std::exit(1);
  } catch (const std::exception& err) {
    std::cerr << "error IO " << path << " " << err.what() << "\n";
    std::exit(1);
  }
}

int report_diags(const std::vector<Diagnostic>& diags, const std::string& file) {
  for (const auto& diag : diags) {
    std::cerr << diag.render(file) << "\n";
  }
  return has_errors(diags) ? 1 : 0;
}

std::pair<HardwareConfig, Pipeline> load_config_or_exit(const std::string& path) {
  try {
    return load_config(read_file(path));
  } catch (const ConfigError& err) {
    std::cerr << "error " << err.code << " " << path << " " << err.what() << "\n";
    std::exit(1);
  } catch (const std::exception& err) {
    std::cerr << "error IO " << path << " " << err.what() << "\n";
    std::exit(1);
  }
}

int validate_or_report(const Program& program, const std::string& path) {
  auto diags = validate_static(program);
  return report_diags(diags, path);
}

int cmd_parse(const std::string& path) {
  Program program = load_program_or_exit(path);
  std::string printed = print_program(program);
  Program again = parse_program(printed);
  if (!structural_equal(program, again)) {
    std::cerr << "error RoundTrip " << path << " printed form does not re-parse equal\n";
    return 1;
  }
  std::cout << printed;
  return 0;
}

int cmd_validate(const std::string& path, bool dynamic, const std::string& data) {
  Program program = load_program_or_exit(path);
  int rc = validate_or_report(program, path);
  if (rc != 0 || !dynamic) return rc;
  try {
    BufferStore inputs = load_buffer_dir(data);
    ConflictReport report = check_parallel_semantics(program, inputs);
    for (const auto& conflict : report.conflicts) {
      std::cerr << "error " << conflict.to_string() << "\n";
    }
    if (!report.empty()) {
      std::cerr << "error ConflictTotal conflicts=" << report.total << "\n";
      return 1;
    }
  } catch (const ExecError& err) {
    std::cerr << "error " << err.code << " " << err.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_run(const std::string& path, const std::string& data, const std::string& out,
            bool no_zero_init) {
  Program program = load_program_or_exit(path);
  if (int rc = validate_or_report(program, path); rc != 0) return rc;
  try {
    BufferStore store = load_buffer_dir(data);
    if (!no_zero_init) {
      prepare_outputs(program, &store);
    }
    execute(program, &store);
    if (!out.empty()) {
      BufferStore outputs;
      for (const auto& ref : program.root.refinements) {
        if (ref.dir != Dir::In) {
          outputs[ref.buffer] = store.at(ref.buffer);
        }
      }
      save_buffer_dir(out, outputs);
      for (const auto& [name, buffer] : outputs) {
        std::cout << "wrote " << name << " " << to_string(buffer.dtype) << " "
                  << buffer.data.size() << "\n";
      }
    } else {
      for (const auto& ref : program.root.refinements) {
        if (ref.dir == Dir::In) continue;
        const Buffer& buffer = store.at(ref.buffer);
        std::int64_t sum = 0;
        for (std::int64_t v : buffer.data) sum += v;
        std::cout << ref.buffer << " " << to_string(buffer.dtype) << " " << buffer.data.size()
                  << " sum=" << sum << "\n";
      }
    }
  } catch (const ExecError& err) {
    std::cerr << "error " << err.code << " " << err.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_opt(const std::string& path, const std::string& config, bool emit_reports) {
  Program program = load_program_or_exit(path);
  if (int rc = validate_or_report(program, path); rc != 0) return rc;
  auto [hw, pipeline] = load_config_or_exit(config);
  PipelineResult result = apply_pipeline(program, pipeline, hw);
  report_diags(result.diags, path);
  if (!result.ok) return 1;
  if (emit_reports) {
    for (const auto& line : result.reports) {
      std::cout << line << "\n";
    }
  }
  std::cout << print_program(result.program);
  return 0;
}

int cmd_cost(const std::string& path, const std::string& config, const std::string& tiles,
             const std::string& block_path, const std::string& unit) {
  Program program = load_program_or_exit(path);
  if (int rc = validate_or_report(program, path); rc != 0) return rc;
  auto [hw, pipeline] = load_config_or_exit(config);
  (void)pipeline;
  const MemUnit* mem = unit.empty()
                           ? (hw.mem_units.empty() ? nullptr : &hw.mem_units.front())
                           : hw.find_mem(unit);
  if (mem == nullptr) {
    std::cerr << "error UnknownUnit no memory unit '" << unit << "' in " << config << "\n";
    return 1;
  }
  const Block* target = block_at_path(&program.root, block_path);
  if (target == nullptr) {
    std::cerr << "error BadPath no block at '" << block_path << "'\n";
    return 1;
  }
  try {
    TileShape ts = parse_tile_shape(tiles);
    TileCostReport report =
        tile_cost(*target, ts, CacheModel{mem->line, mem->capacity}, mem->capacity);
    std::cout << "tile=" << ts.to_string() << " " << report.to_string() << "\n";
  } catch (const PassError& err) {
    std::cerr << "error " << err.code << " " << err.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_diff(const std::string& path_a, const std::string& path_b, const std::string& data) {
  Program a = load_program_or_exit(path_a);
  Program b = load_program_or_exit(path_b);
  if (int rc = validate_or_report(a, path_a); rc != 0) return rc;
  if (int rc = validate_or_report(b, path_b); rc != 0) return rc;
  try {
    BufferStore inputs = load_buffer_dir(data);
    BufferStore store_a = inputs;
    BufferStore store_b = inputs;
    prepare_outputs(a, &store_a);
    prepare_outputs(b, &store_b);
    execute(a, &store_a);
    execute(b, &store_b);
    for (const auto& ref : a.root.refinements) {
      if (ref.dir == Dir::In) continue;
      const Buffer& buf_a = store_a.at(ref.buffer);
      auto it = store_b.find(ref.buffer);
      if (it == store_b.end()) {
        std::cout << ref.buffer << " missing from " << path_b << "\n";
        return 1;
      }
      const Buffer& buf_b = it->second;
      if (buf_a.data.size() != buf_b.data.size()) {
        std::cout << ref.buffer << " sizes differ: " << buf_a.data.size() << " vs "
                  << buf_b.data.size() << "\n";
        return 1;
      }
      for (std::size_t i = 0; i < buf_a.data.size(); i++) {
        if (buf_a.data[i] != buf_b.data[i]) {
          std::cout << ref.buffer << "[" << i << "] a=" << buf_a.data[i]
                    << " b=" << buf_b.data[i] << "\n";
          return 1;
        }
      }
    }
  } catch (const ExecError& err) {
    std::cerr << "error " << err.code << " " << err.what() << "\n";
    return 1;
  }
  std::cout << "identical\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stripec: parse, validate, execute and optimize .stripe programs"};
  app.require_subcommand(1);

  std::string file, file_b, data, out, config, tiles, block_path = "0", unit;
  bool dynamic = false, no_zero_init = false, emit_reports = false;

  auto* parse_cmd = app.add_subcommand("parse", "round-trip and print the canonical form");
  parse_cmd->add_option("file", file)->required();

  auto* validate_cmd = app.add_subcommand("validate", "static (and optionally dynamic) checks");
  validate_cmd->add_option("file", file)->required();
  validate_cmd->add_flag("--dynamic", dynamic, "run the parallel-semantics checker");
  validate_cmd->add_option("--data", data, "buffer directory for --dynamic");

  auto* run_cmd = app.add_subcommand("run", "execute a program");
  run_cmd->add_option("file", file)->required();
  run_cmd->add_option("--data", data)->required();
  run_cmd->add_option("--out", out, "directory to write output buffers");
  run_cmd->add_flag("--no-zero-init", no_zero_init, "require outputs in --data");

  auto* opt_cmd = app.add_subcommand("opt", "apply a configured pass pipeline");
  opt_cmd->add_option("file", file)->required();
  opt_cmd->add_option("--config", config)->required();
  opt_cmd->add_flag("--emit-reports", emit_reports, "print per-pass report lines");

  auto* cost_cmd = app.add_subcommand("cost", "evaluate the tile cost model");
  cost_cmd->add_option("file", file)->required();
  cost_cmd->add_option("--config", config)->required();
  cost_cmd->add_option("--tiles", tiles)->required();
  cost_cmd->add_option("--block", block_path, "dot path of the target block");
  cost_cmd->add_option("--unit", unit, "memory unit to model");

  auto* diff_cmd = app.add_subcommand("diff", "execute two programs and compare outputs");
  diff_cmd->add_option("a", file)->required();
  diff_cmd->add_option("b", file_b)->required();
  diff_cmd->add_option("--data", data)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) {
      return app.exit(err);
    }
    std::cerr << err.what() << "\n";
    return 2;
  }

  if (parse_cmd->parsed()) return cmd_parse(file);
  if (validate_cmd->parsed()) {
    if (dynamic && data.empty()) {
      std::cerr << "--dynamic requires --data\n";
      return 2;
    }
    return cmd_validate(file, dynamic, data);
  }
  if (run_cmd->parsed()) return cmd_run(file, data, out, no_zero_init);
  if (opt_cmd->parsed()) return cmd_opt(file, config, emit_reports);
  if (cost_cmd->parsed()) return cmd_cost(file, config, tiles, block_path, unit);
  if (diff_cmd->parsed()) return cmd_diff(file, file_b, data);
  return 2;
}
