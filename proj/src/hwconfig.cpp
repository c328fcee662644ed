// Copyright 2026, Stripe Kit authors.
#include "stripe/hwconfig.h"

#include <algorithm>
#include <sstream>

namespace stripe {

const MemUnit* HardwareConfig::find_mem(const std::string& name) const {
  for (const auto& unit : mem_units) {
    if (unit.name == name) return &unit;
  }
  return nullptr;
}

const ComputeUnit* HardwareConfig::find_compute(const std::string& name) const {
  for (const auto& unit : compute_units) {
    if (unit.name == name) return &unit;
  }
  return nullptr;
}

std::string PassConfig::param(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::int64_t PassConfig::param_int(const std::string& key, std::int64_t fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : std::stoll(it->second);
}

namespace {

const std::set<std::string>& pass_registry() {
  static const std::set<std::string> registry = {
      "autotile", "stencil", "partition", "fuse", "scalarize",
      "localize", "schedule", "separate_boundary", "transpose"};
  return registry;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream is(line);
  std::string word;
  while (is >> word) {
    words.push_back(word);
  }
  return words;
}

std::pair<std::string, std::string> split_kv(const std::string& word, int lineno) {
  std::size_t eq = word.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("ConfigSyntax", "expected key=value at line " + std::to_string(lineno) +
                                          ", got '" + word + "'");
  }
  return {word.substr(0, eq), word.substr(eq + 1)};
}

StencilSpec parse_stencil(const std::string& text, const std::string& unit) {
  StencilSpec spec;
  spec.name = unit;
  std::vector<std::int64_t> sizes;
  std::istringstream is(text);
  std::string piece;
  while (std::getline(is, piece, 'x')) {
    sizes.push_back(std::stoll(piece));
  }
  if (sizes.size() < 2) {
    throw ConfigError("ConfigSyntax", "stencil needs at least two sizes: '" + text + "'");
  }
  spec.reduction_size = sizes.back();
  sizes.pop_back();
  spec.out_sizes = std::move(sizes);
  return spec;
}

}  // namespace

std::pair<HardwareConfig, Pipeline> load_config(const std::string& text) {
  HardwareConfig hw;
  Pipeline pipeline;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto words = split_ws(line);
    if (words.empty()) continue;
    if (words[0] == "mem") {
      if (words.size() < 2) {
        throw ConfigError("ConfigSyntax", "mem needs a name at line " + std::to_string(lineno));
      }
      MemUnit unit;
      unit.name = words[1];
      for (std::size_t w = 2; w < words.size(); w++) {
        auto [key, value] = split_kv(words[w], lineno);
        if (key == "cap") {
          unit.capacity = std::stoll(value);
        } else if (key == "line") {
          unit.line = std::stoll(value);
        } else if (key == "banks") {
          unit.banks = std::stoll(value);
        } else {
          throw ConfigError("ConfigSyntax", "unknown mem key '" + key + "'");
        }
      }
      if (unit.line < 1 || unit.capacity < unit.line) {
        throw ConfigError("ConfigSyntax", "mem '" + unit.name + "' needs cap >= line >= 1");
      }
      hw.mem_units.push_back(std::move(unit));
    } else if (words[0] == "unit") {
      if (words.size() < 2) {
        throw ConfigError("ConfigSyntax", "unit needs a name at line " + std::to_string(lineno));
      }
      ComputeUnit unit;
      unit.name = words[1];
      std::string stencil_text;
      std::string tag;
      std::optional<DType> dtype;
      for (std::size_t w = 2; w < words.size(); w++) {
        auto [key, value] = split_kv(words[w], lineno);
        if (key == "count") {
          unit.count = std::stoll(value);
        } else if (key == "stencil") {
          stencil_text = value;
        } else if (key == "tag") {
          tag = value;
        } else if (key == "dtype") {
          dtype = dtype_from_string(value);
          if (!dtype) throw ConfigError("ConfigSyntax", "unknown dtype '" + value + "'");
        } else {
          throw ConfigError("ConfigSyntax", "unknown unit key '" + key + "'");
        }
      }
      if (!stencil_text.empty()) {
        StencilSpec spec = parse_stencil(stencil_text, unit.name);
        spec.tag = tag.empty() ? unit.name : tag;
        if (dtype) spec.dtype = *dtype;
        unit.stencil = std::move(spec);
      }
      hw.compute_units.push_back(std::move(unit));
    } else if (words[0] == "pass") {
      if (words.size() < 2) {
        throw ConfigError("ConfigSyntax", "pass needs a name at line " + std::to_string(lineno));
      }
      PassConfig cfg;
      cfg.name = words[1];
      if (pass_registry().count(cfg.name) == 0) {
        throw ConfigError("UnknownPass", "unknown pass '" + cfg.name + "'");
      }
      for (std::size_t w = 2; w < words.size(); w++) {
        auto [key, value] = split_kv(words[w], lineno);
        cfg.params[key] = value;
      }
      pipeline.passes.push_back(std::move(cfg));
    } else {
      throw ConfigError("ConfigSyntax",
                        "unknown directive '" + words[0] + "' at line " + std::to_string(lineno));
    }
  }
  // Unit declarations are order-independent; pipelines keep their order.
  std::sort(hw.mem_units.begin(), hw.mem_units.end(),
            [](const MemUnit& a, const MemUnit& b) { return a.name < b.name; });
  std::sort(hw.compute_units.begin(), hw.compute_units.end(),
            [](const ComputeUnit& a, const ComputeUnit& b) { return a.name < b.name; });
  for (const auto& cfg : pipeline.passes) {
    if (cfg.params.count("unit") != 0 && cfg.name != "partition" && cfg.name != "stencil") {
      if (hw.find_mem(cfg.param("unit")) == nullptr) {
        throw ConfigError("UnknownUnit",
                          "pass '" + cfg.name + "' references undeclared unit '" +
                              cfg.param("unit") + "'");
      }
    }
    if (cfg.name == "stencil" && cfg.params.count("unit") != 0) {
      if (hw.find_compute(cfg.param("unit")) == nullptr) {
        throw ConfigError("UnknownUnit",
                          "stencil pass references undeclared compute unit '" +
                              cfg.param("unit") + "'");
      }
    }
    if (cfg.name == "partition" && cfg.params.count("unit") != 0) {
      if (hw.find_mem(cfg.param("unit")) == nullptr &&
          hw.find_compute(cfg.param("unit")) == nullptr) {
        throw ConfigError("UnknownUnit",
                          "partition references undeclared unit '" + cfg.param("unit") + "'");
      }
    }
  }
  return {std::move(hw), std::move(pipeline)};
}

std::string print_config(const HardwareConfig& hw, const Pipeline& pipeline) {
  std::ostringstream os;
  for (const auto& unit : hw.mem_units) {
    os << "mem " << unit.name << " cap=" << unit.capacity << " line=" << unit.line
       << " banks=" << unit.banks << "\n";
  }
  for (const auto& unit : hw.compute_units) {
    os << "unit " << unit.name << " count=" << unit.count;
    if (unit.stencil) {
      os << " stencil=";
      for (std::size_t d = 0; d < unit.stencil->out_sizes.size(); d++) {
        os << unit.stencil->out_sizes[d] << "x";
      }
      os << unit.stencil->reduction_size << " tag=" << unit.stencil->tag;
    }
    os << "\n";
  }
  for (const auto& cfg : pipeline.passes) {
    os << "pass " << cfg.name;
    for (const auto& [key, value] : cfg.params) {
      os << " " << key << "=" << value;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace stripe
