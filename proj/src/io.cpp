// Copyright 2026, Stripe Kit authors.
#include "stripe/io.h"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace stripe {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ExecError("MissingBuffer", "cannot open '" + path + "'");
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ExecError("MissingBuffer", "cannot write '" + path + "'");
  }
  out << content;
}

BufferStore load_buffer_dir(const std::string& dir) {
  BufferStore store;
  std::istringstream manifest(read_file(dir + "/buffers.txt"));
  std::string line;
  while (std::getline(manifest, line)) {
    std::istringstream fields(line);
    std::string name, dtype_text;
    std::int64_t count = 0;
    if (!(fields >> name >> dtype_text >> count)) {
      if (name.empty()) continue;
      throw ExecError("MissingBuffer", "malformed manifest line: '" + line + "'");
    }
    auto dtype = dtype_from_string(dtype_text);
    if (!dtype) {
      throw ExecError("MissingBuffer", "unknown dtype '" + dtype_text + "' for '" + name + "'");
    }
    Buffer buffer;
    buffer.dtype = *dtype;
    buffer.data.resize(count);
    std::string raw = read_file(dir + "/" + name + ".bin");
    std::size_t width = dtype_bits(*dtype) / 8;
    if (raw.size() != static_cast<std::size_t>(count) * width) {
      throw ExecError("MissingBuffer", "'" + name + ".bin' has " + std::to_string(raw.size()) +
                                           " bytes, expected " +
                                           std::to_string(count * static_cast<std::int64_t>(width)));
    }
    for (std::int64_t i = 0; i < count; i++) {
      std::uint64_t value = 0;
      for (std::size_t b = 0; b < width; b++) {
        value |= static_cast<std::uint64_t>(
                     static_cast<unsigned char>(raw[i * width + b]))
                 << (8 * b);
      }
      buffer.data[i] = wrap_value(*dtype, static_cast<std::int64_t>(value));
    }
    store[name] = std::move(buffer);
  }
  return store;
}

void save_buffer_dir(const std::string& dir, const BufferStore& store) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  for (const auto& [name, buffer] : store) {
    manifest << name << " " << to_string(buffer.dtype) << " " << buffer.data.size() << "\n";
    std::string raw;
    std::size_t width = dtype_bits(buffer.dtype) / 8;
    raw.reserve(buffer.data.size() * width);
    for (std::int64_t value : buffer.data) {
      auto bits = static_cast<std::uint64_t>(value);
      for (std::size_t b = 0; b < width; b++) {
        raw.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
      }
    }
    write_file(dir + "/" + name + ".bin", raw);
  }
  write_file(dir + "/buffers.txt", manifest.str());
}

}  // namespace stripe
