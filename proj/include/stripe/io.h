// Copyright 2026, Stripe Kit authors.
#pragma once

#include <string>

#include "stripe/interp.h"

namespace stripe {

// Buffer directory layout: a buffers.txt manifest of "name dtype count"
// lines plus one <name>.bin of little-endian raw integers per tensor.
BufferStore load_buffer_dir(const std::string& dir);
void save_buffer_dir(const std::string& dir, const BufferStore& store);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace stripe
