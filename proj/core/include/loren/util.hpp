#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loren/tensor.hpp"

namespace loren {

uint64_t fnv1a(const void* data, size_t size, uint64_t state = 0xcbf29ce484222325ULL);
uint64_t checksum(const Tensor& t, uint64_t state = 0xcbf29ce484222325ULL);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& s);      // strict, whole string
int64_t parse_int64(const std::string& s);      // strict, whole string
uint64_t parse_uint64(const std::string& s);    // strict, whole string

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
void ensure_parent_dir(const std::string& path);

}  // namespace loren
