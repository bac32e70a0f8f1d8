#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "xlnbt/tensor.hpp"

namespace xlnbt {

// On-disk archive: a text manifest followed by the raw little-endian value
// blocks of every entry, in manifest order.
//
//   xlnbt-checkpoint
//   format_version 1
//   meta <key> <value>                       (zero or more, sorted by key)
//   entry <name> f64 <trainable> <rank> <dims...>
//   data <total bytes>
//   <binary payload>
//
// Writing is deterministic, so load followed by save reproduces the file
// byte for byte.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  std::map<std::string, std::string> meta;
  ParameterSet params;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xlnbt
