#include "xlnbt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace xlnbt {

namespace {

constexpr const char* kMagic = "xlnbt-checkpoint";

void check_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
    throw FormatError(std::string("checkpoint: ") + what + " must be a non-empty token: '" + s +
                      "'");
  }
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  std::size_t total = 0;
  out << kMagic << '\n' << "format_version " << Checkpoint::kFormatVersion << '\n';
  for (const auto& [key, value] : checkpoint.meta) {
    check_token(key, "meta key");
    if (value.find('\n') != std::string::npos) {
      throw FormatError("checkpoint: meta value for " + key + " contains a newline");
    }
    out << "meta " << key << ' ' << value << '\n';
  }
  for (const auto& [name, entry] : checkpoint.params) {
    check_token(name, "entry name");
    out << "entry " << name << " f64 " << (entry.trainable ? 1 : 0) << ' ' << entry.value.rank();
    for (std::size_t d : entry.value.shape()) out << ' ' << d;
    out << '\n';
    total += entry.value.size() * sizeof(double);
  }
  out << "data " << total << '\n';
  for (const auto& [name, entry] : checkpoint.params) {
    for (double v : entry.value.data()) {
      std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  if (!out) throw IoError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw FormatError("checkpoint: bad magic line");
  if (!std::getline(in, line)) throw FormatError("checkpoint: missing format version");
  {
    std::istringstream fields(line);
    std::string tag;
    int version = 0;
    if (!(fields >> tag >> version) || tag != "format_version") {
      throw FormatError("checkpoint: malformed format version line");
    }
    if (version != Checkpoint::kFormatVersion) {
      throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
    }
  }

  Checkpoint checkpoint;
  struct Pending {
    std::string name;
    bool trainable;
    std::vector<std::size_t> shape;
  };
  std::vector<Pending> pending;
  std::size_t declared_bytes = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    if (line.rfind("meta ", 0) == 0) {
      const std::size_t space = line.find(' ', 5);
      if (space == std::string::npos) throw FormatError("checkpoint: malformed meta line");
      checkpoint.meta[line.substr(5, space - 5)] = line.substr(space + 1);
    } else if (line.rfind("entry ", 0) == 0) {
      std::istringstream fields(line.substr(6));
      Pending p;
      std::string dtype;
      int trainable = 0;
      std::size_t rank = 0;
      if (!(fields >> p.name >> dtype >> trainable >> rank) || dtype != "f64") {
        throw FormatError("checkpoint: malformed entry line: " + line);
      }
      p.trainable = trainable != 0;
      p.shape.resize(rank);
      for (auto& d : p.shape) {
        if (!(fields >> d)) throw FormatError("checkpoint: malformed entry shape: " + line);
      }
      pending.push_back(std::move(p));
    } else if (line.rfind("data ", 0) == 0) {
      declared_bytes = std::stoull(line.substr(5));
      saw_data = true;
      break;
    } else {
      throw FormatError("checkpoint: unexpected manifest line: " + line);
    }
  }
  if (!saw_data) throw FormatError("checkpoint: missing data section");

  std::size_t consumed = 0;
  for (auto& p : pending) {
    const std::size_t n = shape_product(p.shape);
    std::vector<double> values(n);
    for (double& v : values) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) {
        throw FormatError("checkpoint: truncated data for " + p.name);
      }
      v = std::bit_cast<double>(to_little_endian(bits));
    }
    consumed += n * sizeof(double);
    checkpoint.params.add(p.name, Tensor(p.shape, std::move(values)), p.trainable);
  }
  if (consumed != declared_bytes) throw FormatError("checkpoint: data size mismatch");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace xlnbt
