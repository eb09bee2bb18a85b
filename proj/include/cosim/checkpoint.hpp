#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cosim/common.hpp"
#include "cosim/tensor.hpp"

namespace cosim {

// Flat binary model container: a plain-text header listing named arrays
// (name, shape, byte offset into the blob) followed by raw little-endian
// 64-bit reals. Magic string "COSIM1".
//
//   COSIM1
//   meta <key> <value>
//   tensor <name> <ndim> <d0> ... <offset>
//   end
//   <blob>
struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> meta;

  bool has(const std::string& name) const { return tensors.count(name) > 0; }

  const Tensor& require(const std::string& name) const {
    auto it = tensors.find(name);
    COSIM_CHECK_DATA(it != tensors.end(), "checkpoint: missing tensor '", name, "'");
    return it->second;
  }

  std::string meta_or(const std::string& key, const std::string& fallback) const {
    auto it = meta.find(key);
    return it == meta.end() ? fallback : it->second;
  }
};

namespace detail {

inline void write_f64_le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string header = "COSIM1\n";
  std::string blob;
  for (const auto& [key, value] : ckpt.meta) header += "meta " + key + " " + value + "\n";
  for (const auto& [name, tensor] : ckpt.tensors) {
    std::ostringstream line;
    line << "tensor " << name << " " << tensor.ndim();
    for (int d : tensor.shape()) line << " " << d;
    line << " " << blob.size() << "\n";
    header += line.str();
    for (double v : tensor.values()) detail::write_f64_le(blob, v);
  }
  header += "end\n";
  return header + blob;
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
  Checkpoint ckpt;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t nl = bytes.find('\n', pos);
    COSIM_CHECK_DATA(nl != std::string::npos, "checkpoint: truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  COSIM_CHECK_DATA(next_line() == "COSIM1", "checkpoint: bad magic, expected COSIM1");

  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    if (kind == "meta") {
      std::string key, value;
      is >> key;
      std::getline(is, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      Entry e;
      int ndim = 0;
      is >> e.name >> ndim;
      COSIM_CHECK_DATA(ndim >= 1 && ndim <= 8, "checkpoint: bad rank for '", e.name, "'");
      e.shape.resize(static_cast<std::size_t>(ndim));
      for (int& d : e.shape) is >> d;
      is >> e.offset;
      COSIM_CHECK_DATA(!is.fail(), "checkpoint: malformed tensor line '", line, "'");
      entries.push_back(std::move(e));
    } else {
      throw data_error(detail::cat("checkpoint: unknown header line '", line, "'"));
    }
  }
  const std::size_t blob_start = pos;
  for (const Entry& e : entries) {
    const std::size_t count = static_cast<std::size_t>(shape_numel(e.shape));
    const std::size_t begin = blob_start + e.offset;
    COSIM_CHECK_DATA(begin + 8 * count <= bytes.size(), "checkpoint: blob truncated for '",
                     e.name, "'");
    std::vector<double> data(count);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + begin);
    for (std::size_t i = 0; i < count; ++i) data[i] = detail::read_f64_le(p + 8 * i);
    ckpt.tensors.emplace(e.name, Tensor::from_data(e.shape, std::move(data)));
  }
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  COSIM_CHECK_DATA(out.good(), "checkpoint: cannot open '", path, "' for writing");
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  COSIM_CHECK_DATA(out.good(), "checkpoint: write failed for '", path, "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  COSIM_CHECK_DATA(in.good(), "checkpoint: cannot open '", path, "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace cosim
