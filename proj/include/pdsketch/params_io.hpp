#pragma once

#include <cstring>
#include <fstream>
#include <set>
#include <string>

#include "pdsketch/autodiff.hpp"
#include "pdsketch/common.hpp"

namespace pds {

class FormatVersionMismatch : public Error {
 public:
  explicit FormatVersionMismatch(const std::string& msg)
      : Error("parameter file: " + msg) {}
};

class MissingSlot : public Error {
 public:
  explicit MissingSlot(const std::string& msg) : Error("parameter file: " + msg) {}
};

namespace detail {

constexpr uint32_t kParamFormatVersion = 1;

inline void put_u32(std::string& out, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  out.append(b, 4);
}

struct ByteReader {
  const std::string& data;
  size_t pos = 0;

  void need(size_t n) {
    if (pos + n > data.size()) throw FormatVersionMismatch("truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | uint8_t(data[pos + size_t(i)]);
    pos += 4;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
  bool eof() const { return pos >= data.size(); }
};

}  // namespace detail

// Writes "PDSK", a u32 format version, then one record per tensor:
// name length + UTF-8 name, rank, dims (u32 each), float32 payload.
// Everything little-endian. Map order makes the bytes deterministic.
inline void save_params(const ParamStore& store, const std::string& path) {
  std::string out = "PDSK";
  detail::put_u32(out, detail::kParamFormatVersion);
  for (const auto& [name, t] : store.tensors) {
    detail::put_u32(out, uint32_t(name.size()));
    out += name;
    detail::put_u32(out, uint32_t(t.shape.size()));
    for (int d : t.shape) detail::put_u32(out, uint32_t(d));
    static_assert(sizeof(float) == 4);
    size_t off = out.size();
    out.resize(off + t.value.size() * 4);
    std::memcpy(out.data() + off, t.value.data(), t.value.size() * 4);
  }
  write_file(path, out);
}

inline ParamStore load_params(const std::string& path) {
  std::string data = read_file(path);
  detail::ByteReader r{data};
  if (r.bytes(4) != "PDSK") throw FormatVersionMismatch("bad magic in " + path);
  uint32_t version = r.u32();
  if (version != detail::kParamFormatVersion)
    throw FormatVersionMismatch("unsupported format version " + std::to_string(version));

  ParamStore store;
  while (!r.eof()) {
    uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    uint32_t rank = r.u32();
    std::vector<int> shape;
    size_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      shape.push_back(int(r.u32()));
      numel *= size_t(shape.back());
    }
    std::string payload = r.bytes(numel * 4);
    ParamTensor& t = store.create(name, shape);
    std::memcpy(t.value.data(), payload.data(), numel * 4);
  }
  return store;
}

// Copies loaded values into an instantiated store. Both sides must carry
// exactly the same tensor names and shapes; mismatches are listed.
inline void load_params_into(ParamStore& store, const std::string& path) {
  ParamStore loaded = load_params(path);
  std::string missing, extra, reshaped;
  for (const auto& [name, t] : store.tensors)
    if (!loaded.tensors.count(name)) missing += " " + name;
  for (const auto& [name, t] : loaded.tensors) {
    auto it = store.tensors.find(name);
    if (it == store.tensors.end()) {
      extra += " " + name;
    } else if (it->second.shape != t.shape) {
      reshaped += " " + name;
    }
  }
  if (!missing.empty() || !extra.empty() || !reshaped.empty()) {
    std::string msg;
    if (!missing.empty()) msg += "missing tensors:" + missing + "; ";
    if (!extra.empty()) msg += "unmatched tensors in file:" + extra + "; ";
    if (!reshaped.empty()) msg += "shape mismatch:" + reshaped + "; ";
    throw MissingSlot(msg + "in " + path);
  }
  for (auto& [name, t] : loaded.tensors) store.tensors[name].value = t.value;
}

}  // namespace pds
