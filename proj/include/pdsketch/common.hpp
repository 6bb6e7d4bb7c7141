#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pds {

struct SourcePos {
  int line = 0;  // 1-based; 0 = unknown
  int col = 0;

  std::string str() const {
    if (line == 0) return "?:?";
    return std::to_string(line) + ":" + std::to_string(col);
  }
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class LexError : public Error {
 public:
  LexError(const std::string& msg, SourcePos pos)
      : Error(pos.str() + ": lex error: " + msg), pos(pos) {}
  SourcePos pos;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, SourcePos pos)
      : Error(pos.str() + ": parse error: " + msg), pos(pos) {}
  SourcePos pos;
};

class DesugarError : public Error {
 public:
  explicit DesugarError(const std::string& msg) : Error("desugar error: " + msg) {}
};

// Carries every violation found in one pass.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> errs)
      : Error(join(errs)), errors(std::move(errs)) {}
  std::vector<std::string> errors;

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::string out = "validation failed (" + std::to_string(errs.size()) + " error(s))";
    for (const auto& e : errs) out += "\n  - " + e;
    return out;
  }
};

class EvalError : public Error {
 public:
  explicit EvalError(const std::string& msg) : Error("eval error: " + msg) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& msg) : Error("schema error: " + msg) {}
};

// splitmix64; used for seeding and as a stable uniform source everywhere.
// std::random distributions are implementation-defined, so artifacts written
// with them would not be byte-stable across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed + 0x9e3779b97f4a7c15ULL) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  int range(int lo, int hi) {  // inclusive ends
    return lo + int(below(uint64_t(hi - lo + 1)));
  }

  // Box-Muller; deterministic given the stream.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  Rng fork() { return Rng(next_u64()); }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(content.data(), std::streamsize(content.size()));
  if (!out) throw IoError("short write to " + path);
}

// Shortest float formatting that round-trips; stable across runs.
inline std::string format_float(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace pds
