#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "topogen/core/error.hpp"
#include "topogen/core/grid.hpp"

namespace topogen {

// Little-endian scalar packing. The host is assumed little-endian (checked
// at compile time); files are defined LE regardless.
static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

inline void append_u32(std::string& out, std::uint32_t x) {
  char b[4];
  std::memcpy(b, &x, 4);
  out.append(b, 4);
}

inline void append_f32(std::string& out, float x) {
  char b[4];
  std::memcpy(b, &x, 4);
  out.append(b, 4);
}

inline void append_f64(std::string& out, double x) {
  char b[8];
  std::memcpy(b, &x, 8);
  out.append(b, 8);
}

// Density/image container format: 16-byte header (magic "TOPO", u32 nelx,
// u32 nely, u32 reserved) then nely rows of nelx float32 LE, top row first.
inline std::string encode_topo(const Grid& g) {
  std::string out;
  out.reserve(16 + g.size() * 4);
  out.append("TOPO", 4);
  append_u32(out, static_cast<std::uint32_t>(g.cols()));
  append_u32(out, static_cast<std::uint32_t>(g.rows()));
  append_u32(out, 0);
  for (std::size_t i = 0; i < g.size(); ++i) append_f32(out, static_cast<float>(g[i]));
  return out;
}

inline Grid decode_topo(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "TOPO") != 0)
    throw IntegrityError("topo: bad magic or truncated header");
  std::uint32_t nelx = 0, nely = 0;
  std::memcpy(&nelx, bytes.data() + 4, 4);
  std::memcpy(&nely, bytes.data() + 8, 4);
  if (nelx == 0 || nely == 0 || nelx > (1u << 20) || nely > (1u << 20))
    throw IntegrityError("topo: implausible dimensions");
  std::size_t expected = 16 + std::size_t(nelx) * nely * 4;
  if (bytes.size() != expected) throw IntegrityError("topo: payload size mismatch");
  Grid g(static_cast<int>(nely), static_cast<int>(nelx));
  for (std::size_t i = 0; i < g.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 16 + 4 * i, 4);
    g[i] = static_cast<double>(f);
  }
  return g;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for reading: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_topo(const std::filesystem::path& path, const Grid& g) {
  write_file(path, encode_topo(g));
}

inline Grid read_topo(const std::filesystem::path& path) { return decode_topo(read_file(path)); }

// 8-bit binary PGM preview; material (x=1) renders dark.
inline std::string encode_pgm(const Grid& g, const std::string& comment = "") {
  std::string out = "P5\n";
  if (!comment.empty()) out += "# " + comment + "\n";
  out += std::to_string(g.cols()) + " " + std::to_string(g.rows()) + "\n255\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    double x = std::min(1.0, std::max(0.0, g[i]));
    int pix = static_cast<int>(std::lround(255.0 * (1.0 - x)));
    out.push_back(static_cast<char>(pix));
  }
  return out;
}

inline void write_pgm(const std::filesystem::path& path, const Grid& g,
                      const std::string& comment = "") {
  write_file(path, encode_pgm(g, comment));
}

}  // namespace topogen
