#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "boxdeconv/errors.hpp"
#include "boxdeconv/signal.hpp"

namespace boxdeconv::io {

enum class FileKind { SignalText, Pgm, Bdf1 };

// Routing by extension: .pgm / .pnm are graymaps, .bdf1 / .bdf the raw
// float grid, anything else the one-value-per-line signal format.
inline FileKind detect_kind(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "pgm" || ext == "pnm") return FileKind::Pgm;
  if (ext == "bdf1" || ext == "bdf") return FileKind::Bdf1;
  return FileKind::SignalText;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ParseError("unexpected end of file in header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64le(std::ostream& os, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline double get_f64le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw ParseError("unexpected end of file in payload");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

// PNM header tokens: whitespace-separated, '#' starts a comment to end of
// line anywhere between tokens.
inline std::string pnm_token(std::istream& is) {
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  if (c == EOF) throw ParseError("graymap header ended early");
  std::string tok;
  while (c != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = is.get();
  }
  if (c == '#') is.unget();
  return tok;
}

inline long pnm_int(std::istream& is, const char* what) {
  const std::string tok = pnm_token(is);
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0') {
    throw ParseError(std::string("graymap header: bad ") + what + " '" + tok + "'");
  }
  return v;
}

}  // namespace detail

// ---- signal text: one decimal value per line, '#' comments -------------

inline void write_signal(std::ostream& os, const Signal& x) {
  os << "# n=" << x.size() << "\n";
  for (double v : x) os << detail::format_double(v) << "\n";
}

inline void write_signal(const std::string& path, const Signal& x) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open '" + path + "' for writing");
  write_signal(os, x);
  if (!os.flush()) throw ParseError("write to '" + path + "' failed");
}

inline Signal read_signal(std::istream& is) {
  Signal x;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const std::string body = line.substr(begin);
    char* end = nullptr;
    const double v = std::strtod(body.c_str(), &end);
    std::size_t rest = static_cast<std::size_t>(end - body.c_str());
    while (rest < body.size() && (body[rest] == ' ' || body[rest] == '\t' || body[rest] == '\r')) ++rest;
    if (end == body.c_str() || rest != body.size()) {
      throw ParseError("signal line " + std::to_string(lineno) + ": expected one number, got '" +
                       body + "'");
    }
    x.push_back(v);
  }
  return x;
}

inline Signal read_signal(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return read_signal(is);
}

// ---- PGM: P2 (ASCII) and P5 (binary), maxval up to 65535 ----------------

struct PgmFile {
  Image2D image;
  int maxval = 255;
};

inline void write_pgm(std::ostream& os, const Image2D& img, int maxval = 255,
                      bool binary = true) {
  if (maxval < 1 || maxval > 65535) throw PreconditionError("write_pgm: maxval out of range");
  if (img.height < 1 || img.width < 1) throw DimensionError("write_pgm: empty image");
  const auto quantize = [&](double v) {
    const long q = std::lround(std::min(std::max(v, 0.0), static_cast<double>(maxval)));
    return static_cast<int>(q);
  };
  os << (binary ? "P5" : "P2") << "\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  if (binary) {
    for (double v : img.values) {
      const int q = quantize(v);
      if (maxval > 255) os.put(static_cast<char>((q >> 8) & 0xff));  // big-endian per PNM
      os.put(static_cast<char>(q & 0xff));
    }
  } else {
    for (int i = 0; i < img.height; ++i) {
      for (int j = 0; j < img.width; ++j) {
        os << quantize(img.at(i, j)) << (j + 1 == img.width ? "" : " ");
      }
      os << "\n";
    }
  }
}

inline void write_pgm(const std::string& path, const Image2D& img, int maxval = 255,
                      bool binary = true) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open '" + path + "' for writing");
  write_pgm(os, img, maxval, binary);
  if (!os.flush()) throw ParseError("write to '" + path + "' failed");
}

inline PgmFile read_pgm(std::istream& is) {
  const std::string magic = detail::pnm_token(is);
  if (magic != "P2" && magic != "P5") {
    throw ParseError("graymap: expected P2 or P5, got '" + magic + "'");
  }
  const long w = detail::pnm_int(is, "width");
  const long h = detail::pnm_int(is, "height");
  const long maxval = detail::pnm_int(is, "maxval");
  if (w < 1 || h < 1 || w > 1 << 20 || h > 1 << 20 || static_cast<double>(w) * h > 1e8) {
    throw ParseError("graymap: unreasonable dimensions");
  }
  if (maxval < 1 || maxval > 65535) throw ParseError("graymap: maxval out of range");

  PgmFile out;
  out.maxval = static_cast<int>(maxval);
  out.image.height = static_cast<int>(h);
  out.image.width = static_cast<int>(w);
  out.image.values.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));

  if (magic == "P5") {
    // exactly one whitespace byte separates header and payload
    for (auto& v : out.image.values) {
      int hi = 0;
      if (maxval > 255) {
        hi = is.get();
        if (hi == EOF) throw ParseError("graymap: truncated P5 payload");
      }
      const int lo = is.get();
      if (lo == EOF) throw ParseError("graymap: truncated P5 payload");
      const long q = maxval > 255 ? (static_cast<long>(hi) << 8) | lo : lo;
      if (q > maxval) throw ParseError("graymap: sample exceeds maxval");
      v = static_cast<double>(q);
    }
  } else {
    for (auto& v : out.image.values) {
      const long q = detail::pnm_int(is, "sample");
      if (q < 0 || q > maxval) throw ParseError("graymap: sample out of range");
      v = static_cast<double>(q);
    }
  }
  return out;
}

inline PgmFile read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path + "'");
  auto got = read_pgm(is);
  return got;
}

// ---- BDF1: raw float grid, bit-exact round trip --------------------------
// Layout: magic "BDF1", u32 height, u32 width (both little-endian), then
// height*width IEEE-754 doubles, row-major, little-endian.

inline void write_bdf1(std::ostream& os, const Image2D& img) {
  if (img.height < 0 || img.width < 0) throw DimensionError("write_bdf1: negative dimensions");
  os.write("BDF1", 4);
  detail::put_u32le(os, static_cast<std::uint32_t>(img.height));
  detail::put_u32le(os, static_cast<std::uint32_t>(img.width));
  for (double v : img.values) detail::put_f64le(os, v);
}

inline void write_bdf1(const std::string& path, const Image2D& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open '" + path + "' for writing");
  write_bdf1(os, img);
  if (!os.flush()) throw ParseError("write to '" + path + "' failed");
}

inline Image2D read_bdf1(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "BDF1") throw ParseError("not a BDF1 file");
  const std::uint32_t h = detail::get_u32le(is);
  const std::uint32_t w = detail::get_u32le(is);
  if (static_cast<std::uint64_t>(h) * w > (1ull << 27)) {
    throw CapacityError("BDF1: grid too large");
  }
  Image2D img;
  img.height = static_cast<int>(h);
  img.width = static_cast<int>(w);
  img.values.resize(static_cast<std::size_t>(h) * w);
  for (auto& v : img.values) v = detail::get_f64le(is);
  return img;
}

inline Image2D read_bdf1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return read_bdf1(is);
}

// Convenience image read/write that routes on the extension; signals are
// not images, so SignalText is rejected here.
inline Image2D read_image(const std::string& path) {
  switch (detect_kind(path)) {
    case FileKind::Pgm: return read_pgm(path).image;
    case FileKind::Bdf1: return read_bdf1(path);
    case FileKind::SignalText: break;
  }
  throw ParseError("'" + path + "': expected an image extension (.pgm or .bdf1)");
}

inline void write_image(const std::string& path, const Image2D& img, int pgm_maxval = 255) {
  switch (detect_kind(path)) {
    case FileKind::Pgm: write_pgm(path, img, pgm_maxval, true); return;
    case FileKind::Bdf1: write_bdf1(path, img); return;
    case FileKind::SignalText: break;
  }
  throw ParseError("'" + path + "': expected an image extension (.pgm or .bdf1)");
}

}  // namespace boxdeconv::io
