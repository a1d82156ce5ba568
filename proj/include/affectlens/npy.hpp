#pragma once

// Reader/writer for the NPY 1.0 container: magic "\x93NUMPY", version bytes,
// little-endian u16 header length, a Python-literal header dict, then the raw
// C-order payload. Only the dtypes this project stores are supported.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "affectlens/error.hpp"
#include "affectlens/tensor.hpp"

namespace affectlens::npy {

enum class DType { F32, F64, U8 };

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) {
    return DType::F32;
  } else if constexpr (std::is_same_v<T, double>) {
    return DType::F64;
  } else {
    static_assert(std::is_same_v<T, std::uint8_t>, "unsupported NPY element type");
    return DType::U8;
  }
}

constexpr std::string_view descr(DType t) {
  switch (t) {
    case DType::F32: return "<f4";
    case DType::F64: return "<f8";
    case DType::U8: return "|u1";
  }
  return "";
}

constexpr std::size_t item_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
  }
  return 0;
}

struct Header {
  DType dtype = DType::F32;
  std::vector<std::size_t> shape;
};

namespace detail {

inline constexpr char kMagic[] = "\x93NUMPY";
inline constexpr std::size_t kMagicLen = 6;

inline std::string format_header(const Header& h) {
  std::string dict = "{'descr': '";
  dict += descr(h.dtype);
  dict += "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < h.shape.size(); ++i) {
    dict += std::to_string(h.shape[i]);
    if (h.shape.size() == 1 || i + 1 < h.shape.size()) dict += ",";
    if (i + 1 < h.shape.size()) dict += " ";
  }
  dict += "), }";
  // pad so magic + version + length + dict is a multiple of 64
  const std::size_t preamble = kMagicLen + 2 + 2;
  std::size_t total = preamble + dict.size() + 1;
  const std::size_t padded = (total + 63) / 64 * 64;
  dict.append(padded - total, ' ');
  dict += '\n';
  return dict;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

// Value text following "'key':" up to the next top-level comma or brace.
inline std::string_view dict_value(std::string_view dict, std::string_view key,
                                   const std::string& where) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = dict.find(quoted);
  if (pos == std::string_view::npos) {
    throw Error(ErrorKind::ParseError, where + ": NPY header lacks " + quoted);
  }
  pos = dict.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) {
    throw Error(ErrorKind::ParseError, where + ": malformed NPY header");
  }
  std::string_view rest = dict.substr(pos + 1);
  int depth = 0;
  std::size_t end = 0;
  for (; end < rest.size(); ++end) {
    const char c = rest[end];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth == 0 && (c == ',' || c == '}')) break;
  }
  return trim(rest.substr(0, end));
}

inline Header parse_header(std::string_view dict, const std::string& where) {
  Header h;
  const auto d = dict_value(dict, "descr", where);
  if (d == "'<f4'") {
    h.dtype = DType::F32;
  } else if (d == "'<f8'") {
    h.dtype = DType::F64;
  } else if (d == "'|u1'" || d == "'<u1'" || d == "'|b1'") {
    h.dtype = DType::U8;
  } else {
    throw Error(ErrorKind::ParseError, where + ": unsupported dtype " + std::string(d));
  }
  if (dict_value(dict, "fortran_order", where) != "False") {
    throw Error(ErrorKind::ParseError, where + ": Fortran-order arrays are not supported");
  }
  auto s = dict_value(dict, "shape", where);
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') {
    throw Error(ErrorKind::ParseError, where + ": malformed shape " + std::string(s));
  }
  s = s.substr(1, s.size() - 2);
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto tok = trim(s.substr(0, comma));
    if (!tok.empty()) {
      std::size_t v = 0;
      for (char c : tok) {
        if (c < '0' || c > '9') {
          throw Error(ErrorKind::ParseError, where + ": malformed shape entry");
        }
        v = v * 10 + static_cast<std::size_t>(c - '0');
      }
      h.shape.push_back(v);
    }
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return h;
}

template <typename T>
void to_little_endian(std::vector<T>& values) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (auto& v : values) {
      auto* b = reinterpret_cast<unsigned char*>(&v);
      std::reverse(b, b + sizeof(T));
    }
  }
}

}  // namespace detail

inline std::pair<Header, std::vector<char>> read_raw(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, where + ": cannot open");
  char preamble[10];
  if (!in.read(preamble, 10) ||
      std::memcmp(preamble, detail::kMagic, detail::kMagicLen) != 0) {
    throw Error(ErrorKind::ParseError, where + ": not an NPY file");
  }
  const auto major = static_cast<unsigned char>(preamble[6]);
  if (major != 1) {
    throw Error(ErrorKind::ParseError,
                where + ": NPY version " + std::to_string(major) + " not supported");
  }
  const std::size_t header_len = static_cast<unsigned char>(preamble[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(preamble[9])) << 8);
  std::string dict(header_len, '\0');
  if (!in.read(dict.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorKind::ParseError, where + ": truncated NPY header");
  }
  Header h = detail::parse_header(dict, where);
  const std::size_t nbytes = shape_size(h.shape) * item_size(h.dtype);
  std::vector<char> payload(nbytes);
  if (nbytes > 0 && !in.read(payload.data(), static_cast<std::streamsize>(nbytes))) {
    throw Error(ErrorKind::ShapeMismatch,
                where + ": payload shorter than shape " + shape_to_string(h.shape));
  }
  in.peek();
  if (!in.eof()) {
    throw Error(ErrorKind::ShapeMismatch,
                where + ": trailing bytes after payload of shape " + shape_to_string(h.shape));
  }
  return {std::move(h), std::move(payload)};
}

/// Reads an array of element type T. f32/f64 files may be read as either
/// float type (widening or narrowing); u8 only as u8.
template <typename T>
Tensor<T> read(const std::filesystem::path& path) {
  auto [h, payload] = read_raw(path);
  const std::size_t n = shape_size(h.shape);
  auto decode = [&]<typename Stored>() {
    std::vector<Stored> raw(n);
    if (n) std::memcpy(raw.data(), payload.data(), n * sizeof(Stored));
    detail::to_little_endian(raw);
    return raw;
  };
  if (h.dtype == dtype_of<T>()) {
    return Tensor<T>(h.shape, decode.template operator()<T>());
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (h.dtype == DType::F32 || h.dtype == DType::F64) {
      std::vector<T> out(n);
      if (h.dtype == DType::F32) {
        auto raw = decode.template operator()<float>();
        std::copy(raw.begin(), raw.end(), out.begin());
      } else {
        auto raw = decode.template operator()<double>();
        std::transform(raw.begin(), raw.end(), out.begin(),
                       [](double v) { return static_cast<T>(v); });
      }
      return Tensor<T>(h.shape, std::move(out));
    }
  }
  throw Error(ErrorKind::ParseError, path.string() + ": dtype " +
                                         std::string(descr(h.dtype)) + " where " +
                                         std::string(descr(dtype_of<T>())) + " expected");
}

template <typename T>
void write(const std::filesystem::path& path, const Tensor<T>& tensor) {
  Header h{dtype_of<T>(), tensor.shape};
  const std::string dict = detail::format_header(h);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, path.string() + ": cannot open for writing");
  out.write(detail::kMagic, detail::kMagicLen);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const char len[2] = {static_cast<char>(dict.size() & 0xff),
                       static_cast<char>((dict.size() >> 8) & 0xff)};
  out.write(len, 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  std::vector<T> payload = tensor.data;
  detail::to_little_endian(payload);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(T)));
  if (!out) throw Error(ErrorKind::IoFailure, path.string() + ": write failed");
}

}  // namespace affectlens::npy
