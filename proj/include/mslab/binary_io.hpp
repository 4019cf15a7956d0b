#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "mslab/types.hpp"

namespace mslab::binary {

// Little-endian encoders for the flat snapshot layouts.

inline void put_u64(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("snapshot: truncated header");
  std::uint64_t value = 0;
  for (int i = 7; i >= 0; --i) value = (value << 8) | bytes[i];
  return value;
}

inline void put_f64(std::ostream& out, double value) { put_u64(out, std::bit_cast<std::uint64_t>(value)); }

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_complex(std::ostream& out, Complex z) {
  put_f64(out, z.real());
  put_f64(out, z.imag());
}

inline Complex get_complex(std::istream& in) {
  const double re = get_f64(in);
  const double im = get_f64(in);
  return {re, im};
}

}  // namespace mslab::binary
