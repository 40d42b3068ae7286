#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/nn/tensor.hpp"

namespace df4lcz {

/// LCZT container: "LCZT", version byte, dtype byte, ndim byte, ndim u32 LE
/// dims, then the little-endian row-major payload. No padding.
namespace lczt {

inline constexpr std::array<char, 4> kMagic{'L', 'C', 'Z', 'T'};
inline constexpr std::uint8_t kVersion = 1;

enum class DType : std::uint8_t { u8 = 0, f32 = 1, u16 = 2 };

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, std::uint8_t>) {
    return DType::u8;
  } else if constexpr (std::is_same_v<T, float>) {
    return DType::f32;
  } else {
    static_assert(std::is_same_v<T, std::uint16_t>, "LCZT stores u8, f32 or u16");
    return DType::u16;
  }
}

inline std::size_t element_size(DType t) { return t == DType::u8 ? 1 : t == DType::u16 ? 2 : 4; }

inline const char* dtype_name(DType t) { return t == DType::u8 ? "u8" : t == DType::u16 ? "u16" : "f32"; }

}  // namespace lczt

using AnyTensor = std::variant<BasicTensor<std::uint8_t>, BasicTensor<float>, BasicTensor<std::uint16_t>>;

namespace detail {

template <class U>
void store_le(U v, unsigned char* out) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}

template <class U>
U load_le(const unsigned char* in) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v = static_cast<U>(v | (static_cast<U>(in[i]) << (8 * i)));
  return v;
}

template <class T>
using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t, std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;

inline void read_exact(std::istream& in, void* dst, std::size_t n, const char* field) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("LCZT: truncated ") + field + " (expected " + std::to_string(n) + " bytes, got " +
                      std::to_string(in.gcount()) + ")");
  }
}

}  // namespace detail

template <class T>
void write_lczt(std::ostream& out, const BasicTensor<T>& t) {
  constexpr auto dtype = lczt::dtype_of<T>();
  if (t.rank() == 0 || t.rank() > 255) throw DimensionError("LCZT: rank must be in [1,255], got " + std::to_string(t.rank()));
  std::vector<unsigned char> head(7 + 4 * t.rank());
  std::memcpy(head.data(), lczt::kMagic.data(), 4);
  head[4] = lczt::kVersion;
  head[5] = static_cast<unsigned char>(dtype);
  head[6] = static_cast<unsigned char>(t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (t.dim(i) > 0xffffffffULL) throw DimensionError("LCZT: dimension exceeds u32");
    detail::store_le(static_cast<std::uint32_t>(t.dim(i)), head.data() + 7 + 4 * i);
  }
  out.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  using B = detail::Bits<T>;
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  } else {
    std::vector<unsigned char> buf(t.size() * sizeof(T));
    for (std::size_t i = 0; i < t.size(); ++i) detail::store_le(std::bit_cast<B>(t[i]), buf.data() + i * sizeof(T));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw InputError("LCZT: write failed");
}

inline AnyTensor read_lczt(std::istream& in) {
  unsigned char head[7];
  detail::read_exact(in, head, 4, "magic");
  if (std::memcmp(head, lczt::kMagic.data(), 4) != 0) {
    throw FormatError("LCZT: bad magic '" + std::string(reinterpret_cast<char*>(head), 4) + "'");
  }
  detail::read_exact(in, head + 4, 1, "version");
  if (head[4] != lczt::kVersion) throw FormatError("LCZT: unsupported version " + std::to_string(head[4]));
  detail::read_exact(in, head + 5, 1, "dtype");
  if (head[5] > 2) throw FormatError("LCZT: unknown dtype " + std::to_string(head[5]));
  detail::read_exact(in, head + 6, 1, "ndim");
  const std::size_t ndim = head[6];
  if (ndim == 0) throw FormatError("LCZT: ndim must be at least 1");
  std::vector<unsigned char> dims_raw(4 * ndim);
  detail::read_exact(in, dims_raw.data(), dims_raw.size(), "dims");
  Shape shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = detail::load_le<std::uint32_t>(dims_raw.data() + 4 * i);
    if (shape[i] == 0) throw FormatError("LCZT: dims[" + std::to_string(i) + "] is zero");
  }
  const auto dtype = static_cast<lczt::DType>(head[5]);
  auto read_payload = [&]<class T>(std::type_identity<T>) -> AnyTensor {
    const std::size_t n = shape_numel(shape);
    typename BasicTensor<T>::Storage data(n);
    detail::read_exact(in, data.data(), n * sizeof(T), "payload");
    if constexpr (std::endian::native != std::endian::little) {
      using B = detail::Bits<T>;
      for (auto& v : data) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        v = std::bit_cast<T>(detail::load_le<B>(b));
      }
    }
    return BasicTensor<T>(shape, std::move(data));
  };
  switch (dtype) {
    case lczt::DType::u8: return read_payload(std::type_identity<std::uint8_t>{});
    case lczt::DType::f32: return read_payload(std::type_identity<float>{});
    case lczt::DType::u16: return read_payload(std::type_identity<std::uint16_t>{});
  }
  throw FormatError("LCZT: unknown dtype");
}

template <class T>
BasicTensor<T> read_lczt_as(std::istream& in) {
  auto any = read_lczt(in);
  if (auto* t = std::get_if<BasicTensor<T>>(&any)) return std::move(*t);
  const auto got = static_cast<lczt::DType>(any.index());  // variant order follows the dtype codes
  throw FormatError(std::string("LCZT: dtype is ") + lczt::dtype_name(got) + ", expected " +
                    lczt::dtype_name(lczt::dtype_of<T>()));
}

template <class T>
void write_lczt(const std::filesystem::path& path, const BasicTensor<T>& t) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  write_lczt(out, t);
}

inline AnyTensor read_lczt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return read_lczt(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template <class T>
BasicTensor<T> read_lczt_as(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return read_lczt_as<T>(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace df4lcz
