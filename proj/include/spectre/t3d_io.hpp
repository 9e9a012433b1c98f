#pragma once

// T3D tensor files: a 16-byte magic, one JSON header line, then raw
// little-endian doubles in Tensor3 storage order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "spectre/tensor3.hpp"

namespace spectre {

inline constexpr char kT3DMagic[16] = {'S', 'P', 'E', 'C', 'T', 'R', 'E', '-', 'T', '3', 'D', '\0', 0, 0, 0, 0};
inline constexpr const char* kT3DOrder = "column-major (i1 fastest, then i2, then i3)";

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return out;
}

}  // namespace detail

inline void write_t3d(std::ostream& os, const Tensor3& t) {
  os.write(kT3DMagic, sizeof kT3DMagic);
  nlohmann::json header = {{"dims", {t.n1(), t.n2(), t.n3()}}, {"dtype", "f64"}, {"order", kT3DOrder}};
  os << header.dump() << '\n';
  for (double v : t.values()) {
    std::uint64_t bits = detail::to_le(std::bit_cast<std::uint64_t>(v));
    os.write(reinterpret_cast<const char*>(&bits), 8);
  }
  if (!os) throw std::runtime_error("write_t3d: stream write failed");
}

inline Tensor3 read_t3d(std::istream& is) {
  char magic[16];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kT3DMagic, sizeof magic) != 0)
    throw FormatError("T3D: bad magic");
  std::string line;
  if (!std::getline(is, line)) throw FormatError("T3D: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("T3D: malformed header: ") + e.what());
  }
  if (!header.contains("dims") || !header["dims"].is_array() || header["dims"].size() != 3)
    throw FormatError("T3D: header needs three dims");
  if (header.value("dtype", "") != "f64") throw FormatError("T3D: only dtype f64 is supported");
  if (header.value("order", "") != kT3DOrder) throw FormatError("T3D: unknown element order");
  Dims3 d{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& v = header["dims"][i];
    if (!v.is_number_integer() || v.get<long long>() <= 0) throw FormatError("T3D: dims must be positive integers");
    d[i] = static_cast<Index>(v.get<long long>());
  }
  Tensor3 t(d);
  for (Index i = 0; i < t.size(); ++i) {
    std::uint64_t bits;
    if (!is.read(reinterpret_cast<char*>(&bits), 8)) throw FormatError("T3D: payload shorter than dims");
    t.data()[i] = std::bit_cast<double>(detail::to_le(bits));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("T3D: payload longer than dims");
  return t;
}

inline void save_t3d(const std::filesystem::path& path, const Tensor3& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_t3d(os, t);
}

inline Tensor3 load_t3d(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_t3d(is);
}

}  // namespace spectre
