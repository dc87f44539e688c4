#ifndef FABCHAIN_BYTES_HPP
#define FABCHAIN_BYTES_HPP

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fabchain {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <std::size_t N>
using FixedBytes = std::array<std::uint8_t, N>;

using Hash256 = FixedBytes<32>;

// Lowercase hex without prefix.
std::string to_hex(ByteView bytes);
// Lowercase hex with a 0x prefix.
std::string to_hex0x(ByteView bytes);
// Accepts an optional 0x prefix, either case. Throws std::invalid_argument.
Bytes from_hex(std::string_view text);

template <std::size_t N>
FixedBytes<N> fixed_from_hex(std::string_view text) {
  const Bytes raw = from_hex(text);
  if (raw.size() != N)
    throw std::invalid_argument("expected " + std::to_string(N) + " bytes of hex, got " +
                                std::to_string(raw.size()));
  FixedBytes<N> out{};
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

inline void append(Bytes& out, ByteView bytes) { out.insert(out.end(), bytes.begin(), bytes.end()); }

void put_u32_be(Bytes& out, std::uint32_t value);
void put_u64_be(Bytes& out, std::uint64_t value);
std::uint64_t read_u64_be(ByteView bytes, std::size_t offset);

// SHA-256 over the given bytes.
Hash256 sha256(ByteView bytes);

// Number of leading zero bits of a digest, most significant bit first.
unsigned leading_zero_bits(const Hash256& digest);

/// Fixed-width byte string with a distinct type per domain concept
/// (addresses, job ids, content keys). Ordered bytewise.
template <class Tag, std::size_t N>
struct StrongBytes {
  static constexpr std::size_t size = N;
  FixedBytes<N> bytes{};

  auto operator<=>(const StrongBytes&) const = default;

  ByteView view() const { return bytes; }
  std::string hex() const { return to_hex0x(bytes); }
  static StrongBytes from_hex(std::string_view text) { return StrongBytes{fixed_from_hex<N>(text)}; }
};

}  // namespace fabchain

#endif
