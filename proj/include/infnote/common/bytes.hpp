#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace infnote {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <std::size_t N>
using ByteArray = std::array<std::uint8_t, N>;

using Hash256 = ByteArray<32>;

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string_view as_chars(ByteView b) {
    return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::string to_hex(ByteView data);

template <std::size_t N>
std::string to_hex(const ByteArray<N>& data) {
    return to_hex(ByteView{data});
}

/// Accepts lowercase or uppercase digits; odd length or any other character fails.
std::optional<Bytes> from_hex(std::string_view hex);

template <std::size_t N>
std::optional<ByteArray<N>> array_from_hex(std::string_view hex) {
    if (hex.size() != 2 * N) return std::nullopt;
    auto raw = from_hex(hex);
    if (!raw) return std::nullopt;
    ByteArray<N> out{};
    std::copy(raw->begin(), raw->end(), out.begin());
    return out;
}

inline bool is_zero(ByteView data) {
    for (auto b : data)
        if (b != 0) return false;
    return true;
}

struct Hash256Hasher {
    std::size_t operator()(const Hash256& h) const noexcept {
        std::size_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | h[i];
        return v;
    }
};

// Big-endian integer helpers used by every binary layout in the project.
void put_u32_be(Bytes& out, std::uint32_t v);
void put_u64_be(Bytes& out, std::uint64_t v);
std::uint32_t read_u32_be(const std::uint8_t* p);
std::uint64_t read_u64_be(const std::uint8_t* p);

}  // namespace infnote
