#include "infnote/common/bytes.hpp"
#include "infnote/common/result.hpp"

namespace infnote {

namespace {

constexpr char kDigits[] = "0123456789abcdef";

int nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::string to_hex(ByteView data) {
    std::string out(data.size() * 2, '\0');
    for (std::size_t i = 0; i < data.size(); ++i) {
        out[2 * i] = kDigits[data[i] >> 4];
        out[2 * i + 1] = kDigits[data[i] & 0x0f];
    }
    return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

void put_u32_be(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_u64_be(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t read_u32_be(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}

std::uint64_t read_u64_be(const std::uint8_t* p) {
    return (std::uint64_t{read_u32_be(p)} << 32) | read_u32_be(p + 4);
}

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::invalid_seed: return "invalid-seed";
        case Errc::invalid_key: return "invalid-key";
        case Errc::payload_too_large: return "payload-too-large";
        case Errc::wrong_owner: return "wrong-owner";
        case Errc::bad_chain_id: return "bad-chain-id";
        case Errc::bad_hash: return "bad-hash";
        case Errc::bad_signature: return "bad-signature";
        case Errc::bad_height: return "bad-height";
        case Errc::bad_time: return "bad-time";
        case Errc::bad_prev_hash: return "bad-prev-hash";
        case Errc::bad_chain: return "bad-chain";
        case Errc::bad_genesis: return "bad-genesis";
        case Errc::malformed_block: return "malformed-block";
        case Errc::unknown_chain: return "unknown-chain";
        case Errc::chain_banned: return "chain-banned";
        case Errc::chain_dropped: return "chain-dropped";
        case Errc::invalid_evidence: return "invalid-evidence";
        case Errc::invalid_entry: return "invalid-entry";
        case Errc::decode_error: return "decode-error";
        case Errc::oversize_content: return "oversize-content";
        case Errc::bad_schema: return "bad-schema";
        case Errc::bad_json: return "bad-json";
        case Errc::unknown_type: return "unknown-type";
        case Errc::bad_version: return "bad-version";
        case Errc::version_mismatch: return "version-mismatch";
        case Errc::not_found: return "not-found";
        case Errc::io_error: return "io-error";
        case Errc::bootstrap_failed: return "bootstrap-failed";
        case Errc::invalid_topology: return "invalid-topology";
        case Errc::invalid_argument: return "invalid-argument";
        case Errc::bind_failed: return "bind-failed";
        case Errc::not_served: return "not-served";
    }
    return "unknown";
}

}  // namespace infnote
