#pragma once

#include "infnote/chaincore/crypto.hpp"
#include "infnote/common/bytes.hpp"
#include "infnote/common/result.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace infnote::chaincore {

inline constexpr std::uint8_t kBlockVersion = 0x01;
inline constexpr std::size_t kMaxPayloadBytes = 1u << 20;
/// version (1) + chain_id (32) + height (8) + time (8) + prev_hash (32) + length (4)
inline constexpr std::size_t kCanonicalHeaderBytes = 85;
inline constexpr std::size_t kSignatureBytes = 64;

/// SHA-256 of the chain owner's compressed public key.
struct ChainId {
    Hash256 bytes{};

    std::string hex() const { return to_hex(bytes); }
    static std::optional<ChainId> from_hex(std::string_view hex);

    auto operator<=>(const ChainId&) const = default;
};

Result<ChainId> derive_chain_id(const PublicKey& owner_pub);

struct BlockDraft {
    ChainId chain_id;
    std::uint64_t height = 0;
    std::uint64_t time = 0;
    Hash256 prev_hash{};
    Bytes payload;
};

struct Block {
    ChainId chain_id;
    std::uint64_t height = 0;
    std::uint64_t time = 0;
    Hash256 prev_hash{};
    Hash256 hash{};
    Signature signature{};
    Bytes payload;

    bool is_genesis() const { return height == 0; }
    bool operator==(const Block&) const = default;
};

struct EquivocationEvidence {
    Block block_a;
    Block block_b;
};

/// Hash preimage: version || chain_id || height || time || prev_hash || len || payload,
/// all integers big-endian.
Result<Bytes> canonical_block_bytes(const ChainId& chain_id, std::uint64_t height, std::uint64_t time,
                                    const Hash256& prev_hash, ByteView payload);

Result<Block> seal_block(BlockDraft draft, const KeyPair& owner);

/// Checks chain id, then hash, then signature; the first failure wins.
Status verify_block(const Block& block, const PublicKey& owner_pub);

/// Checks height, time, prev hash and chain, in that order. Assumes `prev` is verified.
Status validate_successor(const Block& prev, const Block& next);

/// Evidence only when both blocks independently verify under `owner_pub`.
std::optional<EquivocationEvidence> detect_equivocation(const Block& a, const Block& b,
                                                        const PublicKey& owner_pub);

Status check_evidence(const EquivocationEvidence& evidence, const PublicKey& owner_pub);

/// Wire form: canonical bytes followed by the 64-byte signature.
Bytes serialize_block(const Block& block);

/// Parses the wire form and recomputes the hash. Signature validity is not checked.
Result<Block> deserialize_block(ByteView data);

std::string block_to_hex(const Block& block);
Result<Block> block_from_hex(std::string_view hex);

/// Genesis payloads embed the owner key so any verifier can bootstrap the chain id.
Bytes make_genesis_payload(const PublicKey& owner_pub, std::string_view label);

struct GenesisInfo {
    PublicKey owner_pub{};
    std::string label;
};

std::optional<GenesisInfo> parse_genesis_payload(ByteView payload);

/// Genesis shape rules on top of verify_block: height 0, zero prev hash, and a
/// payload that names `owner_pub`.
Status verify_genesis(const Block& block, const PublicKey& owner_pub);

Result<Block> make_genesis(const KeyPair& owner, std::string_view label, std::uint64_t time);

}  // namespace infnote::chaincore

template <>
struct std::hash<infnote::chaincore::ChainId> {
    std::size_t operator()(const infnote::chaincore::ChainId& id) const noexcept {
        return infnote::Hash256Hasher{}(id.bytes);
    }
};
