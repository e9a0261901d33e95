#pragma once

#include "infnote/chaincore/block.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace infnote::wire {

using chaincore::Block;
using chaincore::ChainId;

inline constexpr int kEnvelopeVersion = 1;
inline constexpr int kProtocolVersion = 1;
inline constexpr std::string_view kSubprotocol = "infnote/1";
inline constexpr std::size_t kMaxBlocksPerMessage = 64;
/// Largest text frame a session will send or accept.
inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

enum class NodeKind { full, light };
std::string_view node_kind_name(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view name);

struct ChainHead {
    ChainId chain_id;
    std::uint64_t height = 0;

    bool operator==(const ChainHead&) const = default;
};

struct PeerAddress {
    std::string host;
    std::uint16_t port = 0;
    std::uint64_t last_seen = 0;
    std::uint32_t failures = 0;

    bool operator==(const PeerAddress&) const = default;
};

struct Hello {
    int protocol_version = kProtocolVersion;
    NodeKind node_kind = NodeKind::full;
    /// Chains with at least one stored block.
    std::vector<ChainHead> chain_heads;
    /// Where the sender accepts connections, if anywhere.
    std::optional<std::uint16_t> listen_port;

    bool operator==(const Hello&) const = default;
};

struct HelloAck : Hello {
    bool operator==(const HelloAck&) const = default;
};

struct GetPeers {
    bool operator==(const GetPeers&) const = default;
};

struct Peers {
    std::vector<PeerAddress> addresses;

    bool operator==(const Peers&) const = default;
};

struct GetBlocks {
    ChainId chain_id;
    std::uint64_t from = 0;
    std::uint64_t to = 0;

    bool operator==(const GetBlocks&) const = default;
};

struct Blocks {
    ChainId chain_id;
    std::vector<Block> blocks;

    bool operator==(const Blocks&) const = default;
};

struct NewBlock {
    Block block;

    bool operator==(const NewBlock&) const = default;
};

struct SubmitRecords {
    ChainId chain_id;
    /// Record objects as received; each is parsed and verified on its own.
    std::vector<nlohmann::json> records;

    bool operator==(const SubmitRecords&) const = default;
};

struct ErrorMessage {
    std::string code;
    std::string detail;

    bool operator==(const ErrorMessage&) const = default;
};

using Message =
    std::variant<Hello, HelloAck, GetPeers, Peers, GetBlocks, Blocks, NewBlock, SubmitRecords, ErrorMessage>;

std::string_view message_type(const Message& message);

/// {"v":1,"type":...,"body":{...}} as compact UTF-8 JSON.
std::string encode_message(const Message& message);

/// Unknown body fields are ignored. Errors: bad-json for anything that is not
/// a well-formed envelope or body, bad-version, unknown-type, malformed-block
/// for block hex that does not parse.
Result<Message> decode_message(std::string_view text);

ErrorMessage error_message(const Error& error);

/// Splits blocks into height-ordered messages of at most 64 blocks whose
/// encoding stays within `frame_budget` bytes. A single block always gets
/// its own message even if it alone exceeds the budget.
std::vector<Blocks> chunk_blocks(const ChainId& chain_id, std::vector<Block> blocks,
                                 std::size_t frame_budget = kMaxFrameBytes);

/// Bytes one block occupies inside an encoded blocks message.
std::size_t encoded_block_bytes(const Block& block);

struct SyncCandidate {
    ChainId chain_id;
    /// First height to request.
    std::uint64_t from = 0;
    std::uint64_t peer_height = 0;

    bool operator==(const SyncCandidate&) const = default;
};

struct HandshakeOutcome {
    NodeKind peer_kind = NodeKind::full;
    std::vector<ChainHead> peer_heads;
    std::optional<std::uint16_t> peer_listen_port;
    /// Followed chains on which the peer is ahead of us.
    std::vector<SyncCandidate> candidates;
};

/// What one side brings to a handshake.
struct HandshakeState {
    Hello hello;
    std::set<ChainId> followed;
};

/// Evaluates a peer's hello (or hello_ack) against local state.
Result<HandshakeOutcome> evaluate_hello(const HandshakeState& local, const Hello& remote);

/// Runs hello / hello_ack through the codec. Returns the initiator's and the
/// responder's view, or version-mismatch.
Result<std::pair<HandshakeOutcome, HandshakeOutcome>> handshake(const HandshakeState& initiator,
                                                                const HandshakeState& responder);

}  // namespace infnote::wire
