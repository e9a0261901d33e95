#pragma once

#include "infnote/apps/record.hpp"
#include "infnote/peernet/address_book.hpp"
#include "infnote/peernet/gossip.hpp"
#include "infnote/peernet/ledger.hpp"
#include "infnote/wire/message.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

namespace infnote::peernet {

using SessionId = std::uint64_t;

/// Delivery of messages to sessions. Implementations decide the encoding:
/// the live node writes WebSocket text frames, the simulator models links.
class PeerTransport {
public:
    virtual ~PeerTransport() = default;
    virtual void send(SessionId session, const wire::Message& message) = 0;
    virtual void close(SessionId session) = 0;
};

struct PeerNodeConfig {
    wire::NodeKind kind = wire::NodeKind::full;
    std::size_t sync_window = wire::kMaxBlocksPerMessage;
    std::size_t sync_frame_budget = wire::kMaxFrameBytes;
    std::size_t seen_capacity = 4096;
    std::size_t pool_bytes = RecordPool::kDefaultBytes;
    std::size_t min_peers = 3;
    std::size_t max_shared_peers = 64;
    /// Out-of-order blocks held per chain while a gap is being synced.
    std::size_t reorder_capacity = 1024;
    std::optional<std::uint16_t> listen_port;
};

struct SubmitOutcome {
    std::size_t accepted = 0;
    std::size_t duplicates = 0;
    /// Index into the submitted batch and the reason it was refused.
    std::vector<std::pair<std::size_t, Error>> rejected;
};

struct SessionInfo {
    SessionId id = 0;
    bool outbound = false;
    bool established = false;
    wire::NodeKind peer_kind = wire::NodeKind::full;
    std::optional<PeerAddress> remote;
    std::map<ChainId, std::uint64_t> peer_heads;
};

struct PeerStats {
    std::size_t frames_in = 0;
    std::size_t messages_out = 0;
    std::size_t new_block_sends = 0;
    std::size_t blocks_appended = 0;
    std::size_t blocks_ignored = 0;
    std::size_t sync_requests = 0;
    std::size_t records_forwarded = 0;
    std::size_t penalties = 0;
};

/// Gossip and sync engine for one node. Single-threaded: the owner serializes
/// all calls (the live node holds a lock, the simulator is sequential).
class PeerNode {
public:
    using Clock = std::function<std::uint64_t()>;
    using BlockListener = std::function<void(const Block&)>;
    using PeersListener = std::function<void(const std::vector<PeerAddress>&)>;

    PeerNode(PeerNodeConfig config, BlockLedger& ledger, PeerTransport& transport, AddressBook* book = nullptr,
             apps::SignatureCache* cache = nullptr, Clock clock = {});

    /// Outbound sessions send hello at once; inbound ones wait for it.
    void on_session_open(SessionId session, bool outbound, std::optional<PeerAddress> remote = std::nullopt);
    void on_frame(SessionId session, std::string_view text);
    void on_message(SessionId session, const wire::Message& message);
    void on_session_closed(SessionId session);

    /// Appends a locally produced or imported block and floods it.
    Result<AppendOutcome> publish_block(const Block& block);
    /// Sends new_block to every established session except `origin`.
    std::size_t gossip_block(std::optional<SessionId> origin, const Block& block);
    SubmitOutcome submit_records(std::optional<SessionId> origin, const ChainId& chain_id,
                                 const std::vector<nlohmann::json>& records);
    void request_peers();

    void set_block_listener(BlockListener listener) { block_listener_ = std::move(listener); }
    void set_peers_listener(PeersListener listener) { peers_listener_ = std::move(listener); }

    RecordPool& pool() { return pool_; }
    const SeenSet& seen() const { return seen_; }
    const PeerStats& stats() const { return stats_; }
    std::vector<SessionInfo> sessions() const;
    std::size_t established_count() const;
    /// True while any chain sync is waiting on a peer.
    bool syncing() const { return !sync_owner_.empty(); }
    const PeerNodeConfig& config() const { return config_; }
    BlockLedger& ledger() { return ledger_; }

private:
    struct Session {
        SessionInfo info;
        /// chain -> (next height to request, target height)
        std::map<ChainId, std::pair<std::uint64_t, std::uint64_t>> syncs;
        /// Chains this peer served bad blocks for; never synced from it again.
        std::set<ChainId> sync_failed;
    };

    wire::Hello local_hello() const;
    void send(SessionId session, const wire::Message& message);
    void penalize(SessionId session);
    void establish(Session& session, const wire::HandshakeOutcome& outcome);

    void handle_hello(Session& session, const wire::Hello& hello, bool is_ack);
    void handle_get_blocks(Session& session, const wire::GetBlocks& request);
    void handle_blocks(Session& session, const wire::Blocks& blocks);
    void handle_new_block(Session& session, const Block& block);
    void handle_error(Session& session, const wire::ErrorMessage& error);

    void start_sync(Session& session, const ChainId& chain_id, std::uint64_t from, std::uint64_t peer_height);
    void request_window(Session& session, const ChainId& chain_id);
    void finish_sync(Session& session, const ChainId& chain_id);
    void resume_sync(const ChainId& chain_id);

    void after_append(const Block& block, std::optional<SessionId> origin);
    void drain_pending(const ChainId& chain_id);

    PeerNodeConfig config_;
    BlockLedger& ledger_;
    PeerTransport& transport_;
    AddressBook* book_;
    apps::SignatureCache* cache_;
    Clock clock_;

    std::map<SessionId, Session> sessions_;
    /// Chain -> the session currently syncing it.
    std::map<ChainId, SessionId> sync_owner_;
    /// Blocks that arrived ahead of the local head.
    std::map<ChainId, std::map<std::uint64_t, std::pair<Block, std::optional<SessionId>>>> pending_;
    SeenSet seen_;
    SeenSet seen_records_;
    RecordPool pool_;
    PeerStats stats_;
    BlockListener block_listener_;
    PeersListener peers_listener_;
};

}  // namespace infnote::peernet
