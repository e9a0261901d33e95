#pragma once

#include "infnote/nodekit/api.hpp"
#include "infnote/nodekit/config.hpp"
#include "infnote/nodekit/light_cache.hpp"

#include <json.hpp>

#include <memory>

namespace infnote::nodekit {

struct NodeStatus {
    NodeKind kind = NodeKind::full;
    std::size_t peers = 0;
    /// Followed chains and their head heights; absent heights are empty chains.
    std::map<ChainId, std::optional<std::uint64_t>> chains;
    std::uint16_t p2p_port = 0;
    std::optional<std::uint16_t> api_port;
    std::size_t pooled_records = 0;
    std::size_t blocks_produced = 0;
};

/// `{"kind":..,"peers":..,"chains":{id:height},...}`.
nlohmann::json status_to_json(const NodeStatus& status);

/// A running node: WebSocket peer sessions ("infnote/1"), bootstrap and
/// reconnect, chain-owner block production, and for full nodes the
/// direct-connect HTTP API. Everything stops when the handle is destroyed.
class Node {
public:
    ~Node();
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    /// Opens storage, binds the listener (bind-failed is fatal) and starts
    /// background work. Failed bootstrap is retried with backoff.
    static Result<std::unique_ptr<Node>> start(NodeConfig config);

    void stop();

    /// Opens an outbound session and waits for the WebSocket handshake.
    Status connect(const PeerAddress& address);

    NodeStatus status() const;
    const NodeConfig& config() const;
    std::uint16_t p2p_port() const;
    std::optional<std::uint16_t> api_port() const;

    /// Null for light nodes.
    chainstore::ChainStore* store();
    /// Null for full nodes.
    LightCache* cache();

    peernet::SubmitOutcome submit_records(const ChainId& chain_id, const std::vector<nlohmann::json>& records);
    /// Seals a block now if the owner's pool is non-empty.
    Result<std::optional<Block>> produce_now();
    /// Appends and floods a block (an import, or one sealed elsewhere).
    Result<chainstore::AppendOutcome> publish(const Block& block);
    peernet::PeerStats peer_stats() const;

    struct Impl;

private:
    explicit Node(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

/// Starts a node from a validated configuration.
Result<std::unique_ptr<Node>> run_node(const NodeConfig& config);

}  // namespace infnote::nodekit
