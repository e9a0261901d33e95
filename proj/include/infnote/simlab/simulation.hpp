#pragma once

#include "infnote/apps/record.hpp"
#include "infnote/chainstore/store.hpp"
#include "infnote/nodekit/light_cache.hpp"
#include "infnote/peernet/peer_node.hpp"
#include "infnote/simlab/topology.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace infnote::simlab {

using chaincore::Block;
using chaincore::ChainId;
using chaincore::KeyPair;

/// Virtual clock in microseconds with a stable ordering for equal times.
class EventLoop {
public:
    using Task = std::function<void()>;

    std::uint64_t now_us() const { return now_; }
    void at(std::uint64_t time_us, Task task);
    /// Runs events with time <= `until_us`, then advances the clock to it.
    void run_until(std::uint64_t until_us);
    /// Runs until no events remain.
    void run();
    bool empty() const { return queue_.empty(); }
    std::size_t processed() const { return processed_; }

private:
    struct Event {
        std::uint64_t time;
        std::uint64_t seq;
        Task task;
        bool operator>(const Event& other) const {
            return time != other.time ? time > other.time : seq > other.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t now_ = 0;
    std::uint64_t seq_ = 0;
    std::size_t processed_ = 0;
};

/// Wire bytes a message occupies on a simulated link. Block-carrying messages
/// count their serialized blocks; everything else its encoded frame.
std::size_t charged_bytes(const wire::Message& message);

/// Serialization delay of `bytes` on a link, rounded up to whole microseconds.
std::uint64_t serialization_us(const LinkParams& link, std::size_t bytes);
std::uint64_t latency_us(const LinkParams& link);

struct SimOptions {
    std::uint64_t seed = 1;
    peernet::PeerNodeConfig peer;
    std::size_t light_cache_depth = nodekit::kDefaultCacheDepth;
    /// Full-node stores live here; a fresh temporary directory when unset.
    std::optional<std::filesystem::path> work_dir;
    /// Unix time of virtual time zero, used for block timestamps.
    std::uint64_t epoch_s = 1'700'000'000;
    /// Frames travel as encoded text through PeerNode::on_frame, as on a
    /// socket. Off hands the decoded message over directly.
    bool encode_frames = true;
};

/// Every node runs an unmodified peernet::PeerNode; only the transport is
/// simulated. Links are reliable, FIFO per direction, and cost latency plus
/// bytes / bandwidth with a single transmission in flight per direction.
class Simulation {
public:
    /// Builds the nodes, seeds each full store with the owner's genesis and
    /// opens every link at time zero.
    static Result<std::unique_ptr<Simulation>> create(Topology topology, SimOptions options = {});
    ~Simulation();

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    const Topology& topology() const { return topology_; }
    const KeyPair& owner_key() const { return owner_; }
    const ChainId& chain_id() const { return chain_id_; }
    const Block& genesis() const { return genesis_; }
    EventLoop& loop() { return loop_; }
    std::uint64_t now_us() const { return loop_.now_us(); }
    std::size_t node_count() const { return nodes_.size(); }

    /// Seals the owner's next block with `payload` at the current virtual time
    /// without storing or sending it.
    Result<Block> seal_next(Bytes payload);
    /// Seals, appends at the owner and floods.
    Result<Block> produce(Bytes payload);
    /// Pushes new_block from `from` to its neighbour `to`, bypassing `from`'s
    /// ledger. Used to model a misbehaving owner.
    Status inject(std::uint32_t from, std::uint32_t to, const Block& block);

    peernet::PeerNode& peer(std::uint32_t node);
    peernet::BlockLedger& ledger(std::uint32_t node);
    /// Null for light nodes.
    chainstore::ChainStore* store(std::uint32_t node);
    /// Null for full nodes.
    nodekit::LightCache* cache(std::uint32_t node);

    /// Virtual time at which `node` first appended the block.
    std::optional<std::uint64_t> receipt_us(std::uint32_t node, const Hash256& block_hash) const;
    /// Virtual time at which `node` banned the chain.
    std::optional<std::uint64_t> banned_at_us(std::uint32_t node) const;
    /// new_block messages carrying `block_hash` sent by `node` at or after `since_us`.
    std::size_t new_block_sends(std::uint32_t node, const Hash256& block_hash, std::uint64_t since_us = 0) const;
    /// new_block messages carrying `block_hash` that `node` sent after it banned
    /// the chain, in event order rather than by timestamp.
    std::size_t new_block_sends_after_ban(std::uint32_t node, const Hash256& block_hash) const;
    std::size_t messages_delivered() const { return delivered_; }
    std::uint64_t bytes_charged() const { return bytes_charged_; }

    /// Extra per-node callback for every appended block, after receipt bookkeeping.
    void on_append(std::function<void(std::uint32_t node, const Block&)> listener) {
        append_listener_ = std::move(listener);
    }

private:
    struct NodeState;
    struct Endpoint;
    class Transport;

    Simulation(Topology topology, SimOptions options);
    Status build();
    void deliver(std::size_t direction, std::string frame, std::shared_ptr<wire::Message> message);

    Topology topology_;
    SimOptions options_;
    EventLoop loop_;
    KeyPair owner_{};
    ChainId chain_id_;
    Block genesis_;
    std::filesystem::path work_dir_;
    bool owns_work_dir_ = false;
    std::vector<std::unique_ptr<NodeState>> nodes_;
    /// Link l contributes directions 2l (a -> b) and 2l + 1 (b -> a).
    std::vector<std::uint64_t> link_free_us_;
    std::size_t delivered_ = 0;
    std::uint64_t bytes_charged_ = 0;
    std::uint64_t send_seq_ = 0;
    std::function<void(std::uint32_t, const Block&)> append_listener_;
};

struct Workload {
    /// Serialized size of each produced block, header and signature included.
    std::size_t block_size_bytes = 1u << 20;
    std::size_t block_count = 1;
    /// Gap between productions; 0 waits for every node to hold the previous
    /// block before producing the next.
    double block_interval_ms = 0;
    /// Virtual time reserved for handshakes before the first block.
    double start_ms = 2000;
    /// Encoded size of signed posts packed into each payload; 0 fills the
    /// payload with random bytes instead.
    std::size_t post_bytes = 0;
};

struct BlockReceipts {
    std::uint64_t height = 0;
    std::uint64_t produced_us = 0;
    double produced_ms = 0;
    std::size_t bytes = 0;
    /// Indexed by node id; relative to virtual time zero.
    std::vector<std::optional<std::uint64_t>> receipt_us;
    std::vector<std::optional<double>> receipt_ms;
    double max_latency_ms = 0;
    /// Over the non-owner nodes.
    double mean_latency_ms = 0;
};

struct ScenarioResult {
    std::string profile;
    std::uint64_t seed = 0;
    std::size_t node_count = 0;
    std::uint32_t owner = 0;
    std::vector<BlockReceipts> blocks;
    /// Largest latency over all blocks and nodes.
    double max_latency_ms = 0;
    /// Mean over blocks of the time until every node held the block.
    double mean_confirm_ms = 0;
    /// Mean over blocks and non-owner nodes of first-receipt latency.
    double mean_latency_ms = 0;
    /// Records carried per second between the first production and the last
    /// full confirmation. Filler payloads carry none.
    double posts_per_second = 0;
    bool complete = true;
};

/// Smallest serialized block: empty payload.
std::size_t min_block_bytes();

Result<ScenarioResult> run_scenario(const Topology& topology, const Workload& workload, std::uint64_t seed,
                                    std::string profile_name = {});

nlohmann::json result_to_json(const ScenarioResult& result);
/// node_id,block_height,receipt_ms
std::string result_to_csv(const ScenarioResult& result);

struct Scenario {
    Topology topology;
    Workload workload;
    std::uint64_t seed = 1;
    std::string profile;
};

/// {topology: {kind, n, light?, latency_ms?, bandwidth_bytes_per_s?} or
///  {kind: "custom", nodes, links, owner}, workload, seed, profile}
Result<Scenario> scenario_from_json(const nlohmann::json& value);
nlohmann::json scenario_to_json(const Scenario& scenario);
Result<Scenario> load_scenario(const std::filesystem::path& path);

}  // namespace infnote::simlab
