#pragma once

#include "infnote/peernet/gossip.hpp"
#include "infnote/peernet/ledger.hpp"

#include <chrono>
#include <functional>
#include <mutex>
#include <optional>

namespace infnote::nodekit {

using chaincore::Block;
using chaincore::ChainId;
using chaincore::KeyPair;

/// Owner-side veto applied before a record is bundled. False drops it from the pool.
using RecordFilter = std::function<bool(const apps::ChainRecord&)>;

struct AssembleReport {
    std::size_t included = 0;
    std::size_t filtered = 0;
    std::size_t payload_bytes = 0;
};

/// Takes pooled records in FIFO order while they fit in one payload (records
/// are never split, and the first one that does not fit stops the block),
/// then seals a successor of `prev_head`. Block time is max(now, prev + 1).
/// An empty pool, or one emptied by the filter, yields nothing.
Result<std::optional<Block>> assemble_block(peernet::RecordPool& pool, const ChainId& chain_id,
                                            const KeyPair& owner, const Block& prev_head, std::uint64_t now,
                                            const RecordFilter& filter = {}, AssembleReport* report = nullptr);

struct ProducerConfig {
    std::chrono::milliseconds block_interval{10'000};
    /// Seal early once the pool holds this fraction of a full payload.
    double fill_trigger = 0.9;
};

/// Chain-owner block production. The head lock is held from reading the head
/// through sealing and appending, so two calls can never both seal a block at
/// the same height.
class BlockProducer {
public:
    using Publish = std::function<Result<chainstore::AppendOutcome>(const Block&)>;

    BlockProducer(KeyPair owner, ProducerConfig config = {}, RecordFilter filter = {});

    const ChainId& chain_id() const { return chain_id_; }
    const ProducerConfig& config() const { return config_; }

    /// True when the interval has elapsed since the last block or the pool is
    /// past the fill trigger. `now_ms` is a monotonic clock reading.
    bool due(const peernet::RecordPool& pool, std::uint64_t now_ms) const;

    /// Seals at most one block. `publish` appends it (and gossips it, for a
    /// live node); by default it goes straight to the ledger.
    Result<std::optional<Block>> produce(peernet::BlockLedger& ledger, peernet::RecordPool& pool,
                                         std::uint64_t now_s, std::uint64_t now_ms = 0,
                                         const Publish& publish = {}, AssembleReport* report = nullptr);

    std::size_t produced() const;

private:
    KeyPair owner_;
    ChainId chain_id_;
    ProducerConfig config_;
    RecordFilter filter_;
    mutable std::mutex head_mutex_;
    std::uint64_t last_block_ms_ = 0;
    std::size_t produced_ = 0;
};

}  // namespace infnote::nodekit
