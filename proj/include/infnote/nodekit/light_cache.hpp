#pragma once

#include "infnote/peernet/ledger.hpp"

#include <deque>
#include <map>
#include <mutex>
#include <optional>

namespace infnote::nodekit {

using chaincore::Block;
using chaincore::ChainId;
using chaincore::PublicKey;

inline constexpr std::size_t kDefaultCacheDepth = 64;

/// Light-node ledger: per chain, a ring of the most recent contiguous blocks.
///
/// Every cached block verified under the owner key, and neighbours in the ring
/// passed validate_successor. A block past a gap restarts the ring, so the run
/// never has holes. The owner key normally comes from the registry entry; for
/// a chain followed without one, a verified genesis supplies it.
class LightCache : public peernet::BlockLedger {
public:
    explicit LightCache(std::size_t depth = kDefaultCacheDepth);

    Status follow(const ChainId& chain_id, std::optional<PublicKey> owner_pub = std::nullopt);
    void unfollow(const ChainId& chain_id);

    std::set<ChainId> followed() const override;
    bool is_banned(const ChainId& chain_id) const override;
    std::optional<std::uint64_t> head_height(const ChainId& chain_id) const override;
    std::uint64_t next_height(const ChainId& chain_id) const override;
    Result<chainstore::AppendOutcome> append(const Block& block) override;
    Result<std::vector<Block>> range(const ChainId& chain_id, std::uint64_t from, std::uint64_t to) const override;
    bool serves_sync() const override { return false; }
    /// Only the last `depth` blocks below the peer's head are worth fetching.
    std::uint64_t sync_from(const ChainId& chain_id, std::uint64_t peer_height) const override;

    std::vector<Block> blocks(const ChainId& chain_id) const;
    std::optional<chaincore::EquivocationEvidence> ban_evidence(const ChainId& chain_id) const;
    std::optional<PublicKey> owner(const ChainId& chain_id) const;
    std::size_t depth() const { return depth_; }

private:
    struct Ring {
        std::optional<PublicKey> owner;
        std::deque<Block> blocks;
        std::optional<chaincore::EquivocationEvidence> evidence;
    };

    std::size_t depth_;
    mutable std::mutex mutex_;
    std::map<ChainId, Ring> rings_;
};

}  // namespace infnote::nodekit
