#pragma once

#include "infnote/chainstore/store.hpp"
#include "infnote/wire/message.hpp"

#include <optional>
#include <set>
#include <vector>

namespace infnote::peernet {

using chainstore::AppendOutcome;
using chaincore::Block;
using chaincore::ChainId;

/// What the gossip engine needs from local block storage. Full nodes back it
/// with a ChainStore; light nodes with a bounded cache.
class BlockLedger {
public:
    virtual ~BlockLedger() = default;

    virtual std::set<ChainId> followed() const = 0;
    virtual bool is_banned(const ChainId& chain_id) const = 0;
    /// Height of the newest block held, if any.
    virtual std::optional<std::uint64_t> head_height(const ChainId& chain_id) const = 0;
    /// Height the next block must have. For a light cache this may be past
    /// blocks it never held.
    virtual std::uint64_t next_height(const ChainId& chain_id) const = 0;
    virtual Result<AppendOutcome> append(const Block& block) = 0;
    /// Blocks in [from, to] this ledger can serve, height ordered.
    virtual Result<std::vector<Block>> range(const ChainId& chain_id, std::uint64_t from, std::uint64_t to) const = 0;
    virtual bool serves_sync() const = 0;
    /// First height worth requesting from a peer whose head is `peer_height`.
    virtual std::uint64_t sync_from(const ChainId& chain_id, std::uint64_t /*peer_height*/) const {
        return next_height(chain_id);
    }

    std::vector<wire::ChainHead> heads() const;
};

class StoreLedger : public BlockLedger {
public:
    explicit StoreLedger(chainstore::ChainStore& store) : store_(store) {}

    std::set<ChainId> followed() const override;
    bool is_banned(const ChainId& chain_id) const override;
    std::optional<std::uint64_t> head_height(const ChainId& chain_id) const override;
    std::uint64_t next_height(const ChainId& chain_id) const override;
    Result<AppendOutcome> append(const Block& block) override;
    Result<std::vector<Block>> range(const ChainId& chain_id, std::uint64_t from, std::uint64_t to) const override;
    bool serves_sync() const override { return true; }

    chainstore::ChainStore& store() { return store_; }

private:
    chainstore::ChainStore& store_;
};

}  // namespace infnote::peernet
