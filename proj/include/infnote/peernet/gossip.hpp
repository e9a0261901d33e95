#pragma once

#include "infnote/apps/record.hpp"
#include "infnote/chaincore/block.hpp"

#include <cstddef>
#include <deque>
#include <list>
#include <map>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace infnote::peernet {

using chaincore::ChainId;

/// Bounded least-recently-used set of hashes.
class SeenSet {
public:
    explicit SeenSet(std::size_t capacity = 4096) : capacity_(capacity) {}

    /// True when the hash was not present. Either way it becomes most recent.
    bool insert(const Hash256& hash);
    bool contains(const Hash256& hash) const { return index_.count(hash) != 0; }
    std::size_t size() const { return index_.size(); }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::list<Hash256> order_;
    std::unordered_map<Hash256, std::list<Hash256>::iterator, Hash256Hasher> index_;
};

struct PooledRecord {
    apps::ChainRecord record;
    Hash256 id{};
    /// Length of the canonical JSON encoding.
    std::size_t bytes = 0;
};

/// Per-chain FIFO of verified records waiting for block inclusion. Each chain's
/// queue is bounded in encoded bytes; the oldest records go first.
class RecordPool {
public:
    static constexpr std::size_t kDefaultBytes = 16u << 20;

    explicit RecordPool(std::size_t max_bytes_per_chain = kDefaultBytes) : max_bytes_(max_bytes_per_chain) {}

    /// False if a record with the same id is already pooled.
    bool add(const ChainId& chain_id, apps::ChainRecord record);
    bool contains(const ChainId& chain_id, const Hash256& record_id) const;

    /// Removes and returns records in FIFO order while `fits(next)` holds.
    template <class Fits>
    std::vector<PooledRecord> take_while(const ChainId& chain_id, Fits fits);
    std::vector<PooledRecord> peek(const ChainId& chain_id) const;
    /// Drops pooled records that a block already carries.
    void remove(const ChainId& chain_id, const std::vector<Hash256>& record_ids);

    std::size_t count(const ChainId& chain_id) const;
    std::size_t bytes(const ChainId& chain_id) const;
    std::size_t evicted() const { return evicted_; }
    std::size_t max_bytes() const { return max_bytes_; }

private:
    struct Queue {
        std::deque<PooledRecord> records;
        std::unordered_set<Hash256, Hash256Hasher> ids;
        std::size_t bytes = 0;
    };

    std::size_t max_bytes_;
    std::map<ChainId, Queue> queues_;
    std::size_t evicted_ = 0;
};

template <class Fits>
std::vector<PooledRecord> RecordPool::take_while(const ChainId& chain_id, Fits fits) {
    std::vector<PooledRecord> out;
    auto it = queues_.find(chain_id);
    if (it == queues_.end()) return out;
    auto& q = it->second;
    while (!q.records.empty() && fits(q.records.front())) {
        q.bytes -= q.records.front().bytes;
        q.ids.erase(q.records.front().id);
        out.push_back(std::move(q.records.front()));
        q.records.pop_front();
    }
    return out;
}

}  // namespace infnote::peernet
