#include "infnote/peernet/gossip.hpp"

#include <algorithm>

namespace infnote::peernet {

bool SeenSet::insert(const Hash256& hash) {
    if (auto it = index_.find(hash); it != index_.end()) {
        order_.splice(order_.begin(), order_, it->second);
        return false;
    }
    order_.push_front(hash);
    index_.emplace(hash, order_.begin());
    while (index_.size() > capacity_) {
        index_.erase(order_.back());
        order_.pop_back();
    }
    return true;
}

bool RecordPool::add(const ChainId& chain_id, apps::ChainRecord record) {
    auto& q = queues_[chain_id];
    const std::string json = apps::record_to_json(record);
    PooledRecord entry{std::move(record), chaincore::sha256(as_bytes(json)), json.size()};
    if (!q.ids.insert(entry.id).second) return false;
    q.bytes += entry.bytes;
    q.records.push_back(std::move(entry));
    while (q.bytes > max_bytes_ && q.records.size() > 1) {
        q.bytes -= q.records.front().bytes;
        q.ids.erase(q.records.front().id);
        q.records.pop_front();
        ++evicted_;
    }
    return true;
}

bool RecordPool::contains(const ChainId& chain_id, const Hash256& record_id) const {
    auto it = queues_.find(chain_id);
    return it != queues_.end() && it->second.ids.count(record_id);
}

std::vector<PooledRecord> RecordPool::peek(const ChainId& chain_id) const {
    auto it = queues_.find(chain_id);
    if (it == queues_.end()) return {};
    return {it->second.records.begin(), it->second.records.end()};
}

void RecordPool::remove(const ChainId& chain_id, const std::vector<Hash256>& record_ids) {
    auto it = queues_.find(chain_id);
    if (it == queues_.end()) return;
    auto& q = it->second;
    std::unordered_set<Hash256, Hash256Hasher> drop;
    for (const auto& id : record_ids)
        if (q.ids.count(id)) drop.insert(id);
    if (drop.empty()) return;
    std::deque<PooledRecord> kept;
    for (auto& r : q.records) {
        if (drop.count(r.id)) {
            q.bytes -= r.bytes;
            q.ids.erase(r.id);
        } else {
            kept.push_back(std::move(r));
        }
    }
    q.records = std::move(kept);
}

std::size_t RecordPool::count(const ChainId& chain_id) const {
    auto it = queues_.find(chain_id);
    return it == queues_.end() ? 0 : it->second.records.size();
}

std::size_t RecordPool::bytes(const ChainId& chain_id) const {
    auto it = queues_.find(chain_id);
    return it == queues_.end() ? 0 : it->second.bytes;
}

}  // namespace infnote::peernet
