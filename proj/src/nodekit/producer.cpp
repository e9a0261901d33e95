#include "infnote/nodekit/producer.hpp"

#include "infnote/apps/payload.hpp"

#include <algorithm>

namespace infnote::nodekit {

Result<std::optional<Block>> assemble_block(peernet::RecordPool& pool, const ChainId& chain_id,
                                            const KeyPair& owner, const Block& prev_head, std::uint64_t now,
                                            const RecordFilter& filter, AssembleReport* report) {
    AssembleReport local;
    // "[" and "]", plus one comma per record after the first.
    std::size_t size = 2;
    std::size_t kept = 0;
    std::vector<bool> keep;
    auto taken = pool.take_while(chain_id, [&](const peernet::PooledRecord& r) {
        if (filter && !filter(r.record)) {
            keep.push_back(false);
            return true;
        }
        const std::size_t grown = size + r.bytes + (kept > 0 ? 1 : 0);
        if (grown > chaincore::kMaxPayloadBytes) return false;
        size = grown;
        ++kept;
        keep.push_back(true);
        return true;
    });

    std::vector<apps::ChainRecord> records;
    records.reserve(kept);
    for (std::size_t i = 0; i < taken.size(); ++i) {
        if (!keep[i]) {
            ++local.filtered;
            continue;
        }
        records.push_back(std::move(taken[i].record));
    }
    local.included = records.size();
    if (report) *report = local;
    if (records.empty()) return std::optional<Block>{};

    auto payload = apps::encode_payload(records);
    if (!payload) return payload.error();
    if (report) report->payload_bytes = payload->size();
    chaincore::BlockDraft draft{chain_id, prev_head.height + 1, std::max(now, prev_head.time + 1), prev_head.hash,
                                std::move(*payload)};
    auto block = chaincore::seal_block(std::move(draft), owner);
    if (!block) return block.error();
    return std::optional<Block>{std::move(*block)};
}

BlockProducer::BlockProducer(KeyPair owner, ProducerConfig config, RecordFilter filter)
    : owner_(std::move(owner)),
      chain_id_(chaincore::derive_chain_id(owner_.public_key).value()),
      config_(config),
      filter_(std::move(filter)) {}

bool BlockProducer::due(const peernet::RecordPool& pool, std::uint64_t now_ms) const {
    if (pool.count(chain_id_) == 0) return false;
    const double fill = static_cast<double>(pool.bytes(chain_id_)) / static_cast<double>(chaincore::kMaxPayloadBytes);
    if (fill >= config_.fill_trigger) return true;
    std::lock_guard lock(head_mutex_);
    return now_ms >= last_block_ms_ + static_cast<std::uint64_t>(config_.block_interval.count());
}

Result<std::optional<Block>> BlockProducer::produce(peernet::BlockLedger& ledger, peernet::RecordPool& pool,
                                                    std::uint64_t now_s, std::uint64_t now_ms,
                                                    const Publish& publish, AssembleReport* report) {
    std::lock_guard lock(head_mutex_);
    auto head_height = ledger.head_height(chain_id_);
    if (!head_height) return make_error(Errc::not_found, "chain has no genesis yet");
    auto head = ledger.range(chain_id_, *head_height, *head_height);
    if (!head) return head.error();
    if (head->empty()) return make_error(Errc::not_found, "head block unavailable");

    auto block = assemble_block(pool, chain_id_, owner_, head->back(), now_s, filter_, report);
    if (!block || !*block) return block;
    auto outcome = publish ? publish(**block) : ledger.append(**block);
    if (!outcome) return outcome.error();
    if (*outcome != chainstore::AppendOutcome::appended)
        return make_error(Errc::bad_height, "sealed block was not appended");
    last_block_ms_ = now_ms;
    ++produced_;
    return block;
}

std::size_t BlockProducer::produced() const {
    std::lock_guard lock(head_mutex_);
    return produced_;
}

}  // namespace infnote::nodekit
