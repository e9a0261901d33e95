#include "infnote/chainstore/reorder.hpp"

namespace infnote::chainstore {

bool ReorderBuffer::offer(const Block& block) {
    auto& chain = buffers_[block.chain_id];
    auto& variants = chain[block.height];
    for (const auto& b : variants)
        if (b.hash == block.hash) return true;
    if (variants.size() >= 2 || pending(block.chain_id) >= max_per_chain_) {
        if (variants.empty()) chain.erase(block.height);
        return false;
    }
    variants.push_back(block);
    return true;
}

ReorderBuffer::Drained ReorderBuffer::drain(ChainStore& store, const ChainId& chain_id) {
    Drained out;
    auto it = buffers_.find(chain_id);
    if (it == buffers_.end()) return out;
    auto& chain = it->second;
    while (!chain.empty()) {
        auto size = store.chain_size(chain_id);
        if (!size) break;
        auto first = chain.begin();
        if (first->first > *size) break;
        std::vector<Block> variants = std::move(first->second);
        chain.erase(first);
        for (const auto& block : variants) {
            auto outcome = store.append_block(block);
            if (!outcome) continue;
            if (*outcome == AppendOutcome::appended) out.appended.push_back(block);
            if (*outcome == AppendOutcome::equivocation) out.equivocation = true;
        }
        if (out.equivocation) {
            buffers_.erase(it);
            break;
        }
    }
    if (auto again = buffers_.find(chain_id); again != buffers_.end() && again->second.empty()) buffers_.erase(again);
    return out;
}

std::size_t ReorderBuffer::pending(const ChainId& chain_id) const {
    auto it = buffers_.find(chain_id);
    if (it == buffers_.end()) return 0;
    std::size_t n = 0;
    for (const auto& [h, v] : it->second) n += v.size();
    return n;
}

std::optional<std::uint64_t> ReorderBuffer::lowest_pending(const ChainId& chain_id) const {
    auto it = buffers_.find(chain_id);
    if (it == buffers_.end() || it->second.empty()) return std::nullopt;
    return it->second.begin()->first;
}

}  // namespace infnote::chainstore
