#pragma once

#include "infnote/chainstore/store.hpp"

#include <map>
#include <vector>

namespace infnote::chainstore {

/// Holds blocks that arrived ahead of the stored head until the gap fills.
/// Up to two distinct blocks are kept per height, so an equivocation that
/// arrives out of order is still detected when the second one is appended.
class ReorderBuffer {
public:
    explicit ReorderBuffer(std::size_t max_blocks_per_chain = 1024) : max_per_chain_(max_blocks_per_chain) {}

    /// Returns false when the block was not kept (full, or a third variant).
    bool offer(const Block& block);

    struct Drained {
        std::vector<Block> appended;
        bool equivocation = false;
    };

    /// Appends every buffered block that now extends the stored head.
    /// Blocks the store rejects are discarded.
    Drained drain(ChainStore& store, const ChainId& chain_id);

    std::size_t pending(const ChainId& chain_id) const;
    /// Lowest buffered height for the chain, if any.
    std::optional<std::uint64_t> lowest_pending(const ChainId& chain_id) const;
    void clear(const ChainId& chain_id) { buffers_.erase(chain_id); }

private:
    std::size_t max_per_chain_;
    std::map<ChainId, std::map<std::uint64_t, std::vector<Block>>> buffers_;
};

}  // namespace infnote::chainstore
