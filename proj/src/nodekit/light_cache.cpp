#include "infnote/nodekit/light_cache.hpp"

#include <algorithm>

namespace infnote::nodekit {

using chainstore::AppendOutcome;

LightCache::LightCache(std::size_t depth) : depth_(std::max<std::size_t>(depth, 1)) {}

Status LightCache::follow(const ChainId& chain_id, std::optional<PublicKey> owner_pub) {
    if (owner_pub) {
        auto derived = chaincore::derive_chain_id(*owner_pub);
        if (!derived) return derived.error();
        if (*derived != chain_id) return make_error(Errc::bad_chain_id, "owner key does not derive the chain id");
    }
    std::lock_guard lock(mutex_);
    auto& ring = rings_[chain_id];
    if (owner_pub) ring.owner = owner_pub;
    return {};
}

void LightCache::unfollow(const ChainId& chain_id) {
    std::lock_guard lock(mutex_);
    rings_.erase(chain_id);
}

std::set<ChainId> LightCache::followed() const {
    std::lock_guard lock(mutex_);
    std::set<ChainId> out;
    for (const auto& [id, ring] : rings_)
        if (!ring.evidence) out.insert(id);
    return out;
}

bool LightCache::is_banned(const ChainId& chain_id) const {
    std::lock_guard lock(mutex_);
    auto it = rings_.find(chain_id);
    return it != rings_.end() && it->second.evidence;
}

std::optional<std::uint64_t> LightCache::head_height(const ChainId& chain_id) const {
    std::lock_guard lock(mutex_);
    auto it = rings_.find(chain_id);
    if (it == rings_.end() || it->second.blocks.empty()) return std::nullopt;
    return it->second.blocks.back().height;
}

std::uint64_t LightCache::next_height(const ChainId& chain_id) const {
    auto head = head_height(chain_id);
    return head ? *head + 1 : 0;
}

std::uint64_t LightCache::sync_from(const ChainId& chain_id, std::uint64_t peer_height) const {
    {
        std::lock_guard lock(mutex_);
        auto it = rings_.find(chain_id);
        // Without an owner key only the genesis can be checked.
        if (it != rings_.end() && !it->second.owner) return 0;
    }
    const std::uint64_t window_start = peer_height + 1 >= depth_ ? peer_height + 1 - depth_ : 0;
    return std::max(next_height(chain_id), window_start);
}

Result<AppendOutcome> LightCache::append(const Block& block) {
    std::lock_guard lock(mutex_);
    auto it = rings_.find(block.chain_id);
    if (it == rings_.end()) return make_error(Errc::unknown_chain, block.chain_id.hex());
    Ring& ring = it->second;
    if (ring.evidence) return make_error(Errc::chain_banned, block.chain_id.hex());

    if (!ring.owner) {
        if (!block.is_genesis()) return make_error(Errc::unknown_chain, "owner key unknown; genesis needed");
        auto info = chaincore::parse_genesis_payload(block.payload);
        if (!info) return make_error(Errc::bad_genesis, "payload does not name an owner");
        if (auto st = chaincore::verify_genesis(block, info->owner_pub); !st) return st.error();
        ring.owner = info->owner_pub;
    } else {
        auto st = block.is_genesis() ? chaincore::verify_genesis(block, *ring.owner)
                                     : chaincore::verify_block(block, *ring.owner);
        if (!st) return st.error();
    }

    auto& blocks = ring.blocks;
    if (!blocks.empty() && block.height <= blocks.back().height) {
        if (block.height < blocks.front().height) {
            // Older than anything cached; nothing to compare against or keep.
            return AppendOutcome::duplicate;
        }
        const Block& held = blocks[block.height - blocks.front().height];
        if (held.hash == block.hash) return AppendOutcome::duplicate;
        ring.evidence = chaincore::EquivocationEvidence{held, block};
        return AppendOutcome::equivocation;
    }
    if (!blocks.empty() && block.height == blocks.back().height + 1) {
        if (auto st = chaincore::validate_successor(blocks.back(), block); !st) return st.error();
    } else {
        // First block, or one past a gap: the contiguous run starts over.
        blocks.clear();
    }
    blocks.push_back(block);
    while (blocks.size() > depth_) blocks.pop_front();
    return AppendOutcome::appended;
}

Result<std::vector<Block>> LightCache::range(const ChainId& chain_id, std::uint64_t from, std::uint64_t to) const {
    if (to < from) return make_error(Errc::invalid_argument, "range end before start");
    std::lock_guard lock(mutex_);
    auto it = rings_.find(chain_id);
    if (it == rings_.end()) return make_error(Errc::unknown_chain, chain_id.hex());
    std::vector<Block> out;
    for (const auto& b : it->second.blocks)
        if (b.height >= from && b.height <= to) out.push_back(b);
    return out;
}

std::vector<Block> LightCache::blocks(const ChainId& chain_id) const {
    std::lock_guard lock(mutex_);
    auto it = rings_.find(chain_id);
    if (it == rings_.end()) return {};
    return {it->second.blocks.begin(), it->second.blocks.end()};
}

std::optional<chaincore::EquivocationEvidence> LightCache::ban_evidence(const ChainId& chain_id) const {
    std::lock_guard lock(mutex_);
    auto it = rings_.find(chain_id);
    if (it == rings_.end()) return std::nullopt;
    return it->second.evidence;
}

std::optional<PublicKey> LightCache::owner(const ChainId& chain_id) const {
    std::lock_guard lock(mutex_);
    auto it = rings_.find(chain_id);
    if (it == rings_.end()) return std::nullopt;
    return it->second.owner;
}

}  // namespace infnote::nodekit
