#include "infnote/peernet/ledger.hpp"

namespace infnote::peernet {

std::vector<wire::ChainHead> BlockLedger::heads() const {
    std::vector<wire::ChainHead> out;
    for (const auto& id : followed())
        if (auto h = head_height(id)) out.push_back({id, *h});
    return out;
}

std::set<ChainId> StoreLedger::followed() const {
    std::set<ChainId> out;
    for (const auto& e : store_.list_chains(chainstore::ChainStatus::followed)) out.insert(e.chain_id);
    return out;
}

bool StoreLedger::is_banned(const ChainId& chain_id) const {
    auto e = store_.entry(chain_id);
    return e && e->status == chainstore::ChainStatus::banned;
}

std::optional<std::uint64_t> StoreLedger::head_height(const ChainId& chain_id) const {
    auto size = store_.chain_size(chain_id);
    if (!size || *size == 0) return std::nullopt;
    return *size - 1;
}

std::uint64_t StoreLedger::next_height(const ChainId& chain_id) const {
    auto size = store_.chain_size(chain_id);
    return size ? *size : 0;
}

Result<AppendOutcome> StoreLedger::append(const Block& block) { return store_.append_block(block); }

Result<std::vector<Block>> StoreLedger::range(const ChainId& chain_id, std::uint64_t from, std::uint64_t to) const {
    return store_.get_range(chain_id, from, to);
}

}  // namespace infnote::peernet
