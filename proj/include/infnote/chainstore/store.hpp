#pragma once

#include "infnote/chaincore/block.hpp"
#include "infnote/chainstore/chain_log.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace infnote::chainstore {

using chaincore::Block;
using chaincore::ChainId;
using chaincore::EquivocationEvidence;
using chaincore::PublicKey;

enum class ChainSource { default_list, user_added };
enum class ChainStatus { followed, dropped, banned };

std::string_view status_name(ChainStatus status);
std::string_view source_name(ChainSource source);

struct ChainRegistryEntry {
    ChainId chain_id;
    PublicKey owner_pub{};
    std::string label;
    ChainSource source = ChainSource::user_added;
    ChainStatus status = ChainStatus::followed;
    std::optional<EquivocationEvidence> ban_evidence;
};

/// Line format shared by the default list and the user override files:
/// `chain_id_hex owner_pub_hex label`, label running to end of line.
/// '#' starts a comment line.
Result<std::vector<ChainRegistryEntry>> read_registry_file(const std::filesystem::path& path);
Status write_registry_file(const std::filesystem::path& path, const std::vector<ChainRegistryEntry>& entries);

enum class AppendOutcome {
    appended,
    /// Same height, same hash as the stored block; nothing changed.
    duplicate,
    /// Same height, different valid block; the chain is now banned.
    equivocation,
};

struct BlockLocation {
    ChainId chain_id;
    std::uint64_t height = 0;
};

/// Durable multi-chain block store plus the chain registry.
///
/// Layout under the data directory:
///   defaults.list              default chains (unless a path is supplied)
///   followed.list dropped.list user overrides, each chain in at most one
///   bans/<chain>.evidence      registry line, then the two conflicting blocks
///   chains/<chain>.log(.idx)   block logs
///
/// Appends to one chain are serialized; reads take a shared lock and see a
/// consistent prefix.
class ChainStore {
public:
    using AppendHook = std::function<void(const Block&)>;
    using BanHook = std::function<void(const ChainId&, const EquivocationEvidence&)>;

    static Result<std::unique_ptr<ChainStore>> open(
        const std::filesystem::path& data_dir,
        std::optional<std::filesystem::path> default_list = std::nullopt);

    ChainStore(const ChainStore&) = delete;
    ChainStore& operator=(const ChainStore&) = delete;

    // Registry.
    Status follow_chain(ChainRegistryEntry entry);
    Status drop_chain(const ChainId& chain_id);
    std::vector<ChainRegistryEntry> list_chains(std::optional<ChainStatus> filter = std::nullopt) const;
    std::optional<ChainRegistryEntry> entry(const ChainId& chain_id) const;
    bool is_followed(const ChainId& chain_id) const;

    // Blocks.
    Result<AppendOutcome> append_block(const Block& block);
    Result<std::optional<Block>> get_block(const ChainId& chain_id, std::uint64_t height) const;
    Result<std::optional<Block>> get_head(const ChainId& chain_id) const;
    /// Stored blocks with heights in [from, to], clamped to what exists.
    Result<std::vector<Block>> get_range(const ChainId& chain_id, std::uint64_t from, std::uint64_t to) const;
    /// Number of stored blocks (head height + 1), 0 for an empty chain.
    Result<std::uint64_t> chain_size(const ChainId& chain_id) const;
    std::optional<BlockLocation> find_by_hash(const Hash256& hash) const;

    Status record_equivocation(const EquivocationEvidence& evidence);

    /// Feeds stored blocks in height order to `projector.apply(block)`.
    template <class Projector>
    Status replay(const ChainId& chain_id, Projector& projector) const {
        auto size = chain_size(chain_id);
        if (!size) return size.error();
        for (std::uint64_t h = 0; h < *size; ++h) {
            auto block = get_block(chain_id, h);
            if (!block) return block.error();
            projector.apply(**block);
        }
        return {};
    }

    /// Full re-verification of a stored chain; returns the number of violations.
    Result<std::size_t> verify_chain(const ChainId& chain_id) const;

    Status export_chain(const ChainId& chain_id, const std::filesystem::path& file) const;
    /// Imports a golden-vector file whose first block is a genesis. Unknown
    /// chains are followed first. Returns the number of newly appended blocks.
    Result<std::size_t> import_chain(const std::filesystem::path& file);

    void add_append_hook(AppendHook hook);
    void add_ban_hook(BanHook hook);

    const std::filesystem::path& data_dir() const { return dir_; }

private:
    struct Chain {
        mutable std::shared_mutex mutex;
        std::unique_ptr<ChainLog> log;
    };

    explicit ChainStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    Status load(std::optional<std::filesystem::path> default_list);
    Status save_overrides() const;
    Status persist_ban(const ChainRegistryEntry& entry) const;
    ChainRegistryEntry resolve(const ChainId& chain_id) const;
    Result<Chain*> chain_for(const ChainId& chain_id) const;
    Result<Chain*> open_chain(const ChainId& chain_id);
    std::filesystem::path log_path(const ChainId& chain_id) const;
    Status ban_locked(const ChainRegistryEntry& entry, const EquivocationEvidence& evidence);

    std::filesystem::path dir_;

    mutable std::mutex registry_mutex_;
    std::map<ChainId, ChainRegistryEntry> defaults_;
    /// User overrides; status is followed or dropped.
    std::map<ChainId, ChainRegistryEntry> overrides_;
    std::map<ChainId, ChainRegistryEntry> bans_;
    std::map<ChainId, std::unique_ptr<Chain>> chains_;
    std::unordered_map<Hash256, BlockLocation, Hash256Hasher> by_hash_;

    std::mutex hooks_mutex_;
    std::vector<AppendHook> append_hooks_;
    std::vector<BanHook> ban_hooks_;
};

}  // namespace infnote::chainstore
