#pragma once

#include "infnote/apps/payload.hpp"
#include "infnote/apps/record.hpp"
#include "infnote/chaincore/block.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace infnote::apps {

struct PostEntry {
    ChainRecord record;
    std::uint64_t block_height = 0;
    bool visible = true;
    /// reply_to names a post this projection has not seen.
    bool reply_unresolved = false;

    bool operator==(const PostEntry&) const = default;
};

struct PendingDelete {
    std::uint64_t block_height = 0;
    PublicKey deleter{};

    bool operator==(const PendingDelete&) const = default;
};

struct ForumState {
    std::map<Hash256, PostEntry> posts;
    /// parent post_id -> replies in chain order
    std::map<Hash256, std::vector<Hash256>> replies;
    /// post_ids in chain order
    std::vector<Hash256> order;
    /// delete markers whose target has not appeared yet
    std::map<Hash256, std::vector<PendingDelete>> pending_deletes;
    std::size_t skipped_records = 0;

    bool operator==(const ForumState&) const = default;
};

struct NameEntry {
    PublicKey pub{};
    std::uint64_t block_height = 0;
    std::optional<std::string> profile;

    bool operator==(const NameEntry&) const = default;
};

struct IdentityState {
    std::map<std::string, NameEntry> names;
    std::map<PublicKey, std::string> reverse;
    std::size_t skipped_records = 0;

    bool operator==(const IdentityState&) const = default;
};

/// Left fold of post and delete_marker records in (height, payload index)
/// order. Records that fail verify_record are skipped. Genesis carries no
/// records.
class ForumProjector {
public:
    explicit ForumProjector(const PublicKey& chain_owner, SignatureCache* cache = nullptr)
        : owner_(chain_owner), cache_(cache) {}

    void apply(const chaincore::Block& block);
    void apply_record(const ChainRecord& record, std::uint64_t height);
    const ForumState& state() const { return state_; }
    void reset() { state_ = {}; }

private:
    PublicKey owner_;
    SignatureCache* cache_;
    ForumState state_;
};

/// First valid claim on a name wins; a key holds one name and may move to an
/// unclaimed one, releasing the old name.
class IdentityProjector {
public:
    explicit IdentityProjector(SignatureCache* cache = nullptr) : cache_(cache) {}

    void apply(const chaincore::Block& block);
    void apply_record(const ChainRecord& record, std::uint64_t height);
    const IdentityState& state() const { return state_; }
    void reset() { state_ = {}; }

private:
    SignatureCache* cache_;
    IdentityState state_;
};

ForumState project_forum(std::span<const chaincore::Block> blocks, const PublicKey& chain_owner,
                         SignatureCache* cache = nullptr);
IdentityState project_identity(std::span<const chaincore::Block> blocks, SignatureCache* cache = nullptr);

}  // namespace infnote::apps
