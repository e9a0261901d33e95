#include "infnote/apps/projection.hpp"

#include <algorithm>

namespace infnote::apps {

void ForumProjector::apply(const chaincore::Block& block) {
    if (block.is_genesis()) return;
    for (const auto& record : decode_payload_lenient(block.payload, &state_.skipped_records))
        apply_record(record, block.height);
}

void ForumProjector::apply_record(const ChainRecord& record, std::uint64_t height) {
    if (record.kind() == RecordKind::identity) return;
    if (!verify_record(record, cache_)) {
        ++state_.skipped_records;
        return;
    }

    if (const auto* del = record.delete_marker()) {
        auto it = state_.posts.find(del->target);
        if (it == state_.posts.end()) {
            state_.pending_deletes[del->target].push_back({height, record.author_pub});
            return;
        }
        auto& entry = it->second;
        const bool authorized = record.author_pub == entry.record.author_pub || record.author_pub == owner_;
        // Fold order guarantees height >= entry.block_height here.
        if (authorized) entry.visible = false;
        return;
    }

    const auto& post = *record.post();
    if (state_.posts.count(post.post_id)) return;  // replayed post: first inclusion stands

    PostEntry entry{record, height, true, false};
    if (auto pending = state_.pending_deletes.find(post.post_id); pending != state_.pending_deletes.end()) {
        for (const auto& d : pending->second) {
            const bool authorized = d.deleter == record.author_pub || d.deleter == owner_;
            if (authorized && d.block_height >= height) entry.visible = false;
        }
        state_.pending_deletes.erase(pending);
    }
    if (post.reply_to) {
        entry.reply_unresolved = state_.posts.count(*post.reply_to) == 0;
        state_.replies[*post.reply_to].push_back(post.post_id);
    }
    // Earlier replies that were waiting on this post now resolve.
    if (auto children = state_.replies.find(post.post_id); children != state_.replies.end()) {
        for (const auto& child : children->second)
            if (auto c = state_.posts.find(child); c != state_.posts.end()) c->second.reply_unresolved = false;
    }
    state_.posts.emplace(post.post_id, std::move(entry));
    state_.order.push_back(post.post_id);
}

void IdentityProjector::apply(const chaincore::Block& block) {
    if (block.is_genesis()) return;
    for (const auto& record : decode_payload_lenient(block.payload, &state_.skipped_records))
        apply_record(record, block.height);
}

void IdentityProjector::apply_record(const ChainRecord& record, std::uint64_t height) {
    const auto* id = record.identity();
    if (!id) return;
    if (!verify_record(record, cache_)) {
        ++state_.skipped_records;
        return;
    }
    if (auto taken = state_.names.find(id->name); taken != state_.names.end()) {
        // Only the holder may refresh the profile of a claimed name.
        if (taken->second.pub == record.author_pub) taken->second.profile = id->profile;
        return;
    }
    if (auto old = state_.reverse.find(record.author_pub); old != state_.reverse.end())
        state_.names.erase(old->second);
    state_.names[id->name] = NameEntry{record.author_pub, height, id->profile};
    state_.reverse[record.author_pub] = id->name;
}

ForumState project_forum(std::span<const chaincore::Block> blocks, const PublicKey& chain_owner,
                         SignatureCache* cache) {
    ForumProjector projector(chain_owner, cache);
    for (const auto& block : blocks) projector.apply(block);
    return projector.state();
}

IdentityState project_identity(std::span<const chaincore::Block> blocks, SignatureCache* cache) {
    IdentityProjector projector(cache);
    for (const auto& block : blocks) projector.apply(block);
    return projector.state();
}

}  // namespace infnote::apps
