#include "infnote/apps/record.hpp"

#include "infnote/common/json_text.hpp"

namespace infnote::apps {

using chaincore::sha256;

std::string_view kind_name(RecordKind kind) {
    switch (kind) {
        case RecordKind::post: return "post";
        case RecordKind::delete_marker: return "delete_marker";
        case RecordKind::identity: return "identity";
    }
    return "unknown";
}

Hash256 compute_post_id(const PublicKey& author, std::string_view content, std::uint64_t client_time) {
    Bytes time_be;
    put_u64_be(time_be, client_time);
    chaincore::Sha256 h;
    h.update(author).update(as_bytes(content)).update(time_be);
    return h.finish();
}

namespace {

void append_hex_field(std::string& out, std::string_view key, ByteView value) {
    out.push_back('"');
    out += key;
    out += "\":\"";
    out += to_hex(value);
    out.push_back('"');
}

// Keys in lexicographic order; optional fields are omitted when absent.
void append_body(std::string& out, const RecordBody& body) {
    out.push_back('{');
    if (const auto* post = std::get_if<PostBody>(&body)) {
        out += "\"client_time\":";
        out += std::to_string(post->client_time);
        out += ",\"content\":";
        append_json_string(out, post->content);
        out.push_back(',');
        append_hex_field(out, "post_id", post->post_id);
        if (post->reply_to) {
            out.push_back(',');
            append_hex_field(out, "reply_to", *post->reply_to);
        }
    } else if (const auto* del = std::get_if<DeleteBody>(&body)) {
        append_hex_field(out, "target", del->target);
    } else {
        const auto& id = std::get<IdentityBody>(body);
        out += "\"name\":";
        append_json_string(out, id.name);
        if (id.profile) {
            out += ",\"profile\":";
            append_json_string(out, *id.profile);
        }
    }
    out.push_back('}');
}

void append_kind(std::string& out, RecordKind kind) {
    out += "\"kind\":\"";
    out += kind_name(kind);
    out.push_back('"');
}

Result<ChainRecord> sign_record(const KeyPair& author, RecordBody body) {
    ChainRecord record;
    record.author_pub = author.public_key;
    record.body = std::move(body);
    if (auto st = check_schema(record); !st) return st.error();
    record.author_sig = chaincore::sign_digest(author.private_key, signing_digest(record));
    return record;
}

}  // namespace

std::string signing_text(const ChainRecord& record) {
    std::string out;
    out.reserve(128 + (record.post() ? record.post()->content.size() : 0));
    out += "{\"body\":";
    append_body(out, record.body);
    out.push_back(',');
    append_kind(out, record.kind());
    out.push_back('}');
    return out;
}

Hash256 signing_digest(const ChainRecord& record) { return sha256(as_bytes(signing_text(record))); }

std::string record_to_json(const ChainRecord& record) {
    std::string out;
    out.reserve(320 + (record.post() ? record.post()->content.size() : 0));
    out.push_back('{');
    append_hex_field(out, "author_pub", record.author_pub);
    out.push_back(',');
    append_hex_field(out, "author_sig", record.author_sig);
    out += ",\"body\":";
    append_body(out, record.body);
    out.push_back(',');
    append_kind(out, record.kind());
    out.push_back('}');
    return out;
}

Hash256 record_id(const ChainRecord& record) { return sha256(as_bytes(record_to_json(record))); }

Result<ChainRecord> make_post(const KeyPair& author, std::string content, std::optional<Hash256> reply_to,
                              std::uint64_t client_time) {
    if (content.size() > kMaxContentBytes)
        return make_error(Errc::oversize_content, std::to_string(content.size()) + " bytes of content");
    PostBody body;
    body.post_id = compute_post_id(author.public_key, content, client_time);
    body.content = std::move(content);
    body.reply_to = reply_to;
    body.client_time = client_time;
    return sign_record(author, std::move(body));
}

Result<ChainRecord> make_delete_marker(const KeyPair& author, const Hash256& target) {
    return sign_record(author, DeleteBody{target});
}

Result<ChainRecord> make_identity(const KeyPair& author, std::string name, std::optional<std::string> profile) {
    return sign_record(author, IdentityBody{std::move(name), std::move(profile)});
}

bool is_valid_name(std::string_view name) {
    if (name.empty() || name.size() > kMaxNameChars) return false;
    for (char c : name)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    return true;
}

Status check_schema(const ChainRecord& record) {
    if (record.author_pub[0] != 0x02 && record.author_pub[0] != 0x03)
        return make_error(Errc::bad_schema, "author_pub is not a compressed key");
    if (const auto* post = record.post()) {
        if (post->content.size() > kMaxContentBytes) return make_error(Errc::bad_schema, "content over 64 KiB");
        if (!is_valid_utf8(post->content)) return make_error(Errc::bad_schema, "content is not UTF-8");
    } else if (const auto* id = record.identity()) {
        if (!is_valid_name(id->name)) return make_error(Errc::bad_schema, "name must be 1-32 chars of [a-z0-9_]");
        if (id->profile) {
            if (id->profile->size() > kMaxProfileBytes) return make_error(Errc::bad_schema, "profile over 4 KiB");
            if (!is_valid_utf8(*id->profile)) return make_error(Errc::bad_schema, "profile is not UTF-8");
        }
    }
    return {};
}

bool SignatureCache::contains(const Hash256& key) const {
    std::lock_guard lock(mutex_);
    return entries_.count(key) != 0;
}

void SignatureCache::insert(const Hash256& key) {
    std::lock_guard lock(mutex_);
    if (!entries_.insert(key).second) return;
    order_.push_back(key);
    while (order_.size() > capacity_) {
        entries_.erase(order_.front());
        order_.pop_front();
    }
}

std::size_t SignatureCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

Hash256 SignatureCache::key_for(const Hash256& digest, const PublicKey& pub, const Signature& sig) {
    chaincore::Sha256 h;
    h.update(digest).update(pub).update(sig);
    return h.finish();
}

namespace {

// A correctly signed post can still carry an id that does not match its
// contents; that is a schema fault rather than a signature fault.
Status check_post_id(const ChainRecord& record) {
    const auto* post = record.post();
    if (post && post->post_id != compute_post_id(record.author_pub, post->content, post->client_time))
        return make_error(Errc::bad_schema, "post_id does not match author, content and time");
    return {};
}

}  // namespace

Status verify_record(const ChainRecord& record, SignatureCache* cache) {
    if (auto st = check_schema(record); !st) return st;
    const Hash256 digest = signing_digest(record);
    Hash256 key{};
    if (cache) {
        key = SignatureCache::key_for(digest, record.author_pub, record.author_sig);
        if (cache->contains(key)) return check_post_id(record);
    }
    if (!chaincore::verify_digest(record.author_pub, digest, record.author_sig))
        return make_error(Errc::bad_signature, "author signature does not verify");
    if (cache) cache->insert(key);
    return check_post_id(record);
}

}  // namespace infnote::apps
