#pragma once

#include "infnote/chaincore/crypto.hpp"
#include "infnote/common/bytes.hpp"
#include "infnote/common/result.hpp"

#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>

namespace infnote::apps {

using chaincore::KeyPair;
using chaincore::PublicKey;
using chaincore::Signature;

inline constexpr std::size_t kMaxContentBytes = 64 * 1024;
inline constexpr std::size_t kMaxProfileBytes = 4 * 1024;
inline constexpr std::size_t kMaxNameChars = 32;

enum class RecordKind { post, delete_marker, identity };

std::string_view kind_name(RecordKind kind);

struct PostBody {
    Hash256 post_id{};
    std::string content;
    std::optional<Hash256> reply_to;
    std::uint64_t client_time = 0;

    bool operator==(const PostBody&) const = default;
};

struct DeleteBody {
    Hash256 target{};

    bool operator==(const DeleteBody&) const = default;
};

struct IdentityBody {
    std::string name;
    std::optional<std::string> profile;

    bool operator==(const IdentityBody&) const = default;
};

using RecordBody = std::variant<PostBody, DeleteBody, IdentityBody>;

/// One application record; author_sig covers the canonical (kind, body) text.
struct ChainRecord {
    PublicKey author_pub{};
    RecordBody body;
    Signature author_sig{};

    RecordKind kind() const { return static_cast<RecordKind>(body.index()); }
    const PostBody* post() const { return std::get_if<PostBody>(&body); }
    const DeleteBody* delete_marker() const { return std::get_if<DeleteBody>(&body); }
    const IdentityBody* identity() const { return std::get_if<IdentityBody>(&body); }

    bool operator==(const ChainRecord&) const = default;
};

/// SHA-256(author_pub || content || client_time as 8 bytes big-endian).
Hash256 compute_post_id(const PublicKey& author, std::string_view content, std::uint64_t client_time);

/// Canonical `{"body":{...},"kind":"..."}`, the text the author signs.
std::string signing_text(const ChainRecord& record);
Hash256 signing_digest(const ChainRecord& record);

/// Canonical full record JSON: sorted keys, no whitespace, lowercase hex.
std::string record_to_json(const ChainRecord& record);

/// Dedup key for gossip and pools: SHA-256 of the canonical record JSON.
Hash256 record_id(const ChainRecord& record);

Result<ChainRecord> make_post(const KeyPair& author, std::string content, std::optional<Hash256> reply_to,
                              std::uint64_t client_time);
Result<ChainRecord> make_delete_marker(const KeyPair& author, const Hash256& target);
Result<ChainRecord> make_identity(const KeyPair& author, std::string name,
                                  std::optional<std::string> profile = std::nullopt);

bool is_valid_name(std::string_view name);

/// Field-level rules: sizes, UTF-8, name charset, key shape.
Status check_schema(const ChainRecord& record);

/// Bounded set of (digest, key, signature) triples that already verified.
/// Safe to share between threads.
class SignatureCache {
public:
    explicit SignatureCache(std::size_t capacity = 1u << 20) : capacity_(capacity) {}

    bool contains(const Hash256& key) const;
    void insert(const Hash256& key);
    std::size_t size() const;

    static Hash256 key_for(const Hash256& digest, const PublicKey& pub, const Signature& sig);

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::unordered_set<Hash256, Hash256Hasher> entries_;
    std::deque<Hash256> order_;
};

/// Schema check, then signature check, then post_id consistency. A cache hit
/// skips the curve operation.
Status verify_record(const ChainRecord& record, SignatureCache* cache = nullptr);

}  // namespace infnote::apps
