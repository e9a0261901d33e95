#pragma once

#include "infnote/common/bytes.hpp"
#include "infnote/common/result.hpp"

#include <optional>

namespace infnote::chaincore {

using PrivateKey = ByteArray<32>;
/// SEC1 compressed point.
using PublicKey = ByteArray<33>;
/// Compact ECDSA signature r || s, low-s form.
using Signature = ByteArray<64>;

struct KeyPair {
    PrivateKey private_key{};
    PublicKey public_key{};
};

Hash256 sha256(ByteView data);

/// Incremental SHA-256 for preimages assembled from several pieces.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(ByteView data);
    Hash256 finish();

private:
    struct State;
    State* state_;
};

/// With a seed the scalar is seed mod n and the result is deterministic; without
/// one the scalar comes from the OS CSPRNG.
Result<KeyPair> generate_keypair(std::optional<ByteArray<32>> seed = std::nullopt);

/// Rejects scalars outside [1, n-1] with invalid-key.
Result<KeyPair> keypair_from_private(const PrivateKey& private_key);

bool is_valid_public_key(const PublicKey& key);

/// RFC 6979 deterministic nonce; the result is always low-s.
Signature sign_digest(const PrivateKey& key, const Hash256& digest);

/// Fails for malformed keys, r or s out of range, and high-s signatures.
bool verify_digest(const PublicKey& key, const Hash256& digest, const Signature& signature);

/// Flips s to n - s. Only used to exercise malleability rejection.
Signature to_high_s(const Signature& signature);

}  // namespace infnote::chaincore
