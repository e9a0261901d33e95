#include "infnote/chaincore/crypto.hpp"

#include <openssl/rand.h>
#include <openssl/sha.h>
#include <secp256k1.h>

#include <algorithm>
#include <stdexcept>

namespace infnote::chaincore {

namespace {

// secp256k1 group order n, big-endian.
constexpr ByteArray<32> kOrder = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                  0xff, 0xff, 0xff, 0xff, 0xfe, 0xba, 0xae, 0xdc, 0xe6, 0xaf, 0x48,
                                  0xa0, 0x3b, 0xbf, 0xd2, 0x5e, 0x8c, 0xd0, 0x36, 0x41, 0x41};

const secp256k1_context* context() {
    static const secp256k1_context* ctx =
        secp256k1_context_create(SECP256K1_CONTEXT_SIGN | SECP256K1_CONTEXT_VERIFY);
    return ctx;
}

bool less_than(const std::uint8_t* a, const std::uint8_t* b) {
    return std::lexicographical_compare(a, a + 32, b, b + 32);
}

// out = a - b for 256-bit big-endian values with a >= b.
void subtract(std::uint8_t* out, const std::uint8_t* a, const std::uint8_t* b) {
    int borrow = 0;
    for (int i = 31; i >= 0; --i) {
        int d = int{a[i]} - int{b[i]} - borrow;
        borrow = d < 0 ? 1 : 0;
        out[i] = static_cast<std::uint8_t>(d + (borrow ? 256 : 0));
    }
}

PublicKey derive_public(const PrivateKey& key) {
    secp256k1_pubkey pub;
    if (!secp256k1_ec_pubkey_create(context(), &pub, key.data()))
        throw std::logic_error("secp256k1 rejected an in-range scalar");
    PublicKey out{};
    std::size_t len = out.size();
    secp256k1_ec_pubkey_serialize(context(), out.data(), &len, &pub, SECP256K1_EC_COMPRESSED);
    return out;
}

}  // namespace

struct Sha256::State {
    SHA256_CTX ctx;
};

Sha256::Sha256() : state_(new State) { SHA256_Init(&state_->ctx); }

Sha256::~Sha256() { delete state_; }

Sha256& Sha256::update(ByteView data) {
    SHA256_Update(&state_->ctx, data.data(), data.size());
    return *this;
}

Hash256 Sha256::finish() {
    Hash256 out{};
    SHA256_Final(out.data(), &state_->ctx);
    return out;
}

Hash256 sha256(ByteView data) {
    Hash256 out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Result<KeyPair> generate_keypair(std::optional<ByteArray<32>> seed) {
    PrivateKey scalar{};
    if (seed) {
        scalar = *seed;
        // seed < 2^256 < 2n, so one conditional subtraction reduces it.
        if (!less_than(scalar.data(), kOrder.data())) subtract(scalar.data(), scalar.data(), kOrder.data());
        if (is_zero(scalar)) return make_error(Errc::invalid_seed, "seed reduces to zero");
        return keypair_from_private(scalar);
    }
    for (;;) {
        if (RAND_bytes(scalar.data(), static_cast<int>(scalar.size())) != 1)
            throw std::runtime_error("system RNG failure");
        if (secp256k1_ec_seckey_verify(context(), scalar.data())) return keypair_from_private(scalar);
    }
}

Result<KeyPair> keypair_from_private(const PrivateKey& private_key) {
    if (!secp256k1_ec_seckey_verify(context(), private_key.data()))
        return make_error(Errc::invalid_key, "private scalar out of range");
    return KeyPair{private_key, derive_public(private_key)};
}

bool is_valid_public_key(const PublicKey& key) {
    if (key[0] != 0x02 && key[0] != 0x03) return false;
    secp256k1_pubkey pub;
    return secp256k1_ec_pubkey_parse(context(), &pub, key.data(), key.size()) == 1;
}

Signature sign_digest(const PrivateKey& key, const Hash256& digest) {
    secp256k1_ecdsa_signature sig;
    if (!secp256k1_ecdsa_sign(context(), &sig, digest.data(), key.data(), secp256k1_nonce_function_rfc6979,
                              nullptr))
        throw std::logic_error("signing with an invalid private key");
    // libsecp256k1 already emits low-s; normalizing keeps the guarantee explicit.
    secp256k1_ecdsa_signature_normalize(context(), &sig, &sig);
    Signature out{};
    secp256k1_ecdsa_signature_serialize_compact(context(), out.data(), &sig);
    return out;
}

bool verify_digest(const PublicKey& key, const Hash256& digest, const Signature& signature) {
    if (key[0] != 0x02 && key[0] != 0x03) return false;
    secp256k1_pubkey pub;
    if (!secp256k1_ec_pubkey_parse(context(), &pub, key.data(), key.size())) return false;
    secp256k1_ecdsa_signature sig;
    if (!secp256k1_ecdsa_signature_parse_compact(context(), &sig, signature.data())) return false;
    // Verification rejects high-s forms outright.
    return secp256k1_ecdsa_verify(context(), &sig, digest.data(), &pub) == 1;
}

Signature to_high_s(const Signature& signature) {
    Signature out = signature;
    subtract(out.data() + 32, kOrder.data(), signature.data() + 32);
    return out;
}

}  // namespace infnote::chaincore
