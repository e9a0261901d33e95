#include "test_support.hpp"

#include "infnote/chaincore/block.hpp"
#include "infnote/chaincore/golden.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace infnote;
using namespace infnote::chaincore;
using infnote::testing::build_chain;
using infnote::testing::chain_of;
using infnote::testing::key_for;

namespace {

ByteArray<32> filled(std::uint8_t v) {
    ByteArray<32> out{};
    out.fill(v);
    return out;
}

// Values below come from tests/oracle/secp256k1_oracle.py (pure Python curve
// arithmetic + hashlib) and were cross-checked against coincurve.
constexpr std::string_view kSeed01Pub = "031b84c5567b126440995d3ed5aaba0565d71e1834604819ff9c17f5e9d5dd078f";
constexpr std::string_view kSeed01ChainId = "f1d12012406b87afb27f6dd16ac0a76fcdaa55ed820926232b26f5132dc0cb41";
constexpr std::string_view kSeed01SigAbc =
    "976f83fcd26bdbd48ba5d20cecda33dd504aff31fb0a41451a071789c9fd3dad"
    "5b35dd979ef70d62ba560be55c35b5456df70f03c0017e765aa09a944b174b37";
constexpr std::string_view kHelloBlockHash = "bb6635c3cae9db968c3a2f2b504a583c1bf44b7defc48b8aa96916da8de5dc4a";
constexpr std::string_view kHelloBlockSig =
    "f78b157adef8d5d9eddcd445a4aef3ae4a51f7558195c4ed94c18396dd456830"
    "693c06ffd8da2702abbda68e5ac96ec904672a41204ba7d30cbb9a2fe39f39de";

Block sealed_child(const Block& prev, const KeyPair& owner, std::string_view text) {
    BlockDraft d{prev.chain_id, prev.height + 1, prev.time + 1, prev.hash, Bytes(text.begin(), text.end())};
    return seal_block(std::move(d), owner).value();
}

}  // namespace

TEST_CASE("generate_keypair with a fixed seed matches the reference curve") {
    auto key = generate_keypair(filled(0x01));
    REQUIRE(key.ok());
    CHECK(to_hex(key->private_key) == to_hex(filled(0x01)));
    CHECK(to_hex(key->public_key) == kSeed01Pub);
}

TEST_CASE("generate_keypair rejects seeds that reduce to zero") {
    auto zero = generate_keypair(filled(0x00));
    REQUIRE_FALSE(zero.ok());
    CHECK(zero.code() == Errc::invalid_seed);

    auto order = array_from_hex<32>("fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141");
    auto at_order = generate_keypair(*order);
    REQUIRE_FALSE(at_order.ok());
    CHECK(at_order.code() == Errc::invalid_seed);

    // n + 1 reduces to the scalar 1, whose public key is the generator.
    auto past_order = array_from_hex<32>("fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364142");
    auto one = generate_keypair(*past_order);
    REQUIRE(one.ok());
    CHECK(to_hex(one->public_key) == "0279be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798");
}

TEST_CASE("unseeded keypairs are fresh") {
    auto a = generate_keypair();
    auto b = generate_keypair();
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(a->private_key != b->private_key);
    CHECK(keypair_from_private(a->private_key)->public_key == a->public_key);
}

TEST_CASE("derive_chain_id") {
    PublicKey off_curve{};
    off_curve[0] = 0x02;
    auto bad = derive_chain_id(off_curve);
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.code() == Errc::invalid_key);

    auto key = generate_keypair(filled(0x01)).value();
    auto id = derive_chain_id(key.public_key);
    REQUIRE(id.ok());
    CHECK(id->hex() == kSeed01ChainId);
    CHECK(*derive_chain_id(key.public_key) == *id);
}

TEST_CASE("canonical_block_bytes layout") {
    auto empty = canonical_block_bytes(ChainId{}, 0, 0, Hash256{}, {});
    REQUIRE(empty.ok());
    REQUIRE(empty->size() == 85);
    CHECK((*empty)[0] == 0x01);
    CHECK(is_zero(ByteView{*empty}.subspan(1)));

    const std::string ab = "ab";
    auto two = canonical_block_bytes(ChainId{}, 0, 0, Hash256{}, as_bytes(ab));
    REQUIRE(two.ok());
    REQUIRE(two->size() == 87);
    CHECK((*two)[85] == 0x61);
    CHECK((*two)[86] == 0x62);
    CHECK(read_u32_be(two->data() + 81) == 2);

    Bytes exact(kMaxPayloadBytes);
    CHECK(canonical_block_bytes(ChainId{}, 0, 0, Hash256{}, exact).ok());
    Bytes over(kMaxPayloadBytes + 1);
    auto oversize = canonical_block_bytes(ChainId{}, 0, 0, Hash256{}, over);
    REQUIRE_FALSE(oversize.ok());
    CHECK(oversize.code() == Errc::payload_too_large);
}

TEST_CASE("canonical_block_bytes places integers big-endian") {
    ChainId id;
    id.bytes.fill(0xaa);
    Hash256 prev;
    prev.fill(0xbb);
    auto bytes = canonical_block_bytes(id, 0x0102030405060708ull, 0x1112131415161718ull, prev, {}).value();
    CHECK(bytes[1] == 0xaa);
    CHECK(bytes[32] == 0xaa);
    CHECK(bytes[33] == 0x01);
    CHECK(bytes[40] == 0x08);
    CHECK(bytes[41] == 0x11);
    CHECK(bytes[48] == 0x18);
    CHECK(bytes[49] == 0xbb);
    CHECK(bytes[80] == 0xbb);
}

TEST_CASE("signing matches the reference RFC 6979 implementation") {
    auto key = generate_keypair(filled(0x01)).value();
    const std::string abc = "abc";
    auto sig = sign_digest(key.private_key, sha256(as_bytes(abc)));
    CHECK(to_hex(sig) == kSeed01SigAbc);

    const std::string hello = "hello";
    BlockDraft draft{chain_of(key), 0, 1'700'000'000, Hash256{}, Bytes(hello.begin(), hello.end())};
    auto block = seal_block(draft, key).value();
    CHECK(to_hex(block.hash) == kHelloBlockHash);
    CHECK(to_hex(block.signature) == kHelloBlockSig);
}

TEST_CASE("seal_block") {
    auto owner = key_for("owner");
    auto other = key_for("other");

    SUBCASE("genesis verifies under its owner") {
        auto genesis = make_genesis(owner, "main", 100).value();
        CHECK(genesis.height == 0);
        CHECK(is_zero(genesis.prev_hash));
        CHECK(verify_block(genesis, owner.public_key).ok());
        CHECK(verify_genesis(genesis, owner.public_key).ok());
        auto info = parse_genesis_payload(genesis.payload);
        REQUIRE(info);
        CHECK(info->owner_pub == owner.public_key);
        CHECK(info->label == "main");
    }

    SUBCASE("draft for another owner's chain") {
        BlockDraft draft{chain_of(other), 0, 1, Hash256{}, {}};
        auto sealed = seal_block(draft, owner);
        REQUIRE_FALSE(sealed.ok());
        CHECK(sealed.code() == Errc::wrong_owner);
    }

    SUBCASE("deterministic nonces make sealing reproducible") {
        BlockDraft draft{chain_of(owner), 3, 42, sha256(as_bytes("prev")), Bytes{1, 2, 3}};
        auto a = seal_block(draft, owner).value();
        auto b = seal_block(draft, owner).value();
        CHECK(serialize_block(a) == serialize_block(b));
    }
}

TEST_CASE("verify_block reports the first failing check") {
    auto owner = key_for("owner");
    auto genesis = make_genesis(owner, "main", 100).value();
    CHECK(verify_block(genesis, owner.public_key).ok());

    auto flipped = genesis;
    flipped.payload[3] ^= 0x01;
    CHECK(verify_block(flipped, owner.public_key).code() == Errc::bad_hash);

    CHECK(verify_block(genesis, key_for("other").public_key).code() == Errc::bad_chain_id);

    auto bad_sig = genesis;
    bad_sig.signature[10] ^= 0x40;
    CHECK(verify_block(bad_sig, owner.public_key).code() == Errc::bad_signature);
}

TEST_CASE("high-s signatures are rejected") {
    auto owner = key_for("owner");
    auto genesis = make_genesis(owner, "main", 100).value();
    auto malleated = genesis;
    malleated.signature = to_high_s(genesis.signature);
    CHECK(malleated.signature != genesis.signature);
    CHECK(verify_block(malleated, owner.public_key).code() == Errc::bad_signature);
    CHECK(to_high_s(malleated.signature) == genesis.signature);
}

TEST_CASE("validate_successor") {
    auto owner = key_for("owner");
    auto chain = build_chain(owner, 2);
    const auto& prev = chain[0];
    CHECK(validate_successor(prev, chain[1]).ok());

    auto same_time = chain[1];
    same_time.time = prev.time;
    CHECK(validate_successor(prev, same_time).code() == Errc::bad_time);

    auto skip = chain[1];
    skip.height = prev.height + 2;
    CHECK(validate_successor(prev, skip).code() == Errc::bad_height);

    auto unlinked = chain[1];
    unlinked.prev_hash[0] ^= 1;
    CHECK(validate_successor(prev, unlinked).code() == Errc::bad_prev_hash);

    auto foreign = chain[1];
    foreign.chain_id = chain_of(key_for("other"));
    CHECK(validate_successor(prev, foreign).code() == Errc::bad_chain);
}

TEST_CASE("detect_equivocation") {
    auto owner = key_for("owner");
    auto chain = build_chain(owner, 5);
    auto a = sealed_child(chain.back(), owner, "version a");
    auto b = sealed_child(chain.back(), owner, "version b");
    REQUIRE(a.height == 5);

    auto evidence = detect_equivocation(a, b, owner.public_key);
    REQUIRE(evidence);
    CHECK(evidence->block_a.hash != evidence->block_b.hash);
    CHECK(check_evidence(*evidence, owner.public_key).ok());

    CHECK_FALSE(detect_equivocation(a, a, owner.public_key));

    auto forged = b;
    forged.signature[5] ^= 0xff;
    CHECK_FALSE(detect_equivocation(a, forged, owner.public_key));
    CHECK(check_evidence({a, forged}, owner.public_key).code() == Errc::invalid_evidence);
}

TEST_CASE("serialization round-trips and rejects malformed input") {
    auto owner = key_for("owner");
    auto chain = build_chain(owner, 3);
    for (const auto& block : chain) {
        auto back = deserialize_block(serialize_block(block));
        REQUIRE(back.ok());
        CHECK(*back == block);
    }
    auto bytes = serialize_block(chain[1]);
    CHECK(deserialize_block(ByteView{bytes}.first(100)).code() == Errc::malformed_block);
    bytes[0] = 0x02;
    CHECK(deserialize_block(bytes).code() == Errc::malformed_block);
    CHECK(block_from_hex("zz").code() == Errc::malformed_block);
}

TEST_CASE("property: seal then verify round-trips for random drafts") {
    std::mt19937_64 rng(7);
    auto owner = key_for("prop-owner");
    for (int i = 0; i < 200; ++i) {
        BlockDraft d;
        d.chain_id = chain_of(owner);
        d.height = rng();
        d.time = rng();
        for (auto& b : d.prev_hash) b = static_cast<std::uint8_t>(rng());
        d.payload = infnote::testing::random_bytes(rng, rng() % 512);
        auto block = seal_block(d, owner).value();
        CHECK(verify_block(block, owner.public_key).ok());
        CHECK(*deserialize_block(serialize_block(block)) == block);
    }
}

TEST_CASE("property: distinct (height, time, payload) triples give distinct bytes and hashes") {
    std::mt19937_64 rng(11);
    const ChainId id = chain_of(key_for("inj"));
    std::set<Bytes> seen_bytes;
    std::set<Hash256> seen_hashes;
    std::set<std::tuple<std::uint64_t, std::uint64_t, Bytes>> triples;
    for (int i = 0; i < 2000; ++i) {
        // Small ranges force many near-collisions between triples.
        std::uint64_t h = rng() % 4;
        std::uint64_t t = rng() % 4;
        Bytes payload = infnote::testing::random_bytes(rng, rng() % 3);
        if (!triples.emplace(h, t, payload).second) continue;
        auto bytes = canonical_block_bytes(id, h, t, Hash256{}, payload).value();
        CHECK(seen_bytes.insert(bytes).second);
        CHECK(seen_hashes.insert(sha256(bytes)).second);
    }
    CHECK(triples.size() > 50);
}

TEST_CASE("property: any single-field mutation of a sealed block is rejected") {
    std::mt19937_64 rng(13);
    auto owner = key_for("tamper");
    auto chain = build_chain(owner, 3);
    const Block& prev = chain[1];
    const Block& sealed = chain[2];
    REQUIRE(validate_successor(prev, sealed).ok());

    auto rejected = [&](const Block& b) {
        return !verify_block(b, owner.public_key).ok() || !validate_successor(prev, b).ok();
    };
    for (int trial = 0; trial < 50; ++trial) {
        auto m = sealed;
        m.chain_id.bytes[rng() % 32] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        CHECK(rejected(m));
        m = sealed;
        m.height += 1 + rng() % 1000;
        CHECK(rejected(m));
        m = sealed;
        m.time ^= 1 + rng() % 0xffff;
        CHECK(rejected(m));
        m = sealed;
        m.prev_hash[rng() % 32] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        CHECK(rejected(m));
        m = sealed;
        m.hash[rng() % 32] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        CHECK(rejected(m));
        m = sealed;
        m.signature[rng() % 64] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        CHECK(rejected(m));
        m = sealed;
        m.payload[rng() % m.payload.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        CHECK(rejected(m));
    }
}

TEST_CASE("golden block files round-trip") {
    infnote::testing::TempDir dir;
    auto chain = build_chain(key_for("golden"), 4);
    auto path = dir.path() / "chain.hex";
    REQUIRE(write_golden_blocks(path, chain).ok());
    auto back = read_golden_blocks(path);
    REQUIRE(back.ok());
    CHECK(*back == chain);
    CHECK(read_golden_blocks(dir.path() / "missing").code() == Errc::io_error);
}
