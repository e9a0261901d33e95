#include "doctest.h"
#include "test_support.hpp"

#include "infnote/wire/message.hpp"

#include <random>

using namespace infnote;
using namespace infnote::wire;
using infnote::testing::build_chain;
using infnote::testing::key_for;

namespace {

ChainId some_chain(std::mt19937_64& rng) {
    ChainId id;
    for (auto& b : id.bytes) b = static_cast<std::uint8_t>(rng());
    return id;
}

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"a", "Z", " ", "\"", "\\", "\n", "\t", "é", "中", "😀", "\x01", "/"};
    std::string out;
    for (std::size_t n = rng() % 12; n > 0; --n) out += pieces[rng() % pieces.size()];
    return out;
}

Message random_message(std::mt19937_64& rng, const std::vector<Block>& chain) {
    switch (rng() % 9) {
        case 0:
        case 1: {
            Hello h;
            h.node_kind = rng() % 2 ? NodeKind::full : NodeKind::light;
            for (std::size_t n = rng() % 4; n > 0; --n) h.chain_heads.push_back({some_chain(rng), rng() % 1000000});
            if (rng() % 2) h.listen_port = static_cast<std::uint16_t>(1 + rng() % 65535);
            if (rng() % 2) return h;
            HelloAck ack;
            static_cast<Hello&>(ack) = h;
            return ack;
        }
        case 2: return GetPeers{};
        case 3: {
            Peers p;
            for (std::size_t n = rng() % 5; n > 0; --n)
                p.addresses.push_back({"10.0.0." + std::to_string(rng() % 256),
                                       static_cast<std::uint16_t>(1 + rng() % 65535), rng() % 2000000000, 0});
            return p;
        }
        case 4: return GetBlocks{some_chain(rng), rng() % 100, rng() % 1000};
        case 5: {
            const std::size_t from = rng() % chain.size();
            const std::size_t count = rng() % (chain.size() - from + 1);
            return Blocks{chain[0].chain_id, {chain.begin() + from, chain.begin() + from + count}};
        }
        case 6: return NewBlock{chain[rng() % chain.size()]};
        case 7: {
            SubmitRecords s{some_chain(rng), {}};
            for (std::size_t n = rng() % 3; n > 0; --n) s.records.push_back({{"kind", "post"}, {"x", random_text(rng)}});
            return s;
        }
        default: return ErrorMessage{"bad-signature", random_text(rng)};
    }
}

}  // namespace

TEST_CASE("envelope shape") {
    CHECK(encode_message(GetPeers{}) == R"({"v":1,"type":"get_peers","body":{}})");
    CHECK(encode_message(GetBlocks{ChainId{}, 8, 71}) ==
          R"({"v":1,"type":"get_blocks","body":{"chain_id":")" + std::string(64, '0') + R"(","from":8,"to":71}})");
    Hello h;
    h.chain_heads.push_back({ChainId{}, 10});
    CHECK(encode_message(h) == R"({"v":1,"type":"hello","body":{"chain_heads":[{"chain_id":")" +
                                   std::string(64, '0') + R"(","height":10}],"node_kind":"full","protocol_version":1}})");
    CHECK(message_type(HelloAck{}) == "hello_ack");
    CHECK(kSubprotocol == "infnote/1");
}

TEST_CASE("decode rejects bad envelopes with structured errors") {
    CHECK(decode_message(R"({"v":2,"type":"get_peers","body":{}})").code() == Errc::bad_version);
    CHECK(decode_message(R"({"v":"1","type":"get_peers","body":{}})").code() == Errc::bad_version);
    CHECK(decode_message(R"({"v":1,"type":"gossip","body":{}})").code() == Errc::unknown_type);
    CHECK(decode_message(R"({"v":1,"type":"get_peers"})").code() == Errc::bad_json);
    CHECK(decode_message(R"({"v":1,"type":"get_peers","body":{})").code() == Errc::bad_json);
    CHECK(decode_message("[]").code() == Errc::bad_json);
    CHECK(decode_message("").code() == Errc::bad_json);
    CHECK(decode_message(R"({"v":1,"type":"get_blocks","body":{"chain_id":"00","from":1,"to":2}})").code() ==
          Errc::bad_json);
    CHECK(decode_message(R"({"v":1,"type":"get_blocks","body":{"chain_id":")" + std::string(64, 'a') +
                         R"(","from":-1,"to":2}})")
              .code() == Errc::bad_json);
    CHECK(decode_message(R"({"v":1,"type":"peers","body":{"addresses":[{"host":"h","port":0}]}})").code() ==
          Errc::bad_json);
    CHECK(decode_message(R"({"v":1,"type":"new_block","body":{"chain_id":")" + std::string(64, 'a') +
                         R"(","block":"abcd"}})")
              .code() == Errc::malformed_block);
}

TEST_CASE("unknown fields are ignored") {
    auto m = decode_message(R"({"v":1,"type":"get_peers","body":{"future":true},"extra":[1,2]})");
    REQUIRE(m);
    CHECK(std::holds_alternative<GetPeers>(*m));
    auto h = decode_message(
        R"({"v":1,"type":"hello","body":{"protocol_version":1,"node_kind":"light","chain_heads":[],"caps":["x"]}})");
    REQUIRE(h);
    CHECK(std::get<Hello>(*h).node_kind == NodeKind::light);
}

TEST_CASE("property: decode(encode(m)) == m") {
    std::mt19937_64 rng(99);
    auto chain = build_chain(key_for("wire"), 8);
    for (int i = 0; i < 2000; ++i) {
        const Message m = random_message(rng, chain);
        auto back = decode_message(encode_message(m));
        REQUIRE(back);
        REQUIRE(*back == m);
    }
}

TEST_CASE("blocks messages must be consecutive and from one chain") {
    auto chain = build_chain(key_for("wire"), 4);
    auto text = encode_message(Blocks{chain[0].chain_id, {chain[0], chain[2]}});
    CHECK(decode_message(text).code() == Errc::malformed_block);
    auto other = build_chain(key_for("other"), 1);
    CHECK(decode_message(encode_message(Blocks{chain[0].chain_id, {other[0]}})).code() == Errc::malformed_block);
}

TEST_CASE("fuzz: decode never crashes on arbitrary or mutated frames") {
    std::mt19937_64 rng(5);
    auto chain = build_chain(key_for("fuzz"), 3);
    std::size_t decoded = 0;
    for (int i = 0; i < 20000; ++i) {
        std::string frame;
        if (i % 2 == 0) {
            frame = encode_message(random_message(rng, chain));
            for (std::size_t n = 1 + rng() % 4; n > 0 && !frame.empty(); --n) {
                const std::size_t at = rng() % frame.size();
                switch (rng() % 3) {
                    case 0: frame[at] = static_cast<char>(rng()); break;
                    case 1: frame.erase(at, 1 + rng() % 8); break;
                    default: frame.insert(at, 1, "{}[]\",:0"[rng() % 8]);
                }
            }
        } else {
            frame.resize(rng() % 64);
            for (auto& c : frame) c = static_cast<char>(rng());
        }
        auto m = decode_message(frame);
        if (m) {
            ++decoded;
            CHECK(decode_message(encode_message(*m)));
        } else {
            const auto c = m.code();
            CHECK((c == Errc::bad_json || c == Errc::bad_version || c == Errc::unknown_type ||
                   c == Errc::malformed_block));
        }
    }
    CHECK(decoded > 0);
}

TEST_CASE("chunking respects the 64-block cap and the frame budget") {
    auto owner = key_for("chunk");
    auto chain = build_chain(owner, 150);
    auto chunks = chunk_blocks(chain[0].chain_id, chain);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].blocks.size() == 64);
    CHECK(chunks[1].blocks.size() == 64);
    CHECK(chunks[2].blocks.size() == 22);
    CHECK(chunks[1].blocks.front().height == 64);

    // Full-size blocks: every frame stays under the limit.
    std::vector<Block> big;
    Bytes payload(chaincore::kMaxPayloadBytes, 'x');
    big.push_back(chain[0]);
    for (std::uint64_t h = 1; h <= 20; ++h) {
        const auto& prev = big.back();
        big.push_back(chaincore::seal_block({prev.chain_id, h, prev.time + 1, prev.hash, payload}, owner).value());
    }
    auto frames = chunk_blocks(chain[0].chain_id, big);
    std::size_t total = 0;
    for (const auto& f : frames) {
        const auto text = encode_message(f);
        CHECK(text.size() <= kMaxFrameBytes);
        CHECK(f.blocks.size() <= kMaxBlocksPerMessage);
        auto back = decode_message(text);
        REQUIRE(back);
        total += std::get<Blocks>(*back).blocks.size();
    }
    CHECK(total == big.size());
    CHECK(frames.size() == 3);
}

TEST_CASE("handshake computes sync candidates") {
    ChainId x;
    x.bytes[0] = 1;
    HandshakeState a{{}, {x}};
    HandshakeState b{{}, {x}};
    a.hello.chain_heads = {{x, 10}};
    b.hello.chain_heads = {{x, 7}};
    auto views = handshake(a, b).value();
    CHECK(views.first.candidates.empty());
    REQUIRE(views.second.candidates.size() == 1);
    CHECK(views.second.candidates[0] == SyncCandidate{x, 8, 10});

    // Light node with nothing stored: every followed chain the peer has is a candidate.
    ChainId y;
    y.bytes[0] = 2;
    HandshakeState light{{}, {x, y}};
    light.hello.node_kind = NodeKind::light;
    HandshakeState full{{}, {x, y}};
    full.hello.chain_heads = {{x, 3}, {y, 0}};
    full.hello.listen_port = 7000;
    auto lv = handshake(light, full).value();
    CHECK(lv.first.peer_kind == NodeKind::full);
    CHECK(lv.first.peer_listen_port == 7000);
    REQUIRE(lv.first.candidates.size() == 2);
    CHECK(lv.first.candidates[0].from == 0);
    CHECK(lv.second.peer_kind == NodeKind::light);
    CHECK(lv.second.candidates.empty());

    // Chains we do not follow are not candidates.
    HandshakeState narrow{{}, {}};
    CHECK(handshake(narrow, full).value().first.candidates.empty());

    HandshakeState future{{}, {}};
    future.hello.protocol_version = 2;
    CHECK(handshake(future, full).code() == Errc::version_mismatch);
    CHECK(handshake(full, future).code() == Errc::version_mismatch);
}

TEST_CASE("error messages carry kebab-case codes") {
    auto e = error_message(make_error(Errc::not_served, "light node"));
    CHECK(e.code == "not-served");
    CHECK(encode_message(e) == R"({"v":1,"type":"error","body":{"code":"not-served","detail":"light node"}})");
}
