#include "test_support.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/apps/projection.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace infnote;
using namespace infnote::apps;
using infnote::testing::chain_of;
using infnote::testing::key_for;

namespace {

chaincore::Block seal_records(const chaincore::KeyPair& owner, const chaincore::Block& prev,
                              std::span<const ChainRecord> records) {
    chaincore::BlockDraft draft{prev.chain_id, prev.height + 1, prev.time + 1, prev.hash,
                                encode_payload(records).value()};
    return chaincore::seal_block(std::move(draft), owner).value();
}

chaincore::Block seal_raw(const chaincore::KeyPair& owner, const chaincore::Block& prev, Bytes payload) {
    chaincore::BlockDraft draft{prev.chain_id, prev.height + 1, prev.time + 1, prev.hash, std::move(payload)};
    return chaincore::seal_block(std::move(draft), owner).value();
}

ChainRecord random_record(std::mt19937_64& rng, const std::vector<chaincore::KeyPair>& keys) {
    const auto& key = keys[rng() % keys.size()];
    switch (rng() % 3) {
        case 0: {
            std::string content;
            const std::size_t len = rng() % 40;
            for (std::size_t i = 0; i < len; ++i) content.push_back(static_cast<char>(0x20 + rng() % 0x5f));
            if (rng() % 4 == 0) content += "\n\"quoted\" \\ \xc3\xa9\xe6\xbc\xa2";
            std::optional<Hash256> reply;
            if (rng() % 2) reply = chaincore::sha256(as_bytes(std::to_string(rng())));
            return make_post(key, content, reply, rng() % 2'000'000'000).value();
        }
        case 1:
            return make_delete_marker(key, chaincore::sha256(as_bytes(std::to_string(rng())))).value();
        default: {
            std::string name = "user_" + std::to_string(rng() % 1000);
            std::optional<std::string> profile;
            if (rng() % 2) profile = "bio " + std::to_string(rng());
            return make_identity(key, name, profile).value();
        }
    }
}

}  // namespace

TEST_CASE("encode_payload of no records is the literal []") {
    auto payload = encode_payload({});
    REQUIRE(payload.ok());
    CHECK(as_chars(*payload) == "[]");
    CHECK(decode_payload(*payload)->empty());
}

TEST_CASE("record JSON is canonical") {
    auto key = key_for("alice");
    auto post = make_post(key, "hi \"you\"", std::nullopt, 7).value();
    const std::string text = record_to_json(post);
    const std::string expected = R"({"author_pub":")" + to_hex(key.public_key) + R"(","author_sig":")" +
                                 to_hex(post.author_sig) + R"(","body":{"client_time":7,"content":"hi \"you\"",)" +
                                 R"("post_id":")" + to_hex(post.post()->post_id) + R"("},"kind":"post"})";
    CHECK(text == expected);
    // nlohmann's compact dump of the parsed value sorts keys the same way.
    CHECK(nlohmann::json::parse(text).dump() == text);
    CHECK(signing_text(post) == R"({"body":{"client_time":7,"content":"hi \"you\"","post_id":")" +
                                    to_hex(post.post()->post_id) + R"("},"kind":"post"})");
}

TEST_CASE("property: decode(encode(records)) is the identity") {
    std::mt19937_64 rng(21);
    std::vector<chaincore::KeyPair> keys = {key_for("a"), key_for("b"), key_for("c")};
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<ChainRecord> records;
        const std::size_t n = rng() % 12;
        for (std::size_t i = 0; i < n; ++i) records.push_back(random_record(rng, keys));
        auto payload = encode_payload(records);
        REQUIRE(payload.ok());
        auto back = decode_payload(*payload);
        REQUIRE(back.ok());
        CHECK(*back == records);
        CHECK(encode_payload(*back).value() == *payload);
        for (const auto& r : *back) CHECK(verify_record(r).ok());
    }
}

TEST_CASE("4194 posts cannot fit in one payload") {
    auto key = key_for("bulk");
    // Even the smallest signed post exceeds 250 encoded bytes, so 4194 of them
    // overflow 1 MiB just as 4194 records of 250 bytes plus separators would.
    auto post = make_post(key, "", std::nullopt, 0).value();
    CHECK(record_to_json(post).size() > 250);
    std::vector<ChainRecord> records(4194, post);
    auto payload = encode_payload(records);
    REQUIRE_FALSE(payload.ok());
    CHECK(payload.code() == Errc::payload_too_large);

    std::vector<std::size_t> sizes(4194, 250);
    CHECK(payload_size_for(sizes) > chaincore::kMaxPayloadBytes);
    // 251 bytes per record with its comma, plus 1 for the brackets: 4177 fit.
    sizes.resize(4178);
    CHECK(payload_size_for(sizes) > chaincore::kMaxPayloadBytes);
    sizes.resize(4177);
    CHECK(payload_size_for(sizes) <= chaincore::kMaxPayloadBytes);
}

TEST_CASE("decode_payload rejects malformed input") {
    CHECK(decode_payload(as_bytes("not json")).code() == Errc::decode_error);
    CHECK(decode_payload(as_bytes("{}")).code() == Errc::decode_error);
    CHECK(decode_payload(as_bytes(R"([{"kind":"poll"}])")).code() == Errc::decode_error);

    auto post = make_post(key_for("a"), "x", std::nullopt, 1).value();
    std::string text = "[" + record_to_json(post) + "]";
    auto bad_hex = text;
    bad_hex.replace(bad_hex.find("author_pub\":\"") + 13, 2, "zz");
    CHECK(decode_payload(as_bytes(bad_hex)).code() == Errc::decode_error);
    auto unknown_kind = text;
    unknown_kind.replace(unknown_kind.find("\"post\"}"), 6, "\"poll\"");
    CHECK(decode_payload(as_bytes(unknown_kind)).code() == Errc::decode_error);
}

TEST_CASE("make_post") {
    auto key = key_for("alice");
    auto hello = make_post(key, "hello", std::nullopt, 1000);
    REQUIRE(hello.ok());
    CHECK(verify_record(*hello).ok());

    auto again = make_post(key, "hello", std::nullopt, 1000).value();
    CHECK(again.post()->post_id == hello->post()->post_id);

    CHECK(make_post(key, std::string(kMaxContentBytes, 'x'), std::nullopt, 1).ok());
    auto oversize = make_post(key, std::string(kMaxContentBytes + 1, 'x'), std::nullopt, 1);
    REQUIRE_FALSE(oversize.ok());
    CHECK(oversize.code() == Errc::oversize_content);
}

TEST_CASE("verify_record") {
    auto key = key_for("alice");
    auto post = make_post(key, "hello", std::nullopt, 1000).value();
    CHECK(verify_record(post).ok());

    auto tampered = post;
    std::get<PostBody>(tampered.body).content[0] ^= 0x01;
    CHECK(verify_record(tampered).code() == Errc::bad_signature);

    ChainRecord upper{key.public_key, IdentityBody{"UPPER", std::nullopt}, {}};
    CHECK(verify_record(upper).code() == Errc::bad_schema);
    CHECK(make_identity(key, "UPPER").code() == Errc::bad_schema);
    CHECK(make_identity(key, std::string(33, 'a')).code() == Errc::bad_schema);
    CHECK(make_identity(key, "").code() == Errc::bad_schema);
    CHECK(make_identity(key, "ok_name_42").ok());
    CHECK(make_post(key, "\xff\xfe", std::nullopt, 1).code() == Errc::bad_schema);
}

TEST_CASE("signature cache serves repeat verifications") {
    auto key = key_for("alice");
    auto post = make_post(key, "cached", std::nullopt, 5).value();
    SignatureCache cache(2);
    CHECK(verify_record(post, &cache).ok());
    CHECK(cache.size() == 1);
    CHECK(verify_record(post, &cache).ok());

    auto forged = post;
    forged.author_sig[3] ^= 1;
    CHECK(verify_record(forged, &cache).code() == Errc::bad_signature);
    CHECK(cache.size() == 1);

    CHECK(verify_record(make_post(key, "b", std::nullopt, 1).value(), &cache).ok());
    CHECK(verify_record(make_post(key, "c", std::nullopt, 1).value(), &cache).ok());
    CHECK(cache.size() == 2);
}

TEST_CASE("project_forum soft deletes") {
    auto owner = key_for("owner");
    auto alice = key_for("alice");
    auto mallory = key_for("mallory");
    auto genesis = chaincore::make_genesis(owner, "forum", 10).value();

    auto post = make_post(alice, "first!", std::nullopt, 11).value();
    const auto id = post.post()->post_id;
    auto b1 = seal_records(owner, genesis, std::vector{post});

    SUBCASE("owner delete at a later height hides the post") {
        auto b2 = seal_records(owner, b1, std::vector{make_delete_marker(owner, id).value()});
        auto state = project_forum(std::vector{genesis, b1, b2}, owner.public_key);
        REQUIRE(state.posts.count(id));
        CHECK_FALSE(state.posts.at(id).visible);
        CHECK(state.posts.at(id).record.post()->content == "first!");
        CHECK(state.posts.at(id).block_height == 1);
    }
    SUBCASE("authors may delete their own posts") {
        auto b2 = seal_records(owner, b1, std::vector{make_delete_marker(alice, id).value()});
        CHECK_FALSE(project_forum(std::vector{genesis, b1, b2}, owner.public_key).posts.at(id).visible);
    }
    SUBCASE("third parties cannot delete") {
        auto b2 = seal_records(owner, b1, std::vector{make_delete_marker(mallory, id).value()});
        CHECK(project_forum(std::vector{genesis, b1, b2}, owner.public_key).posts.at(id).visible);
    }
    SUBCASE("a marker earlier in the same block still applies") {
        auto reply_post = make_post(alice, "later", std::nullopt, 12).value();
        const auto later = reply_post.post()->post_id;
        auto b2 = seal_records(owner, b1, std::vector{make_delete_marker(alice, later).value(), reply_post});
        auto state = project_forum(std::vector{genesis, b1, b2}, owner.public_key);
        CHECK_FALSE(state.posts.at(later).visible);
        CHECK(state.pending_deletes.empty());
    }
}

TEST_CASE("project_forum threads and dangling replies") {
    auto owner = key_for("owner");
    auto alice = key_for("alice");
    auto genesis = chaincore::make_genesis(owner, "forum", 10).value();
    auto root = make_post(alice, "root", std::nullopt, 1).value();
    auto missing = chaincore::sha256(as_bytes("nowhere"));
    auto reply = make_post(alice, "re", root.post()->post_id, 2).value();
    auto orphan = make_post(alice, "orphan", missing, 3).value();
    auto b1 = seal_records(owner, genesis, std::vector{root, reply, orphan});
    auto state = project_forum(std::vector{genesis, b1}, owner.public_key);
    CHECK(state.order.size() == 3);
    CHECK_FALSE(state.posts.at(reply.post()->post_id).reply_unresolved);
    CHECK(state.posts.at(orphan.post()->post_id).reply_unresolved);
    CHECK(state.replies.at(root.post()->post_id) == std::vector{reply.post()->post_id});
}

TEST_CASE("project_forum skips records that fail verification") {
    auto owner = key_for("owner");
    auto alice = key_for("alice");
    auto genesis = chaincore::make_genesis(owner, "forum", 10).value();
    auto good = make_post(alice, "good", std::nullopt, 1).value();
    auto forged = make_post(alice, "forged", std::nullopt, 2).value();
    forged.author_sig[0] ^= 1;
    auto b1 = seal_records(owner, genesis, std::vector{forged, good});
    auto state = project_forum(std::vector{genesis, b1}, owner.public_key);
    CHECK(state.posts.size() == 1);
    CHECK(state.posts.count(good.post()->post_id));
    CHECK(state.skipped_records == 1);
}

TEST_CASE("project_identity: first registration wins") {
    auto owner = key_for("owner");
    auto alice = key_for("alice");
    auto eve = key_for("eve");
    auto genesis = chaincore::make_genesis(owner, "ids", 10).value();
    auto b1 = seal_records(owner, genesis, std::vector{make_identity(alice, "alice").value()});
    auto b2 = seal_records(owner, b1, std::vector{make_identity(eve, "alice").value()});
    auto state = project_identity(std::vector{genesis, b1, b2});
    REQUIRE(state.names.count("alice"));
    CHECK(state.names.at("alice").pub == alice.public_key);
    CHECK(state.names.at("alice").block_height == 1);
    CHECK_FALSE(state.reverse.count(eve.public_key));
}

TEST_CASE("project_identity: a key moves to an unclaimed name only") {
    auto owner = key_for("owner");
    auto alice = key_for("alice");
    auto bob = key_for("bob");
    auto genesis = chaincore::make_genesis(owner, "ids", 10).value();
    auto b1 = seal_records(owner, genesis,
                           std::vector{make_identity(alice, "alice").value(), make_identity(bob, "bob").value()});
    auto b2 = seal_records(owner, b1,
                           std::vector{make_identity(alice, "bob").value(), make_identity(alice, "ally").value()});
    auto state = project_identity(std::vector{genesis, b1, b2});
    CHECK(state.names.at("bob").pub == bob.public_key);
    CHECK(state.names.at("ally").pub == alice.public_key);
    CHECK_FALSE(state.names.count("alice"));
    CHECK(state.reverse.at(alice.public_key) == "ally");
}

TEST_CASE("property: names map stays injective") {
    std::mt19937_64 rng(5);
    auto owner = key_for("owner");
    std::vector<chaincore::KeyPair> keys;
    for (int i = 0; i < 5; ++i) keys.push_back(key_for("k" + std::to_string(i)));
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<chaincore::Block> blocks{chaincore::make_genesis(owner, "ids", 1).value()};
        for (int h = 0; h < 6; ++h) {
            std::vector<ChainRecord> records;
            for (int i = 0; i < 4; ++i)
                records.push_back(
                    make_identity(keys[rng() % keys.size()], "n" + std::to_string(rng() % 4)).value());
            blocks.push_back(seal_records(owner, blocks.back(), records));
        }
        auto state = project_identity(blocks);
        std::set<PublicKey> holders;
        for (const auto& [name, entry] : state.names) {
            CHECK(holders.insert(entry.pub).second);
            CHECK(state.reverse.at(entry.pub) == name);
        }
        CHECK(state.reverse.size() == state.names.size());
    }
}

TEST_CASE("property: soft delete never removes content") {
    std::mt19937_64 rng(9);
    auto owner = key_for("owner");
    std::vector<chaincore::KeyPair> keys = {key_for("a"), key_for("b"), owner};
    std::vector<chaincore::Block> blocks{chaincore::make_genesis(owner, "forum", 1).value()};
    std::vector<ChainRecord> posts;
    for (int h = 0; h < 8; ++h) {
        std::vector<ChainRecord> records;
        for (int i = 0; i < 5; ++i) {
            if (!posts.empty() && rng() % 2) {
                const auto& target = posts[rng() % posts.size()];
                records.push_back(make_delete_marker(keys[rng() % keys.size()], target.post()->post_id).value());
            } else {
                posts.push_back(
                    make_post(keys[rng() % keys.size()], "p" + std::to_string(rng()), std::nullopt, h).value());
                records.push_back(posts.back());
            }
        }
        blocks.push_back(seal_records(owner, blocks.back(), records));
    }
    auto state = project_forum(blocks, owner.public_key);
    for (const auto& post : posts) {
        REQUIRE(state.posts.count(post.post()->post_id));
        CHECK(state.posts.at(post.post()->post_id).record == post);
    }
}

TEST_CASE("property: corrupting one record leaves the other records' projection unchanged") {
    std::mt19937_64 rng(17);
    auto owner = key_for("owner");
    auto alice = key_for("alice");
    auto genesis = chaincore::make_genesis(owner, "forum", 1).value();
    std::vector<ChainRecord> records;
    for (int i = 0; i < 6; ++i) records.push_back(make_post(alice, "post " + std::to_string(i), std::nullopt, i).value());
    const Bytes payload = encode_payload(records).value();
    const std::string clean(payload.begin(), payload.end());

    // Byte offsets of each record inside the payload text.
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t pos = 1;
    for (const auto& r : records) {
        const auto len = record_to_json(r).size();
        spans.emplace_back(pos, len);
        pos += len + 1;
    }

    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t victim = rng() % records.size();
        std::string text = clean;
        const auto [start, len] = spans[victim];
        const std::size_t at = start + rng() % len;
        text[at] = static_cast<char>(text[at] ^ static_cast<char>(1 + rng() % 255));

        auto block = seal_raw(owner, genesis, Bytes(text.begin(), text.end()));
        auto state = project_forum(std::vector{genesis, block}, owner.public_key);
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (i == victim) continue;
            const auto& id = records[i].post()->post_id;
            REQUIRE_MESSAGE(state.posts.count(id), "trial " << trial << " lost record " << i);
            CHECK(state.posts.at(id).record == records[i]);
            CHECK(state.posts.at(id).visible);
        }
    }
}
