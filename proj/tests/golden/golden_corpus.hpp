#pragma once

// Deterministic inputs for the checked-in golden vectors. The generator writes
// them once; tests rebuild them and compare byte for byte.

#include "infnote/apps/payload.hpp"
#include "infnote/chaincore/block.hpp"

#include <string>
#include <vector>

namespace infnote::golden {

struct Corpus {
    std::string owner_seed_hex;
    std::vector<std::string> author_seed_hex;
    std::uint64_t genesis_time = 0;
    std::string label;
    std::vector<apps::ChainRecord> records;
    /// For each block, the record indices its payload carries (empty for
    /// genesis and raw payloads).
    std::vector<std::vector<std::size_t>> block_records;
    std::vector<chaincore::Block> blocks;
};

inline ByteArray<32> seed_of(const std::string& hex) { return *array_from_hex<32>(hex); }

inline Corpus build_corpus() {
    Corpus c;
    c.owner_seed_hex = std::string(62, '0') + "a1";
    c.author_seed_hex = {std::string(62, '0') + "b1", std::string(62, '0') + "b2", std::string(62, '0') + "b3"};
    c.genesis_time = 1'700'000'000;
    c.label = "golden \"chain\" \xce\xb1";
    const auto owner = chaincore::generate_keypair(seed_of(c.owner_seed_hex)).value();
    std::vector<chaincore::KeyPair> authors;
    for (const auto& s : c.author_seed_hex) authors.push_back(chaincore::generate_keypair(seed_of(s)).value());

    auto add = [&](Result<apps::ChainRecord> r) { c.records.push_back(r.value()); };
    const std::vector<std::string> texts = {
        "hello, infnote",
        "",
        "quotes \" and backslash \\ and slash /",
        "line one\nline two\ttabbed",
        "control \x01\x1f chars",
        "unicode \xe4\xbd\xa0\xe5\xa5\xbd \xf0\x9f\x93\x9d",
        std::string(300, 'x'),
        "reply to the first post",
        "reply to a reply",
        "{\"looks\":\"like json\"}",
        "trailing space ",
        "last post",
    };
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::optional<Hash256> reply;
        if (i == 7) reply = c.records[0].post()->post_id;
        if (i == 8) reply = c.records[7].post()->post_id;
        add(apps::make_post(authors[i % 3], texts[i], reply, 1'700'000'000'000ULL + i * 1000));
    }
    // Delete markers: own post, someone else's post, and an unknown target.
    add(apps::make_delete_marker(authors[1], c.records[1].post()->post_id));
    add(apps::make_delete_marker(authors[0], c.records[1].post()->post_id));
    add(apps::make_delete_marker(authors[2], chaincore::sha256(as_bytes("never posted"))));
    add(apps::make_delete_marker(authors[2], c.records[3].post()->post_id));
    add(apps::make_identity(authors[0], "alice", std::nullopt));
    add(apps::make_identity(authors[1], "bob_2", std::string("profile with \"quotes\"")));
    add(apps::make_identity(authors[2], "alice", std::nullopt));  // loses: name taken
    add(apps::make_identity(authors[0], "alice_moved", std::nullopt));
    add(apps::make_identity(authors[2], std::string(32, 'z'), std::string("\xc3\xa9t\xc3\xa9")));
    add(apps::make_identity(authors[1], "b", std::nullopt));

    c.blocks.push_back(chaincore::make_genesis(owner, c.label, c.genesis_time).value());
    c.block_records.push_back({});
    auto seal = [&](Bytes payload, std::vector<std::size_t> ids) {
        const auto& prev = c.blocks.back();
        chaincore::BlockDraft d{prev.chain_id, prev.height + 1, prev.time + 7, prev.hash, std::move(payload)};
        c.blocks.push_back(chaincore::seal_block(std::move(d), owner).value());
        c.block_records.push_back(std::move(ids));
    };
    // Eleven blocks of two records each.
    for (std::size_t i = 0; i + 1 < c.records.size(); i += 2) {
        std::vector<apps::ChainRecord> pair{c.records[i], c.records[i + 1]};
        seal(apps::encode_payload(pair).value(), {i, i + 1});
    }
    // Raw payloads: empty, every byte value, plain text.
    seal(Bytes{}, {});
    Bytes all(256);
    for (std::size_t i = 0; i < 256; ++i) all[i] = static_cast<std::uint8_t>(i);
    seal(all, {});
    for (int i = 0; i < 10; ++i) {
        const std::string text = "raw block " + std::to_string(i);
        seal(Bytes(text.begin(), text.end()), {});
    }
    return c;
}

}  // namespace infnote::golden
