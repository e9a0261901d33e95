#include "doctest.h"

#include "../golden/golden_corpus.hpp"

#include "infnote/apps/projection.hpp"
#include "infnote/chaincore/golden.hpp"

#include <fstream>
#include <sstream>

using namespace infnote;

namespace {

const std::filesystem::path kDir = std::filesystem::path(INFNOTE_SOURCE_DIR) / "tests" / "golden";

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("golden blocks verify and match a fresh build bit for bit") {
    auto corpus = golden::build_corpus();
    auto blocks = chaincore::read_golden_blocks(kDir / "blocks.hex");
    REQUIRE(blocks);
    REQUIRE(blocks->size() >= 20);
    REQUIRE(blocks->size() == corpus.blocks.size());
    auto lines = read_lines(kDir / "blocks.hex");
    const auto owner = chaincore::generate_keypair(golden::seed_of(corpus.owner_seed_hex)).value();
    for (std::size_t h = 0; h < blocks->size(); ++h) {
        INFO("height " << h);
        const auto& b = (*blocks)[h];
        CHECK(b == corpus.blocks[h]);
        CHECK(chaincore::block_to_hex(b) == lines[h]);
        CHECK((h == 0 ? chaincore::verify_genesis(b, owner.public_key) : chaincore::verify_block(b, owner.public_key)));
        if (h > 0) CHECK(chaincore::validate_successor((*blocks)[h - 1], b));
    }
}

TEST_CASE("golden records are canonical and verify") {
    auto corpus = golden::build_corpus();
    auto lines = read_lines(kDir / "records.jsonl");
    REQUIRE(lines.size() >= 20);
    REQUIRE(lines.size() == corpus.records.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        INFO("record " << i);
        auto r = apps::parse_record(lines[i]);
        REQUIRE(r);
        CHECK(*r == corpus.records[i]);
        CHECK(apps::record_to_json(*r) == lines[i]);
        CHECK(apps::verify_record(*r));
    }
}

TEST_CASE("golden chain projects as expected") {
    auto blocks = chaincore::read_golden_blocks(kDir / "blocks.hex").value();
    auto corpus = golden::build_corpus();
    const auto owner = chaincore::generate_keypair(golden::seed_of(corpus.owner_seed_hex)).value();
    auto forum = apps::project_forum(blocks, owner.public_key);
    CHECK(forum.posts.size() == 12);
    CHECK(forum.skipped_records == 0);
    // Post 1 is withdrawn by its author; post 3 survives a stranger's delete.
    CHECK_FALSE(forum.posts.at(corpus.records[1].post()->post_id).visible);
    CHECK(forum.posts.at(corpus.records[3].post()->post_id).visible);
    auto ids = apps::project_identity(blocks);
    CHECK(ids.names.count("alice") == 0);
    CHECK(ids.names.count("alice_moved") == 1);
    // Moving to a new name releases the old one.
    CHECK(ids.names.count("bob_2") == 0);
    CHECK(ids.names.count("b") == 1);
    CHECK(ids.names.count(std::string(32, 'z')) == 1);
    CHECK(ids.names.size() == 3);
}

TEST_CASE("manifest matches the corpus") {
    std::ifstream in(kDir / "manifest.json");
    auto m = nlohmann::json::parse(in);
    auto corpus = golden::build_corpus();
    CHECK(m["owner_seed"] == corpus.owner_seed_hex);
    CHECK(m["block_records"].size() == corpus.blocks.size());
    CHECK(m["label"] == corpus.label);
}
