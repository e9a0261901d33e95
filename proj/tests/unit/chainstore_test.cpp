#include "doctest.h"
#include "test_support.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/apps/projection.hpp"
#include "infnote/chaincore/golden.hpp"
#include "infnote/chainstore/reorder.hpp"
#include "infnote/chainstore/store.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <fstream>
#include <thread>

using namespace infnote;
using namespace infnote::chainstore;
using infnote::testing::build_chain;
using infnote::testing::chain_of;
using infnote::testing::key_for;
using infnote::testing::TempDir;

namespace {

ChainRegistryEntry entry_for(const chaincore::KeyPair& owner, std::string label = "test") {
    ChainRegistryEntry e;
    e.chain_id = chain_of(owner);
    e.owner_pub = owner.public_key;
    e.label = std::move(label);
    return e;
}

std::unique_ptr<ChainStore> open_store(const std::filesystem::path& dir) { return ChainStore::open(dir).value(); }

chaincore::Block fork_at(const std::vector<chaincore::Block>& chain, std::uint64_t height,
                         const chaincore::KeyPair& owner) {
    const auto& prev = chain[height - 1];
    std::string text = "fork";
    return chaincore::seal_block({prev.chain_id, height, prev.time + 1, prev.hash, Bytes(text.begin(), text.end())},
                                 owner)
        .value();
}

std::uint64_t size_of(const std::filesystem::path& p) { return std::filesystem::file_size(p); }

void truncate_file(const std::filesystem::path& p, std::uint64_t size) { std::filesystem::resize_file(p, size); }

/// A forum chain with a random mix of posts, replies and deletes from a few authors.
std::vector<chaincore::Block> random_forum_chain(const chaincore::KeyPair& owner, std::mt19937_64& rng,
                                                 std::size_t blocks) {
    std::vector<chaincore::KeyPair> authors = {owner, key_for("a1"), key_for("a2"), key_for("a3")};
    std::vector<Hash256> posts;
    std::vector<chaincore::Block> chain{chaincore::make_genesis(owner, "forum", 1000).value()};
    for (std::size_t h = 1; h < blocks; ++h) {
        std::vector<apps::ChainRecord> records;
        const std::size_t n = 1 + rng() % 4;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& author = authors[rng() % authors.size()];
            const auto roll = rng() % 10;
            if (roll < 2 && !posts.empty()) {
                records.push_back(apps::make_delete_marker(author, posts[rng() % posts.size()]).value());
            } else if (roll == 2) {
                // A delete for a post that will only appear later, if ever.
                Hash256 target = chaincore::sha256(as_bytes(std::to_string(rng() % 5)));
                records.push_back(apps::make_delete_marker(author, target).value());
            } else {
                std::optional<Hash256> reply;
                if (roll < 5 && !posts.empty()) reply = posts[rng() % posts.size()];
                auto post = apps::make_post(author, "post " + std::to_string(rng() % 1000), reply, rng() % 50).value();
                posts.push_back(post.post()->post_id);
                records.push_back(std::move(post));
            }
        }
        const auto& prev = chain.back();
        chain.push_back(chaincore::seal_block({prev.chain_id, h, prev.time + 1 + rng() % 3, prev.hash,
                                               apps::encode_payload(records).value()},
                                              owner)
                            .value());
    }
    return chain;
}

}  // namespace

TEST_CASE("chain log round-trips and survives reopen") {
    TempDir dir;
    auto owner = key_for("log");
    auto chain = build_chain(owner, 10);
    const auto path = dir.path() / "c.log";
    {
        auto log = ChainLog::open(path).value();
        for (const auto& b : chain) REQUIRE(log->append(b));
        CHECK(log->size() == 10);
    }
    auto log = ChainLog::open(path).value();
    CHECK(log->size() == 10);
    CHECK(log->truncated_bytes() == 0);
    CHECK_FALSE(log->index_was_rebuilt());
    for (std::size_t h = 0; h < chain.size(); ++h) {
        CHECK(log->read(h).value() == chain[h]);
        CHECK(log->hash_at(h) == chain[h].hash);
    }
    CHECK(log->read(10).code() == Errc::not_found);

    std::ifstream in(path, std::ios::binary);
    char head[5];
    in.read(head, 5);
    CHECK(std::string(head, 4) == "INFN");
    CHECK(head[4] == 1);
}

TEST_CASE("chain log keeps a valid prefix after a torn append at every cut point") {
    TempDir dir;
    auto owner = key_for("torn");
    auto chain = build_chain(owner, 4);
    const auto path = dir.path() / "c.log";
    std::vector<std::uint64_t> boundaries;
    {
        auto log = ChainLog::open(path).value();
        boundaries.push_back(size_of(path));
        for (const auto& b : chain) {
            REQUIRE(log->append(b));
            boundaries.push_back(size_of(path));
        }
    }
    Bytes full;
    {
        std::ifstream in(path, std::ios::binary);
        full.assign(std::istreambuf_iterator<char>(in), {});
    }
    for (std::uint64_t cut = 0; cut <= full.size(); ++cut) {
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            out.write(reinterpret_cast<const char*>(full.data()), static_cast<std::streamsize>(cut));
        }
        std::filesystem::remove(dir.path() / "c.log.idx");
        auto log = ChainLog::open(path).value();
        // Number of whole blocks before the cut.
        std::size_t whole = 0;
        while (whole + 1 < boundaries.size() && boundaries[whole + 1] <= cut) ++whole;
        REQUIRE(log->size() == whole);
        for (std::size_t h = 0; h < whole; ++h) CHECK(log->read(h).value() == chain[h]);
        CHECK(size_of(path) == std::max<std::uint64_t>(boundaries[whole], 5));
    }
}

TEST_CASE("chain log rebuilds a corrupt or stale index") {
    TempDir dir;
    auto owner = key_for("index");
    auto chain = build_chain(owner, 6);
    const auto path = dir.path() / "c.log";
    const auto idx = dir.path() / "c.log.idx";
    {
        auto log = ChainLog::open(path).value();
        for (const auto& b : chain) REQUIRE(log->append(b));
    }
    SUBCASE("garbage index") {
        std::ofstream(idx, std::ios::binary | std::ios::trunc) << "not an index at all, clearly";
    }
    SUBCASE("index missing the tail") { truncate_file(idx, 44 * 3); }
    SUBCASE("index removed") { std::filesystem::remove(idx); }
    auto log = ChainLog::open(path).value();
    CHECK(log->index_was_rebuilt());
    REQUIRE(log->size() == 6);
    for (std::size_t h = 0; h < 6; ++h) CHECK(log->read(h).value() == chain[h]);
    CHECK(size_of(idx) == 44 * 6);
}

TEST_CASE("chain log refuses foreign files") {
    TempDir dir;
    const auto path = dir.path() / "c.log";
    std::ofstream(path, std::ios::binary) << "JUNKJUNKJUNK";
    CHECK(ChainLog::open(path).code() == Errc::io_error);
}

TEST_CASE("append_block basics") {
    TempDir dir;
    auto store = open_store(dir.path());
    auto owner = key_for("owner");
    auto chain = build_chain(owner, 10);
    const auto id = chain_of(owner);

    CHECK(store->append_block(chain[0]).code() == Errc::unknown_chain);
    REQUIRE(store->follow_chain(entry_for(owner)));
    CHECK_FALSE(store->get_head(id).value().has_value());

    CHECK(store->append_block(chain[0]).value() == AppendOutcome::appended);
    CHECK(store->append_block(chain[1]).value() == AppendOutcome::appended);
    CHECK(store->get_head(id).value()->hash == chain[1].hash);
    CHECK(store->chain_size(id).value() == 2);

    // Identical re-append is a no-op.
    CHECK(store->append_block(chain[1]).value() == AppendOutcome::duplicate);
    CHECK(store->chain_size(id).value() == 2);

    // A gap is rejected, not buffered.
    CHECK(store->append_block(chain[3]).code() == Errc::bad_height);

    for (std::size_t h = 2; h < chain.size(); ++h) REQUIRE(store->append_block(chain[h]));
    auto range = store->get_range(id, 3, 5).value();
    REQUIRE(range.size() == 3);
    CHECK(range[0].height == 3);
    CHECK(range[2].height == 5);
    auto clamped = store->get_range(id, 8, 20).value();
    REQUIRE(clamped.size() == 2);
    CHECK(clamped[0].height == 8);
    CHECK(clamped[1].height == 9);
    CHECK(store->get_range(id, 5, 3).code() == Errc::invalid_argument);
    CHECK(store->get_block(id, 42).value() == std::nullopt);

    auto loc = store->find_by_hash(chain[7].hash);
    REQUIRE(loc);
    CHECK(loc->height == 7);
    CHECK(store->verify_chain(id).value() == 0);
}

TEST_CASE("append_block propagates verification failures") {
    TempDir dir;
    auto store = open_store(dir.path());
    auto owner = key_for("owner");
    auto chain = build_chain(owner, 3);
    REQUIRE(store->follow_chain(entry_for(owner)));
    REQUIRE(store->append_block(chain[0]));

    auto bad_sig = chain[1];
    bad_sig.signature[5] ^= 1;
    CHECK(store->append_block(bad_sig).code() == Errc::bad_signature);

    auto bad_hash = chain[1];
    bad_hash.payload.push_back('x');
    CHECK(store->append_block(bad_hash).code() == Errc::bad_hash);

    // Correctly signed, but time goes backwards.
    auto early = chaincore::seal_block({chain[0].chain_id, 1, chain[0].time - 1, chain[0].hash, {}}, owner).value();
    CHECK(store->append_block(early).code() == Errc::bad_time);

    auto wrong_prev = chaincore::seal_block({chain[0].chain_id, 1, chain[0].time + 1, Hash256{}, {}}, owner).value();
    CHECK(store->append_block(wrong_prev).code() == Errc::bad_prev_hash);

    // A block signed by someone else.
    auto intruder = key_for("intruder");
    auto forged = chain[1];
    forged.signature = chaincore::sign_digest(intruder.private_key, forged.hash);
    CHECK(store->append_block(forged).code() == Errc::bad_signature);
    CHECK(store->chain_size(chain[0].chain_id).value() == 1);
}

TEST_CASE("equivocation bans the chain, keeps history and persists") {
    TempDir dir;
    auto owner = key_for("cheat");
    auto chain = build_chain(owner, 5);
    const auto id = chain_of(owner);
    std::vector<ChainId> banned_via_hook;
    {
        auto store = open_store(dir.path());
        store->add_ban_hook([&](const ChainId& c, const EquivocationEvidence&) { banned_via_hook.push_back(c); });
        REQUIRE(store->follow_chain(entry_for(owner)));
        for (const auto& b : chain) REQUIRE(store->append_block(b));

        auto fork = fork_at(chain, 3, owner);
        CHECK(store->append_block(fork).value() == AppendOutcome::equivocation);
        auto e = store->entry(id).value();
        CHECK(e.status == ChainStatus::banned);
        REQUIRE(e.ban_evidence);
        CHECK(chaincore::check_evidence(*e.ban_evidence, owner.public_key));
        CHECK(store->append_block(chain[4]).code() == Errc::chain_banned);
        CHECK(store->get_range(id, 0, 10).value().size() == 5);
        // Re-following does not lift a ban.
        REQUIRE(store->follow_chain(entry_for(owner)));
        CHECK(store->entry(id)->status == ChainStatus::banned);
    }
    CHECK(banned_via_hook == std::vector<ChainId>{id});

    auto store = open_store(dir.path());
    auto e = store->entry(id).value();
    CHECK(e.status == ChainStatus::banned);
    CHECK(e.ban_evidence.has_value());
    CHECK(store->get_range(id, 0, 10).value().size() == 5);
    CHECK(store->list_chains(ChainStatus::banned).size() == 1);
    CHECK(store->list_chains(ChainStatus::followed).empty());
}

TEST_CASE("record_equivocation validates evidence") {
    TempDir dir;
    auto store = open_store(dir.path());
    auto owner = key_for("cheat2");
    auto chain = build_chain(owner, 3);
    REQUIRE(store->follow_chain(entry_for(owner)));
    auto fork = fork_at(chain, 2, owner);

    EquivocationEvidence forged{chain[2], fork};
    forged.block_b.signature = chaincore::sign_digest(key_for("other").private_key, fork.hash);
    CHECK(store->record_equivocation(forged).code() == Errc::invalid_evidence);
    CHECK(store->entry(chain[0].chain_id)->status == ChainStatus::followed);

    CHECK(store->record_equivocation({chain[2], fork}));
    CHECK(store->entry(chain[0].chain_id)->status == ChainStatus::banned);
    CHECK(store->append_block(chain[0]).code() == Errc::chain_banned);
}

TEST_CASE("registry: default list, overrides and last write wins") {
    TempDir dir;
    auto x = key_for("x");
    auto y = key_for("y");
    REQUIRE(write_registry_file(dir.path() / "defaults.list", {entry_for(x, "chain x"), entry_for(y, "chain y")}));
    {
        auto store = open_store(dir.path());
        auto all = store->list_chains();
        REQUIRE(all.size() == 2);
        CHECK(all[0].source == ChainSource::default_list);
        REQUIRE(store->drop_chain(chain_of(x)));
        auto followed = store->list_chains(ChainStatus::followed);
        REQUIRE(followed.size() == 1);
        CHECK(followed[0].chain_id == chain_of(y));
        CHECK(store->append_block(build_chain(x, 1)[0]).code() == Errc::chain_dropped);
    }
    {
        // The drop shadows the default list across restarts.
        auto store = open_store(dir.path());
        CHECK(store->entry(chain_of(x))->status == ChainStatus::dropped);
        CHECK(store->entry(chain_of(x))->label == "chain x");
        REQUIRE(store->follow_chain(entry_for(x, "mine now")));
        REQUIRE(store->drop_chain(chain_of(x)));
        REQUIRE(store->follow_chain(entry_for(x, "mine again")));
    }
    auto store = open_store(dir.path());
    auto e = store->entry(chain_of(x)).value();
    CHECK(e.status == ChainStatus::followed);
    CHECK(e.source == ChainSource::user_added);
    CHECK(e.label == "mine again");

    auto mismatched = entry_for(x);
    mismatched.owner_pub = y.public_key;
    CHECK(store->follow_chain(mismatched).code() == Errc::invalid_entry);
    CHECK(store->drop_chain(chain_of(key_for("nobody"))).code() == Errc::unknown_chain);
}

TEST_CASE("registry file rejects malformed lines") {
    TempDir dir;
    std::ofstream(dir.path() / "bad.list") << "# comment\nzz 00 label\n";
    CHECK(read_registry_file(dir.path() / "bad.list").code() == Errc::invalid_entry);
    auto x = key_for("x");
    auto e = entry_for(x, "label with spaces");
    REQUIRE(write_registry_file(dir.path() / "ok.list", {e}));
    auto back = read_registry_file(dir.path() / "ok.list").value();
    REQUIRE(back.size() == 1);
    CHECK(back[0].label == "label with spaces");
    CHECK(back[0].owner_pub == x.public_key);
}

TEST_CASE("property: append-only across random operation sequences") {
    TempDir dir;
    std::mt19937_64 rng(7);
    std::vector<chaincore::KeyPair> owners = {key_for("p0"), key_for("p1"), key_for("p2")};
    std::vector<std::vector<chaincore::Block>> chains;
    for (const auto& o : owners) chains.push_back(build_chain(o, 12));
    std::vector<std::tuple<ChainId, std::uint64_t, Hash256>> stored;

    auto store = open_store(dir.path());
    for (const auto& o : owners) REQUIRE(store->follow_chain(entry_for(o)));
    for (int step = 0; step < 300; ++step) {
        const std::size_t c = rng() % owners.size();
        const auto id = chain_of(owners[c]);
        switch (rng() % 6) {
            case 0: store->drop_chain(id); break;
            case 1: store->follow_chain(entry_for(owners[c])); break;
            case 2: store->append_block(fork_at(chains[c], 1 + rng() % 11, owners[c])); break;
            case 3: store = open_store(dir.path()); break;
            default: {
                const auto& b = chains[c][rng() % chains[c].size()];
                auto outcome = store->append_block(b);
                if (outcome && *outcome == AppendOutcome::appended) stored.emplace_back(b.chain_id, b.height, b.hash);
            }
        }
        for (const auto& [cid, h, hash] : stored) {
            auto b = store->get_block(cid, h).value();
            REQUIRE(b.has_value());
            REQUIRE(b->hash == hash);
        }
    }
    for (const auto& o : owners) CHECK(store->verify_chain(chain_of(o)).value() == 0);
}

TEST_CASE("replay is deterministic and equals incremental projection") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        TempDir dir;
        auto store = open_store(dir.path());
        auto owner = key_for("forum" + std::to_string(trial));
        auto chain = random_forum_chain(owner, rng, 2 + rng() % 12);
        REQUIRE(store->follow_chain(entry_for(owner)));

        apps::ForumProjector incremental(owner.public_key);
        apps::IdentityProjector ids;
        store->add_append_hook([&](const chaincore::Block& b) {
            incremental.apply(b);
            ids.apply(b);
        });
        {
            apps::ForumProjector empty(owner.public_key);
            REQUIRE(store->replay(chain[0].chain_id, empty));
            CHECK(empty.state() == apps::ForumState{});
        }
        for (const auto& b : chain) REQUIRE(store->append_block(b));

        apps::ForumProjector first(owner.public_key), second(owner.public_key);
        REQUIRE(store->replay(chain[0].chain_id, first));
        REQUIRE(store->replay(chain[0].chain_id, second));
        CHECK(first.state() == second.state());
        CHECK(first.state() == incremental.state());
        CHECK(first.state() == apps::project_forum(chain, owner.public_key));
        apps::IdentityProjector replayed;
        REQUIRE(store->replay(chain[0].chain_id, replayed));
        CHECK(replayed.state() == ids.state());
    }
}

TEST_CASE("shuffled arrival through the reorder buffer projects like in-order arrival") {
    std::mt19937_64 rng(13);
    auto owner = key_for("shuffle");
    auto chain = random_forum_chain(owner, rng, 6);
    const auto expected = apps::project_forum(chain, owner.public_key);

    std::vector<std::size_t> order(chain.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t permutations = 0;
    do {
        TempDir dir;
        auto store = open_store(dir.path());
        REQUIRE(store->follow_chain(entry_for(owner)));
        ReorderBuffer buffer;
        for (auto i : order) {
            buffer.offer(chain[i]);
            buffer.drain(*store, chain[0].chain_id);
        }
        REQUIRE(store->chain_size(chain[0].chain_id).value() == chain.size());
        apps::ForumProjector p(owner.public_key);
        REQUIRE(store->replay(chain[0].chain_id, p));
        REQUIRE(p.state() == expected);
        ++permutations;
    } while (std::next_permutation(order.begin(), order.end()));
    CHECK(permutations == 720);
}

TEST_CASE("reorder buffer surfaces out-of-order equivocation") {
    TempDir dir;
    auto store = open_store(dir.path());
    auto owner = key_for("ooo");
    auto chain = build_chain(owner, 4);
    REQUIRE(store->follow_chain(entry_for(owner)));
    ReorderBuffer buffer;
    CHECK(buffer.offer(chain[3]));
    CHECK(buffer.offer(fork_at(chain, 2, owner)));
    CHECK(buffer.offer(chain[2]));
    CHECK(buffer.offer(chain[2]));
    CHECK(buffer.pending(chain[0].chain_id) == 3);
    CHECK(buffer.lowest_pending(chain[0].chain_id) == 2);
    CHECK(buffer.drain(*store, chain[0].chain_id).appended.empty());
    REQUIRE(store->append_block(chain[0]));
    REQUIRE(store->append_block(chain[1]));
    auto drained = buffer.drain(*store, chain[0].chain_id);
    CHECK(drained.equivocation);
    CHECK(store->entry(chain[0].chain_id)->status == ChainStatus::banned);
    CHECK(buffer.pending(chain[0].chain_id) == 0);
}

TEST_CASE("export and import move a chain between stores") {
    TempDir a, b;
    auto owner = key_for("sneaker");
    auto chain = build_chain(owner, 8);
    auto src = open_store(a.path());
    REQUIRE(src->follow_chain(entry_for(owner)));
    for (const auto& blk : chain) REQUIRE(src->append_block(blk));
    const auto file = a.path() / "export.hex";
    REQUIRE(src->export_chain(chain[0].chain_id, file));
    CHECK(chaincore::read_golden_blocks(file).value() == chain);

    auto dst = open_store(b.path());
    CHECK(dst->import_chain(file).value() == 8);
    CHECK(dst->import_chain(file).value() == 0);
    CHECK(dst->get_range(chain[0].chain_id, 0, 100).value() == chain);
    CHECK(dst->entry(chain[0].chain_id)->label == "test");

    auto tampered = chain;
    tampered[4].payload.push_back('!');
    REQUIRE(chaincore::write_golden_blocks(a.path() / "bad.hex", tampered));
    TempDir c;
    auto other = open_store(c.path());
    CHECK(other->import_chain(a.path() / "bad.hex").code() == Errc::bad_signature);
    CHECK(other->chain_size(chain[0].chain_id).value() == 4);
}

TEST_CASE("readers see a consistent prefix during appends") {
    TempDir dir;
    auto store = open_store(dir.path());
    auto owner = key_for("concurrent");
    auto chain = build_chain(owner, 200);
    const auto id = chain[0].chain_id;
    REQUIRE(store->follow_chain(entry_for(owner)));
    std::atomic<bool> done{false};
    std::atomic<int> violations{0};
    std::thread reader([&] {
        while (!done) {
            auto size = store->chain_size(id).value();
            if (size == 0) continue;
            auto range = store->get_range(id, 0, size - 1).value();
            if (range.size() < size) ++violations;
            for (std::size_t h = 0; h < range.size(); ++h)
                if (range[h] != chain[h]) ++violations;
        }
    });
    for (const auto& b : chain) REQUIRE(store->append_block(b));
    done = true;
    reader.join();
    CHECK(violations == 0);
}
