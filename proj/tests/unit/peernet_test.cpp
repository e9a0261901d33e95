#include "doctest.h"
#include "peer_harness.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/peernet/bootstrap.hpp"

#include <fstream>
#include <set>

using namespace infnote;
using namespace infnote::peernet;
using infnote::testing::build_chain;
using infnote::testing::key_for;
using infnote::testing::MiniNet;
using infnote::testing::TempDir;

namespace {

void seed(MiniNet& net, std::size_t node, const std::vector<chaincore::Block>& chain, std::size_t count) {
    for (std::size_t h = 0; h < count; ++h) REQUIRE(net.nodes[node].store->append_block(chain[h]));
}

std::uint64_t size_of(MiniNet& net, std::size_t node, const chaincore::ChainId& id) {
    return net.nodes[node].store->chain_size(id).value();
}

nlohmann::json post_json(const chaincore::KeyPair& author, const std::string& text) {
    return apps::record_to_json_value(apps::make_post(author, text, std::nullopt, 1).value());
}

}  // namespace

TEST_CASE("address book: dedup, merge, success and failure") {
    AddressBook book;
    book.add({"a", 1, 10, 0});
    book.add({"a", 1, 20, 0});
    book.add({"a", 1, 5, 0});
    CHECK(book.size() == 1);
    CHECK(book.find("a", 1)->last_seen == 20);
    book.add({"a", 0, 1, 0});
    book.add({"", 5, 1, 0});
    CHECK(book.size() == 1);

    for (int i = 0; i < 3; ++i) book.record_failure("a", 1);
    CHECK(book.find("a", 1)->failures == 3);
    CHECK(book.is_demoted(*book.find("a", 1)));
    book.record_success("a", 1, 100);
    CHECK(book.find("a", 1)->failures == 0);
    CHECK(book.find("a", 1)->last_seen == 100);
}

TEST_CASE("address book: dial order and eviction") {
    AddressBook book(3);
    book.add({"old", 1, 10, 0});
    book.add({"new", 1, 50, 0});
    book.add({"flaky", 1, 99, 0});
    for (int i = 0; i < 4; ++i) book.record_failure("flaky", 1);
    auto order = book.candidates();
    CHECK(order[0].host == "new");
    CHECK(order[1].host == "old");
    CHECK(order[2].host == "flaky");

    // Highest failures go first, then the oldest.
    book.add({"x", 1, 70, 0});
    CHECK_FALSE(book.find("flaky", 1));
    book.add({"y", 1, 80, 0});
    CHECK_FALSE(book.find("old", 1));
    CHECK(book.size() == 3);
}

TEST_CASE("address book: capacity holds at 1024 and persists") {
    TempDir dir;
    AddressBook book;
    for (int i = 0; i < 1500; ++i) book.add({"10.0." + std::to_string(i / 256) + "." + std::to_string(i % 256), 7420,
                                             static_cast<std::uint64_t>(i), 0});
    CHECK(book.size() == 1024);
    // The oldest 476 went.
    CHECK_FALSE(book.find("10.0.0.0", 7420));
    CHECK(book.find("10.0.5.219", 7420));
    book.record_failure("10.0.5.219", 7420);
    REQUIRE(book.save(dir.path() / "peers"));
    auto loaded = AddressBook::load(dir.path() / "peers").value();
    CHECK(loaded.entries() == book.entries());
    CHECK(AddressBook::load(dir.path() / "missing").value().size() == 0);
    std::ofstream(dir.path() / "bad") << "host notaport 1 0\n";
    CHECK(AddressBook::load(dir.path() / "bad").code() == Errc::invalid_entry);
}

TEST_CASE("seen set is a bounded LRU") {
    SeenSet seen(3);
    Hash256 h[5]{};
    for (int i = 0; i < 5; ++i) h[i][0] = static_cast<std::uint8_t>(i);
    CHECK(seen.insert(h[0]));
    CHECK(seen.insert(h[1]));
    CHECK(seen.insert(h[2]));
    CHECK_FALSE(seen.insert(h[0]));  // refreshes h0
    CHECK(seen.insert(h[3]));        // evicts h1
    CHECK(seen.contains(h[0]));
    CHECK_FALSE(seen.contains(h[1]));
    CHECK(seen.size() == 3);
    CHECK(SeenSet().capacity() >= 4096);
}

TEST_CASE("record pool evicts oldest at capacity") {
    auto author = key_for("pool");
    chaincore::ChainId chain;
    std::vector<apps::ChainRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(apps::make_post(author, "r" + std::to_string(i), {}, 1).value());
    const std::size_t one = apps::record_to_json(records[0]).size();
    RecordPool pool(one * 4);
    for (const auto& r : records) CHECK(pool.add(chain, r));
    CHECK_FALSE(pool.add(chain, records[9]));
    CHECK(pool.count(chain) == 4);
    CHECK(pool.evicted() == 6);
    auto kept = pool.peek(chain);
    CHECK(kept.front().record == records[6]);
    CHECK(kept.back().record == records[9]);
    auto taken = pool.take_while(chain, [](const PooledRecord&) { return true; });
    CHECK(taken.size() == 4);
    CHECK(pool.count(chain) == 0);
    CHECK(pool.bytes(chain) == 0);
}

TEST_CASE("gossip: relay to everyone but the origin, then dedup") {
    auto owner = key_for("gossip");
    auto chain = build_chain(owner, 3);
    MiniNet net;
    const auto center = net.add_full({owner});
    std::vector<std::size_t> leaves;
    for (int i = 0; i < 4; ++i) leaves.push_back(net.add_full({owner}));
    for (auto n : {center, leaves[0], leaves[1], leaves[2], leaves[3]}) seed(net, n, chain, 2);
    std::vector<SessionId> to_leaf;
    for (auto l : leaves) to_leaf.push_back(net.connect(center, l));
    net.pump();
    CHECK(net.nodes[center].peer->established_count() == 4);

    // Height 2 arrives at the center from leaf A.
    net.log.clear();
    net.nodes[center].peer->on_message(to_leaf[0], wire::NewBlock{chain[2]});
    CHECK(net.count_sent(center, "new_block") == 3);
    std::set<SessionId> targets;
    for (const auto& s : net.log)
        if (s.from == center && s.type == "new_block") targets.insert(s.session);
    CHECK(targets == std::set<SessionId>{to_leaf[1], to_leaf[2], to_leaf[3]});

    // Same block again from B: nothing.
    net.log.clear();
    net.nodes[center].peer->on_message(to_leaf[1], wire::NewBlock{chain[2]});
    CHECK(net.count_sent(center, "new_block") == 0);

    net.pump();
    for (std::size_t i = 1; i < leaves.size(); ++i) CHECK(size_of(net, leaves[i], chain[0].chain_id) == 3);
    // Flooding stops: each leaf's only peer is the one it heard from.
    for (auto l : leaves) CHECK(net.count_sent(l, "new_block") == 0);
}

TEST_CASE("gossip: banned chain blocks are dropped and not relayed") {
    auto owner = key_for("banned");
    auto chain = build_chain(owner, 4);
    MiniNet net;
    const auto a = net.add_full({owner});
    const auto b = net.add_full({owner});
    const auto c = net.add_full({owner});
    for (auto n : {a, b, c}) seed(net, n, chain, 3);
    const auto sab = net.connect(a, b);
    net.connect(a, c);
    net.pump();
    const auto& pa = chain[1];
    auto fork = chaincore::seal_block({pa.chain_id, 2, pa.time + 5, pa.hash, {}}, owner).value();
    REQUIRE(net.nodes[a].store->record_equivocation({chain[2], fork}));
    net.log.clear();
    net.nodes[a].peer->on_message(sab, wire::NewBlock{chain[3]});
    CHECK(net.count_sent(a, "new_block") == 0);
    CHECK(size_of(net, a, chain[0].chain_id) == 3);
}

TEST_CASE("gossip: equivocating block bans the chain and stops relay") {
    auto owner = key_for("equivocate");
    auto chain = build_chain(owner, 3);
    MiniNet net;
    const auto a = net.add_full({owner});
    const auto b = net.add_full({owner});
    for (auto n : {a, b}) seed(net, n, chain, 3);
    const auto sab = net.connect(a, b);
    net.pump();
    const auto& prev = chain[1];
    auto fork = chaincore::seal_block({prev.chain_id, 2, prev.time + 5, prev.hash, {}}, owner).value();
    net.log.clear();
    net.nodes[a].peer->on_message(sab, wire::NewBlock{fork});
    CHECK(net.nodes[a].store->entry(chain[0].chain_id)->status == chainstore::ChainStatus::banned);
    CHECK(net.count_sent(a, "new_block") == 0);
}

TEST_CASE("sync: 100 blocks in windows of 64 and 36") {
    auto owner = key_for("sync");
    auto chain = build_chain(owner, 101);
    MiniNet net;
    const auto ahead = net.add_full({owner});
    const auto behind = net.add_full({owner});
    seed(net, ahead, chain, 101);
    seed(net, behind, chain, 1);
    net.connect(behind, ahead);
    net.pump();
    CHECK(size_of(net, behind, chain[0].chain_id) == 101);
    CHECK(net.nodes[behind].peer->stats().sync_requests == 2);
    // Responses came back as two blocks messages.
    CHECK(net.count_sent(ahead, "blocks") == 2);
    CHECK(net.nodes[behind].store->get_range(chain[0].chain_id, 0, 200).value() == chain);
}

TEST_CASE("sync: equal heads request nothing") {
    auto owner = key_for("equal");
    auto chain = build_chain(owner, 10);
    MiniNet net;
    const auto a = net.add_full({owner});
    const auto b = net.add_full({owner});
    seed(net, a, chain, 10);
    seed(net, b, chain, 10);
    net.connect(a, b);
    net.pump();
    CHECK(net.count_sent(a, "get_blocks") == 0);
    CHECK(net.count_sent(b, "get_blocks") == 0);
    CHECK(net.nodes[a].peer->stats().blocks_appended == 0);
}

namespace {

/// Ledger wrapper that serves a tampered block at one height.
class TamperingLedger : public StoreLedger {
public:
    TamperingLedger(chainstore::ChainStore& store, std::uint64_t bad_height)
        : StoreLedger(store), bad_height_(bad_height) {}
    Result<std::vector<Block>> range(const ChainId& id, std::uint64_t from, std::uint64_t to) const override {
        auto blocks = StoreLedger::range(id, from, to);
        if (blocks)
            for (auto& b : *blocks)
                if (b.height == bad_height_) b.signature[3] ^= 0x40;
        return blocks;
    }

private:
    std::uint64_t bad_height_;
};

}  // namespace

TEST_CASE("sync: tampered block mid-stream aborts and penalizes") {
    auto owner = key_for("tamper");
    auto chain = build_chain(owner, 30);
    MiniNet net;
    const auto behind = net.add_full({owner});
    MiniNet::Node liar;
    liar.dir = std::make_unique<TempDir>();
    liar.store = chainstore::ChainStore::open(liar.dir->path()).value();
    chainstore::ChainRegistryEntry e{chain[0].chain_id, owner.public_key, "t"};
    REQUIRE(liar.store->follow_chain(e));
    for (const auto& b : chain) REQUIRE(liar.store->append_block(b));
    liar.ledger = std::make_unique<TamperingLedger>(*liar.store, 17);
    const auto bad = net.add(std::move(liar));
    seed(net, behind, chain, 1);
    net.connect(behind, bad);
    net.pump();
    CHECK(size_of(net, behind, chain[0].chain_id) == 17);
    CHECK(net.nodes[behind].peer->stats().penalties == 1);
    CHECK(net.nodes[behind].book->find("node1", 1)->failures == 1);
    CHECK_FALSE(net.nodes[behind].peer->syncing());
}

TEST_CASE("sync: gaps from new_block are filled and the buffered block applied") {
    auto owner = key_for("gap");
    auto chain = build_chain(owner, 12);
    MiniNet net;
    const auto a = net.add_full({owner});
    const auto b = net.add_full({owner});
    seed(net, a, chain, 11);
    seed(net, b, chain, 11);
    const auto sab = net.connect(a, b);
    net.pump();
    // b silently advanced to 11 without telling a; then a hears about 11 only.
    TempDir dir;
    auto c = net.add_full({owner});
    seed(net, c, chain, 3);
    const auto scb = net.connect(c, b);
    net.pump();
    CHECK(size_of(net, c, chain[0].chain_id) == 11);
    REQUIRE(net.nodes[b].store->append_block(chain[11]));
    net.nodes[c].peer->on_message(scb, wire::NewBlock{chain[11]});
    net.pump();
    CHECK(size_of(net, c, chain[0].chain_id) == 12);
    (void)sab;
}

TEST_CASE("light peers refuse to serve sync") {
    auto owner = key_for("light");
    auto chain = build_chain(owner, 5);
    MiniNet net;
    const auto full = net.add_full({owner});
    seed(net, full, chain, 1);
    const auto other = net.add_full({owner});
    seed(net, other, chain, 5);
    const auto s = net.connect(full, other);
    net.pump();
    CHECK(size_of(net, full, chain[0].chain_id) == 5);

    // A node configured light answers get_blocks with not-served.
    MiniNet net2;
    PeerNodeConfig light_config;
    light_config.kind = wire::NodeKind::light;
    const auto asker = net2.add_full({owner});
    seed(net2, asker, chain, 1);
    MiniNet::Node ln;
    ln.dir = std::make_unique<TempDir>();
    ln.store = chainstore::ChainStore::open(ln.dir->path()).value();
    REQUIRE(ln.store->follow_chain({chain[0].chain_id, owner.public_key, "t"}));
    for (const auto& b : chain) REQUIRE(ln.store->append_block(b));
    struct NoServe : StoreLedger {
        using StoreLedger::StoreLedger;
        bool serves_sync() const override { return false; }
    };
    ln.ledger = std::make_unique<NoServe>(*ln.store);
    const auto light = net2.add(std::move(ln), light_config);
    const auto sl = net2.connect(asker, light);
    net2.pump();
    // The asker knows it is light, so it never asks.
    CHECK(net2.count_sent(asker, "get_blocks") == 0);
    net2.nodes[asker].peer->on_message(sl, wire::GetPeers{});
    net2.nodes[light].peer->on_message(net2.remote_session(asker, sl), wire::GetBlocks{chain[0].chain_id, 0, 4});
    CHECK(net2.count_sent(light, "error") == 1);
    (void)s;
}

TEST_CASE("handshake rejects a protocol version mismatch") {
    auto owner = key_for("version");
    MiniNet net;
    const auto a = net.add_full({owner});
    const auto b = net.add_full({owner});
    net.connect(a, b);
    // Replace a's first hello with a future version before b sees it.
    net.nodes[b].peer->on_frame(
        net.remote_session(a, 1),
        R"({"v":1,"type":"hello","body":{"protocol_version":2,"node_kind":"full","chain_heads":[]}})");
    CHECK(net.count_sent(b, "error") == 1);
    net.pump();
    CHECK(net.nodes[b].peer->established_count() == 0);
    CHECK(net.nodes[b].peer->sessions().empty());
}

TEST_CASE("submit_records: per-record verdicts, dedup and forwarding") {
    auto owner = key_for("records");
    auto chain = build_chain(owner, 1);
    MiniNet net;
    const auto a = net.add_full({owner});
    const auto b = net.add_full({owner});
    const auto c = net.add_full({owner});
    for (auto n : {a, b, c}) seed(net, n, chain, 1);
    net.connect(a, b);
    net.connect(b, c);
    net.pump();

    auto author = key_for("writer");
    std::vector<nlohmann::json> batch = {post_json(author, "one"), post_json(author, "two"), post_json(author, "three"),
                                         post_json(author, "four")};
    batch[3]["author_sig"] = std::string(128, '1');
    auto out = net.nodes[a].peer->submit_records(std::nullopt, chain[0].chain_id, batch);
    CHECK(out.accepted == 3);
    REQUIRE(out.rejected.size() == 1);
    CHECK(out.rejected[0].first == 3);
    CHECK(out.rejected[0].second.code == Errc::bad_signature);

    auto again = net.nodes[a].peer->submit_records(std::nullopt, chain[0].chain_id, batch);
    CHECK(again.accepted == 0);
    CHECK(again.duplicates == 3);

    net.pump();
    for (auto n : {a, b, c}) CHECK(net.nodes[n].peer->pool().count(chain[0].chain_id) == 3);
    // Forwarded once per link: a -> b, b -> c; c forwards to nobody new.
    CHECK(net.count_sent(a, "submit_records") == 1);
    CHECK(net.count_sent(b, "submit_records") == 1);
    CHECK(net.count_sent(c, "submit_records") == 0);

    auto unknown = net.nodes[a].peer->submit_records(std::nullopt, chaincore::ChainId{}, batch);
    CHECK(unknown.accepted == 0);
    CHECK(unknown.rejected.size() == 4);
}

TEST_CASE("pooled records leave the pool once a block carries them") {
    auto owner = key_for("inclusion");
    auto chain = build_chain(owner, 1);
    MiniNet net;
    const auto a = net.add_full({owner});
    seed(net, a, chain, 1);
    auto author = key_for("w");
    auto r1 = apps::make_post(author, "x", {}, 1).value();
    auto r2 = apps::make_post(author, "y", {}, 1).value();
    net.nodes[a].peer->submit_records(std::nullopt, chain[0].chain_id,
                                      {apps::record_to_json_value(r1), apps::record_to_json_value(r2)});
    const std::vector<apps::ChainRecord> carried{r1};
    auto block = chaincore::seal_block(
                     {chain[0].chain_id, 1, chain[0].time + 1, chain[0].hash, apps::encode_payload(carried).value()},
                     owner)
                     .value();
    REQUIRE(net.nodes[a].peer->publish_block(block));
    auto left = net.nodes[a].peer->pool().peek(chain[0].chain_id);
    REQUIRE(left.size() == 1);
    CHECK(left[0].record == r2);
}

TEST_CASE("peer exchange fills the address book") {
    auto owner = key_for("px");
    MiniNet net;
    const auto a = net.add_full({owner});
    const auto b = net.add_full({owner});
    net.nodes[b].book->add({"10.1.1.1", 7000, 5, 0});
    net.nodes[b].book->add({"10.1.1.2", 7000, 6, 0});
    std::vector<wire::PeerAddress> learned;
    net.nodes[a].peer->set_peers_listener([&](const auto& list) { learned = list; });
    net.connect(a, b);
    net.pump();
    // Below min_peers, a asks for more.
    CHECK(net.count_sent(a, "get_peers") == 1);
    CHECK(net.nodes[a].book->find("10.1.1.1", 7000));
    CHECK(net.nodes[a].book->find("10.1.1.2", 7000));
    CHECK(learned.size() >= 2);
}

TEST_CASE("bootstrap order, stopping rule and failure accounting") {
    std::vector<std::string> dialed;
    std::set<std::string> live = {"manual-live", "book-live", "dns-b", "hard-1"};
    Dialer dial = [&](const PeerAddress& a) {
        dialed.push_back(a.host);
        return live.count(a.host) > 0;
    };
    Resolver resolve = [](const std::string& seed) -> std::vector<std::string> {
        if (seed == "seed.example") return {"dns-a", "dns-b", "dns-c"};
        return {};
    };

    SUBCASE("manual live node") {
        AddressBook book;
        BootstrapConfig config;
        config.manual = {{"manual-live", 1, 0, 0}};
        config.min_peers = 1;
        auto report = bootstrap(config, book, resolve, dial, 100).value();
        CHECK(report.connected == 1);
        CHECK(dialed == std::vector<std::string>{"manual-live"});
    }
    SUBCASE("all sources in order until min_peers") {
        AddressBook book;
        book.add({"book-live", 1, 10, 0});
        BootstrapConfig config;
        config.manual = {{"manual-live", 1, 0, 0}};
        config.dns_seeds = {"seed.example"};
        config.hard_coded = {{"hard-1", 1, 0, 0}, {"hard-2", 1, 0, 0}};
        auto report = bootstrap(config, book, resolve, dial, 100).value();
        CHECK(report.connected == 3);
        CHECK(dialed == std::vector<std::string>{"manual-live", "book-live", "dns-a", "dns-b"});
        CHECK(report.attempts[2].source == PeerSource::dns_seed);
        CHECK(book.find("dns-a", config.dns_port)->failures == 1);
    }
    SUBCASE("five stale book entries and one live") {
        AddressBook book;
        for (int i = 0; i < 5; ++i) book.add({"stale" + std::to_string(i), 1, 50, 0});
        book.add({"book-live", 1, 10, 0});
        BootstrapConfig config;
        auto report = bootstrap(config, book, resolve, dial, 100).value();
        CHECK(report.connected == 1);
        for (int i = 0; i < 5; ++i) CHECK(book.find("stale" + std::to_string(i), 1)->failures == 1);
        CHECK(book.find("book-live", 1)->failures == 0);
        CHECK(book.find("book-live", 1)->last_seen == 100);
    }
    SUBCASE("nothing reachable") {
        AddressBook book;
        BootstrapConfig config;
        config.hard_coded = {{"dead", 1, 0, 0}};
        BootstrapReport report;
        CHECK(bootstrap(config, book, resolve, dial, 100, &report).code() == Errc::bootstrap_failed);
        CHECK(report.attempts.size() == 1);
        AddressBook empty;
        CHECK(bootstrap({}, empty, resolve, dial, 100).code() == Errc::bootstrap_failed);
    }
}

TEST_CASE("backoff doubles and caps at five minutes") {
    Backoff b;
    std::vector<long> delays;
    for (int i = 0; i < 12; ++i) delays.push_back(b.next().count());
    CHECK(delays == std::vector<long>{1, 2, 4, 8, 16, 32, 64, 128, 256, 300, 300, 300});
    b.reset();
    CHECK(b.next().count() == 1);
}
