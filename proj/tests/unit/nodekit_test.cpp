#include "doctest.h"
#include "test_support.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/nodekit/node.hpp"

#include <httplib.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/x509.h>

#include <random>
#include <thread>

using namespace infnote;
using namespace infnote::nodekit;
using infnote::testing::build_chain;
using infnote::testing::chain_of;
using infnote::testing::key_for;
using infnote::testing::TempDir;
using chainstore::AppendOutcome;

namespace {

/// Posts whose encoded size is identical: fixed-width times, empty content.
std::vector<apps::ChainRecord> uniform_posts(const KeyPair& author, std::size_t n, std::uint64_t base = 1'000'000'000) {
    std::vector<apps::ChainRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(apps::make_post(author, "", std::nullopt, base + i).value());
    return out;
}

bool wait_until(const std::function<bool()>& done, std::chrono::milliseconds limit = std::chrono::seconds(30)) {
    const auto deadline = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < deadline) {
        if (done()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return done();
}

NodeConfig local_config(const std::filesystem::path& dir) {
    NodeConfig c;
    c.data_dir = dir;
    c.listen_host = "127.0.0.1";
    c.listen_port = 0;
    c.api_port = 0;
    c.peer.min_peers = 1;
    return c;
}

void seed_store(const std::filesystem::path& dir, const KeyPair& owner, const std::vector<Block>& blocks) {
    auto store = chainstore::ChainStore::open(dir).value();
    chainstore::ChainRegistryEntry e;
    e.chain_id = chain_of(owner);
    e.owner_pub = owner.public_key;
    e.label = "seeded";
    REQUIRE(store->follow_chain(e));
    for (const auto& b : blocks) REQUIRE(store->append_block(b));
}

}  // namespace

TEST_CASE("light cache keeps the most recent contiguous run") {
    auto owner = key_for("light");
    auto chain = build_chain(owner, 20);
    LightCache cache(8);
    REQUIRE(cache.follow(chain_of(owner), owner.public_key));
    for (const auto& b : chain) REQUIRE(cache.append(b).value() == AppendOutcome::appended);
    auto held = cache.blocks(chain_of(owner));
    REQUIRE(held.size() == 8);
    CHECK(held.front().height == 12);
    CHECK(held.back().height == 19);
    CHECK(cache.head_height(chain_of(owner)) == 19u);
    CHECK(cache.next_height(chain_of(owner)) == 20u);
    // Cached blocks re-verify and link pairwise.
    for (std::size_t i = 0; i < held.size(); ++i) {
        CHECK(chaincore::verify_block(held[i], owner.public_key));
        if (i > 0) CHECK(chaincore::validate_successor(held[i - 1], held[i]));
    }
    // Anything older than the ring is a no-op.
    CHECK(cache.append(chain[3]).value() == AppendOutcome::duplicate);
    CHECK(cache.append(chain[15]).value() == AppendOutcome::duplicate);
    CHECK_FALSE(cache.serves_sync());
    CHECK(cache.sync_from(chain_of(owner), 40) == 33u);
    CHECK(cache.sync_from(chain_of(owner), 22) == 20u);
}

TEST_CASE("light cache rejects bad blocks and restarts after gaps") {
    auto owner = key_for("light-bad");
    auto chain = build_chain(owner, 12);
    const auto id = chain_of(owner);
    LightCache cache(4);
    REQUIRE(cache.follow(id, owner.public_key));
    CHECK(cache.append(build_chain(key_for("other"), 2)[1]).code() == Errc::unknown_chain);
    REQUIRE(cache.append(chain[0]));
    REQUIRE(cache.append(chain[1]));

    auto forged = chain[2];
    forged.signature[5] ^= 1;
    CHECK(cache.append(forged).code() == Errc::bad_signature);
    CHECK(cache.head_height(id) == 1u);

    // A jump past a gap starts a new run instead of leaving a hole.
    REQUIRE(cache.append(chain[6]).value() == AppendOutcome::appended);
    auto held = cache.blocks(id);
    REQUIRE(held.size() == 1);
    CHECK(held[0].height == 6);
    REQUIRE(cache.append(chain[7]));
    CHECK(cache.blocks(id).size() == 2);

    // A successor whose time goes backwards fails validate_successor.
    chaincore::BlockDraft d{id, 8, chain[7].time - 1, chain[7].hash, Bytes{1}};
    CHECK(cache.append(chaincore::seal_block(d, owner).value()).code() == Errc::bad_time);
    CHECK(cache.follow(id, key_for("wrong").public_key).code() == Errc::bad_chain_id);
}

TEST_CASE("light cache detects equivocation inside its window") {
    auto owner = key_for("light-eq");
    auto chain = build_chain(owner, 6);
    const auto id = chain_of(owner);
    LightCache cache(8);
    REQUIRE(cache.follow(id, owner.public_key));
    for (const auto& b : chain) REQUIRE(cache.append(b));
    chaincore::BlockDraft d{id, 3, chain[2].time + 1, chain[2].hash, Bytes{'x'}};
    auto fork = chaincore::seal_block(d, owner).value();
    CHECK(cache.append(fork).value() == AppendOutcome::equivocation);
    CHECK(cache.is_banned(id));
    CHECK(cache.followed().empty());
    auto evidence = cache.ban_evidence(id);
    REQUIRE(evidence);
    CHECK(chaincore::check_evidence(*evidence, owner.public_key));
    CHECK(cache.append(chain[5]).code() == Errc::chain_banned);
    // History up to the fork stays readable.
    CHECK(cache.range(id, 0, 5).value().size() == 6);
}

TEST_CASE("light cache learns the owner key from genesis when not given one") {
    auto owner = key_for("light-genesis");
    auto chain = build_chain(owner, 3);
    const auto id = chain_of(owner);
    LightCache cache(8);
    REQUIRE(cache.follow(id));
    CHECK(cache.sync_from(id, 50) == 0u);
    CHECK(cache.append(chain[1]).code() == Errc::unknown_chain);
    auto impostor = chaincore::make_genesis(key_for("impostor"), "x", 1).value();
    impostor.chain_id = id;
    CHECK_FALSE(cache.append(impostor));
    REQUIRE(cache.append(chain[0]));
    CHECK(cache.owner(id) == owner.public_key);
    REQUIRE(cache.append(chain[1]));
    CHECK(cache.head_height(id) == 1u);
}

TEST_CASE("property: light cache never holds a gap") {
    auto owner = key_for("light-prop");
    auto chain = build_chain(owner, 60);
    const auto id = chain_of(owner);
    std::mt19937_64 rng(17);
    for (int round = 0; round < 50; ++round) {
        const std::size_t depth = 1 + rng() % 10;
        LightCache cache(depth);
        REQUIRE(cache.follow(id, owner.public_key));
        for (int step = 0; step < 120; ++step) {
            const auto& b = chain[rng() % chain.size()];
            auto r = cache.append(b);
            CHECK((r.ok() || r.code() == Errc::bad_height || r.code() == Errc::bad_prev_hash));
            auto held = cache.blocks(id);
            REQUIRE(held.size() <= depth);
            for (std::size_t i = 1; i < held.size(); ++i) REQUIRE(held[i].height == held[i - 1].height + 1);
        }
    }
}

TEST_CASE("assemble_block packs pooled records FIFO up to 1 MiB") {
    auto owner = key_for("producer");
    auto author = key_for("author");
    auto genesis = chaincore::make_genesis(owner, "p", 1000).value();
    const auto id = genesis.chain_id;

    SUBCASE("empty pool gives nothing to do") {
        peernet::RecordPool pool;
        auto out = assemble_block(pool, id, owner, genesis, 2000);
        REQUIRE(out);
        CHECK_FALSE(out->has_value());
    }

    SUBCASE("5000 uniform posts: first block is full, remainder stays pooled") {
        auto records = uniform_posts(author, 5000);
        const std::size_t size = apps::record_to_json(records[0]).size();
        for (const auto& r : records) REQUIRE(apps::record_to_json(r).size() == size);
        peernet::RecordPool pool(64u << 20);
        for (const auto& r : records) REQUIRE(pool.add(id, r));

        // 2 + n*size + (n-1) <= 1 MiB
        const std::size_t expected = (chaincore::kMaxPayloadBytes - 1) / (size + 1);
        AssembleReport report;
        auto out = assemble_block(pool, id, owner, genesis, 2000, {}, &report);
        REQUIRE(out);
        REQUIRE(out->has_value());
        const Block& b = **out;
        CHECK(report.included == expected);
        CHECK(pool.count(id) == 5000 - expected);
        CHECK(b.payload.size() <= chaincore::kMaxPayloadBytes);
        CHECK(b.payload.size() + size + 1 > chaincore::kMaxPayloadBytes);
        auto decoded = apps::decode_payload(b.payload).value();
        REQUIRE(decoded.size() == expected);
        for (std::size_t i = 0; i < decoded.size(); ++i) REQUIRE(decoded[i] == records[i]);
        CHECK(b.height == 1);
        CHECK(b.prev_hash == genesis.hash);
        CHECK(chaincore::verify_block(b, owner.public_key));
        CHECK(chaincore::validate_successor(genesis, b));

        // The next block continues where the first stopped.
        auto second = assemble_block(pool, id, owner, b, 2001).value().value();
        auto rest = apps::decode_payload(second.payload).value();
        CHECK(rest.front() == records[expected]);
    }

    SUBCASE("block time never goes backwards") {
        peernet::RecordPool pool;
        pool.add(id, uniform_posts(author, 1)[0]);
        auto b = assemble_block(pool, id, owner, genesis, 10).value().value();
        CHECK(b.time == genesis.time + 1);
        pool.add(id, uniform_posts(author, 1, 7)[0]);
        auto c = assemble_block(pool, id, owner, b, b.time + 50).value().value();
        CHECK(c.time == b.time + 50);
    }

    SUBCASE("owner filter drops records before bundling") {
        peernet::RecordPool pool;
        auto records = uniform_posts(author, 10);
        for (const auto& r : records) pool.add(id, r);
        AssembleReport report;
        auto b = assemble_block(pool, id, owner, genesis, 2000,
                                [](const apps::ChainRecord& r) { return r.post()->client_time % 2 == 0; }, &report)
                     .value()
                     .value();
        CHECK(report.included == 5);
        CHECK(report.filtered == 5);
        CHECK(pool.count(id) == 0);
        for (const auto& r : apps::decode_payload(b.payload).value()) CHECK(r.post()->client_time % 2 == 0);

        pool.add(id, records[1]);
        auto none = assemble_block(pool, id, owner, b, 3000, [](const apps::ChainRecord&) { return false; });
        REQUIRE(none);
        CHECK_FALSE(none->has_value());
    }

    SUBCASE("a record that does not fit waits for the next block") {
        peernet::RecordPool pool(64u << 20);
        auto small = uniform_posts(author, 1)[0];
        std::string big_text(apps::kMaxContentBytes, 'a');
        std::vector<apps::ChainRecord> bigs;
        for (int i = 0; i < 17; ++i) bigs.push_back(apps::make_post(author, big_text, std::nullopt, 5000 + i).value());
        for (const auto& r : bigs) pool.add(id, r);
        pool.add(id, small);
        auto b = assemble_block(pool, id, owner, genesis, 2000).value().value();
        auto got = apps::decode_payload(b.payload).value();
        // Each big post is just over 64 KiB encoded, so 15 fit and the 16th stops the block.
        CHECK(got.size() == 15);
        CHECK(pool.count(id) == 3);
        CHECK(pool.peek(id).back().record == small);
    }
}

TEST_CASE("producer: at most one block per height under concurrent calls") {
    auto owner = key_for("race-owner");
    TempDir dir;
    auto genesis = chaincore::make_genesis(owner, "race", 100).value();
    seed_store(dir.path(), owner, {genesis});
    auto store = chainstore::ChainStore::open(dir.path()).value();
    peernet::StoreLedger ledger(*store);
    BlockProducer producer(owner);

    constexpr int kThreads = 4;
    constexpr int kRounds = 25;
    std::vector<peernet::RecordPool> pools(kThreads);
    std::vector<std::vector<apps::ChainRecord>> records;
    for (int t = 0; t < kThreads; ++t) records.push_back(uniform_posts(key_for("race-author-" + std::to_string(t)), kRounds));

    std::mutex sealed_mutex;
    std::vector<Block> sealed;
    std::vector<std::thread> threads;
    for (int t = 0; t < kThreads; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < kRounds; ++i) {
                pools[t].add(producer.chain_id(), records[t][i]);
                auto out = producer.produce(ledger, pools[t], 100, 0, [&](const Block& b) {
                    {
                        std::lock_guard lock(sealed_mutex);
                        sealed.push_back(b);
                    }
                    std::this_thread::yield();
                    return ledger.append(b);
                });
                REQUIRE(out);
                REQUIRE(out->has_value());
            }
        });
    }
    for (auto& t : threads) t.join();

    std::set<std::uint64_t> heights;
    for (const auto& b : sealed) CHECK(heights.insert(b.height).second);
    CHECK_FALSE(ledger.is_banned(producer.chain_id()));
    CHECK(store->chain_size(producer.chain_id()).value() == sealed.size() + 1);
    CHECK(store->verify_chain(producer.chain_id()).value() == 0);
    CHECK(producer.produced() == sealed.size());
    CHECK(sealed.size() == kThreads * kRounds);
}

TEST_CASE("producer trigger: interval or pool fill") {
    auto owner = key_for("trigger");
    BlockProducer producer(owner, ProducerConfig{std::chrono::milliseconds(10'000), 0.9});
    peernet::RecordPool pool(64u << 20);
    CHECK_FALSE(producer.due(pool, 1'000'000));
    pool.add(producer.chain_id(), uniform_posts(key_for("a"), 1)[0]);
    CHECK(producer.due(pool, 10'000));
    CHECK_FALSE(producer.due(pool, 9'999));

    auto records = uniform_posts(key_for("b"), 3800);
    for (const auto& r : records) pool.add(producer.chain_id(), r);
    const double fill = static_cast<double>(pool.bytes(producer.chain_id())) / chaincore::kMaxPayloadBytes;
    CHECK(fill >= 0.9);
    CHECK(producer.due(pool, 0));
}

TEST_CASE("producer needs a genesis") {
    auto owner = key_for("no-genesis");
    TempDir dir;
    seed_store(dir.path(), owner, {});
    auto store = chainstore::ChainStore::open(dir.path()).value();
    peernet::StoreLedger ledger(*store);
    BlockProducer producer(owner);
    peernet::RecordPool pool;
    CHECK(producer.produce(ledger, pool, 1).code() == Errc::not_found);
}

TEST_CASE("config: file values, env overrides, validation") {
    auto owner = key_for("cfg");
    const std::string text = "# node\n"
                             "kind = full\n"
                             "listen_port = 9000\n"
                             "min_peers = 5\n"
                             "seeds = [\"10.0.0.1:7420\", \"[::1]:7000\"]\n"
                             "dns_seeds = seed.example.org, seed2.example.org\n"
                             "owner_key = " +
                             to_hex(owner.private_key) +
                             "\n"
                             "block_interval = 2.5\n"
                             "follow = " +
                             chain_of(owner).hex() + ":" + to_hex(owner.public_key) + "\n";
    auto no_env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
    auto cfg = parse_config(text, no_env).value();
    CHECK(cfg.kind == NodeKind::full);
    CHECK(cfg.listen_port == 9000);
    CHECK(cfg.peer.min_peers == 5);
    REQUIRE(cfg.seeds.size() == 2);
    CHECK(cfg.seeds[1].host == "::1");
    CHECK(cfg.seeds[1].port == 7000);
    CHECK(cfg.dns_seeds == std::vector<std::string>{"seed.example.org", "seed2.example.org"});
    REQUIRE(cfg.owner_keys);
    CHECK(cfg.owner_keys->public_key == owner.public_key);
    CHECK(cfg.producer.block_interval == std::chrono::milliseconds(2500));
    REQUIRE(cfg.follow.size() == 1);
    CHECK(cfg.follow[0].owner_pub == owner.public_key);
    CHECK(cfg.validate());

    auto env = [](const std::string& name) -> std::optional<std::string> {
        if (name == "INFNOTE_LISTEN_PORT") return "9100";
        if (name == "INFNOTE_KIND") return "light";
        return std::nullopt;
    };
    auto overridden = parse_config(text, env).value();
    CHECK(overridden.listen_port == 9100);
    CHECK(overridden.kind == NodeKind::light);
    CHECK(overridden.validate().code() == Errc::invalid_argument);  // light with owner keys

    CHECK(parse_config("bogus = 1", no_env).code() == Errc::invalid_argument);
    CHECK(parse_config("listen_port = 70000", no_env).code() == Errc::invalid_argument);
    CHECK(parse_config("just words", no_env).code() == Errc::invalid_argument);
    NodeConfig zero;
    zero.cache_depth = 0;
    CHECK(zero.validate().code() == Errc::invalid_argument);

    TempDir dir;
    auto key_path = dir.path() / "owner.key";
    REQUIRE(write_key_file(key_path, owner));
    CHECK(read_key_file(key_path).value().public_key == owner.public_key);
    auto with_env = [&](const std::string& name) -> std::optional<std::string> {
        if (name == "INFNOTE_CONFIG") return (dir.path() / "x.toml").string();
        return std::nullopt;
    };
    CHECK(resolve_config_path(std::filesystem::path("a.toml"), with_env) == std::filesystem::path("a.toml"));
    CHECK(resolve_config_path(std::nullopt, with_env) == dir.path() / "x.toml");
}

TEST_CASE("api: reads, submissions and errors") {
    auto owner = key_for("api-owner");
    auto author = key_for("api-author");
    TempDir dir;
    auto chain = build_chain(owner, 10);
    seed_store(dir.path(), owner, chain);
    auto store = chainstore::ChainStore::open(dir.path()).value();
    const auto id = chain_of(owner);

    peernet::RecordPool pool;
    std::vector<nlohmann::json> submitted;
    ApiService api(
        *store,
        [&](const ChainId& c, const std::vector<nlohmann::json>& records) {
            peernet::SubmitOutcome out;
            for (const auto& r : records) {
                submitted.push_back(r);
                if (pool.add(c, apps::record_from_json(r).value()))
                    ++out.accepted;
                else
                    ++out.duplicates;
            }
            return out;
        },
        [] { return nlohmann::json{{"kind", "full"}}; });
    auto get = [&](std::string path, std::map<std::string, std::string> q = {}) {
        return api.handle({"GET", std::move(path), std::move(q), ""});
    };
    const std::string base = "/chains/" + id.hex();

    auto head = get(base + "/head");
    REQUIRE(head.status == 200);
    CHECK(head.body["height"] == 9);
    // Served bytes equal stored bytes.
    CHECK(head.body["raw"] == chaincore::block_to_hex(chain[9]));
    CHECK(head.body["hash"] == to_hex(chain[9].hash));
    CHECK(get(base + "/blocks/0").body["prev_hash"] == std::string(64, '0'));
    CHECK(get(base + "/blocks/10").status == 404);
    CHECK(get(base + "/blocks/x").status == 400);
    CHECK(get("/chains/" + std::string(64, 'a') + "/head").status == 404);
    CHECK(get("/chains/nothex/head").status == 400);
    CHECK(get("/nope").status == 404);
    CHECK(get("/status").body["kind"] == "full");
    auto list = get("/chains");
    REQUIRE(list.body["chains"].size() == 1);
    CHECK(list.body["chains"][0]["height"] == 9);

    auto post = apps::make_post(author, "hello", std::nullopt, 42).value();
    auto accepted = api.handle({"POST", base + "/records", {}, apps::record_to_json(post)});
    CHECK(accepted.status == 202);
    CHECK(accepted.body["status"] == "accepted");
    CHECK(pool.count(id) == 1);
    CHECK(api.handle({"POST", base + "/records", {}, apps::record_to_json(post)}).body["status"] == "duplicate");

    auto forged = post;
    forged.author_sig[10] ^= 1;
    auto bad = api.handle({"POST", base + "/records", {}, apps::record_to_json(forged)});
    CHECK(bad.status == 422);
    CHECK(bad.body["error"]["code"] == "bad-signature");
    CHECK(api.handle({"POST", base + "/records", {}, "{not json"}).status == 400);
    CHECK(api.handle({"POST", base + "/records", {}, R"({"kind":"post"})"}).status == 400);
    CHECK(pool.count(id) == 1);
    CHECK(api.handle({"POST", "/chains/" + std::string(64, 'b') + "/records", {}, apps::record_to_json(post)}).status ==
          404);
}

TEST_CASE("api: posts and names follow the chain") {
    auto owner = key_for("api-forum");
    auto alice = key_for("alice");
    TempDir dir;
    std::vector<Block> chain{chaincore::make_genesis(owner, "forum", 10).value()};
    std::vector<apps::ChainRecord> posts;
    for (int i = 0; i < 5; ++i) posts.push_back(apps::make_post(alice, "p" + std::to_string(i), std::nullopt, i).value());
    std::vector<apps::ChainRecord> first(posts.begin(), posts.begin() + 3);
    first.push_back(apps::make_identity(alice, "alice").value());
    auto append = [&](const std::vector<apps::ChainRecord>& records) {
        const auto& prev = chain.back();
        chain.push_back(chaincore::seal_block(
                            {prev.chain_id, prev.height + 1, prev.time + 1, prev.hash, apps::encode_payload(records).value()},
                            owner)
                            .value());
    };
    append(first);
    seed_store(dir.path(), owner, chain);
    auto store = chainstore::ChainStore::open(dir.path()).value();
    ApiService api(*store, {}, {});
    const std::string base = "/chains/" + chain_of(owner).hex();

    auto page = api.handle({"GET", base + "/posts", {{"limit", "2"}}, ""});
    REQUIRE(page.status == 200);
    REQUIRE(page.body["posts"].size() == 2);
    CHECK(page.body["more"] == true);
    CHECK(page.body["posts"][0]["content"] == "p0");
    const std::string after = page.body["posts"][1]["post_id"];
    auto next = api.handle({"GET", base + "/posts", {{"after", after}}, ""});
    REQUIRE(next.body["posts"].size() == 1);
    CHECK(next.body["posts"][0]["content"] == "p2");
    CHECK(next.body["more"] == false);
    CHECK(api.handle({"GET", base + "/posts", {{"after", std::string(64, 'c')}}, ""}).status == 404);

    auto name = api.handle({"GET", base + "/names/alice", {}, ""});
    REQUIRE(name.status == 200);
    CHECK(name.body["pub"] == to_hex(alice.public_key));
    CHECK(api.handle({"GET", base + "/names/bob", {}, ""}).status == 404);

    // New blocks show up without rebuilding the projection.
    append({posts[3], posts[4]});
    REQUIRE(store->append_block(chain.back()));
    auto later = api.handle({"GET", base + "/posts", {{"after", after}}, ""});
    CHECK(later.body["posts"].size() == 3);
    CHECK(later.body["height"] == 2);
}

TEST_CASE("api server speaks HTTP with CORS") {
    auto owner = key_for("api-http");
    TempDir dir;
    auto chain = build_chain(owner, 3);
    seed_store(dir.path(), owner, chain);
    auto store = chainstore::ChainStore::open(dir.path()).value();
    ApiService api(*store, {}, [] { return nlohmann::json{{"kind", "full"}}; });
    ApiServer server(api);
    REQUIRE(server.start("127.0.0.1", 0));
    httplib::Client client("127.0.0.1", server.port());
    auto res = client.Get("/chains/" + chain_of(owner).hex() + "/head");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(nlohmann::json::parse(res->body)["height"] == 2);
    auto missing = client.Get("/chains/" + chain_of(owner).hex() + "/blocks/99");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto preflight = client.Options("/chains");
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
    server.stop();
}

TEST_CASE("live: a second full node converges to a 50-block chain") {
    auto owner = key_for("live-owner");
    auto chain = build_chain(owner, 50);
    TempDir a_dir;
    TempDir b_dir;
    seed_store(a_dir.path(), owner, chain);

    auto a = run_node(local_config(a_dir.path())).value();
    auto b_cfg = local_config(b_dir.path());
    b_cfg.follow.push_back({chain_of(owner), owner.public_key});
    b_cfg.seeds.push_back({"127.0.0.1", a->p2p_port(), 0, 0});
    auto b = run_node(b_cfg).value();

    const auto id = chain_of(owner);
    REQUIRE(wait_until([&] { return b->status().chains[id] == std::optional<std::uint64_t>(49); }));
    for (std::uint64_t h = 0; h < 50; ++h) {
        auto x = a->store()->get_block(id, h).value();
        auto y = b->store()->get_block(id, h).value();
        REQUIRE(x);
        REQUIRE(y);
        REQUIRE(chaincore::serialize_block(*x) == chaincore::serialize_block(*y));
    }
    CHECK(a->status().peers == 1);
    CHECK(status_to_json(b->status())["chains"][id.hex()] == 49);

    // The API serves what the store holds.
    httplib::Client client("127.0.0.1", *b->api_port());
    auto res = client.Get("/chains/" + id.hex() + "/blocks/17");
    REQUIRE(res);
    CHECK(nlohmann::json::parse(res->body)["raw"] == chaincore::block_to_hex(chain[17]));
    auto st = client.Get("/status");
    REQUIRE(st);
    CHECK(nlohmann::json::parse(st->body)["peers"] == 1);
    b->stop();
    a->stop();
}

TEST_CASE("live: owner produces, full and light peers follow") {
    auto owner = key_for("live-producer");
    const auto id = chain_of(owner);
    TempDir o_dir;
    TempDir f_dir;
    TempDir l_dir;

    auto o_cfg = local_config(o_dir.path());
    o_cfg.owner_keys = owner;
    o_cfg.producer.block_interval = std::chrono::milliseconds(200);
    auto o = run_node(o_cfg).value();
    REQUIRE(o->store()->chain_size(id).value() == 1);

    auto f_cfg = local_config(f_dir.path());
    f_cfg.follow.push_back({id, owner.public_key});
    f_cfg.seeds.push_back({"127.0.0.1", o->p2p_port(), 0, 0});
    auto f = run_node(f_cfg).value();

    auto l_cfg = local_config(l_dir.path());
    l_cfg.kind = NodeKind::light;
    l_cfg.serve_api = false;
    l_cfg.cache_depth = 8;
    l_cfg.follow.push_back({id, owner.public_key});
    l_cfg.seeds.push_back({"127.0.0.1", f->p2p_port(), 0, 0});
    auto l = run_node(l_cfg).value();
    CHECK_FALSE(l->api_port());

    REQUIRE(wait_until([&] { return f->status().peers >= 2 && o->status().peers >= 1; }));

    // Records enter at the full node and reach the owner's pool by gossip.
    auto author = key_for("live-author");
    for (int i = 0; i < 20; ++i) {
        auto post = apps::make_post(author, "post " + std::to_string(i), std::nullopt, 100 + i).value();
        auto out = f->submit_records(id, {apps::record_to_json_value(post)});
        REQUIRE(out.accepted == 1);
        // One block per record so the light cache sees 20 blocks.
        REQUIRE(wait_until([&] { return o->store()->chain_size(id).value() == static_cast<std::uint64_t>(i + 2); }));
    }
    REQUIRE(wait_until([&] { return f->store()->chain_size(id).value() == 21; }));
    REQUIRE(wait_until([&] { return l->cache()->head_height(id) == std::optional<std::uint64_t>(20); }));
    auto held = l->cache()->blocks(id);
    REQUIRE(held.size() == 8);
    CHECK(held.front().height == 13);
    CHECK(held.back().height == 20);
    CHECK(o->status().blocks_produced == 20);
    l->stop();
    f->stop();
    o->stop();
}

TEST_CASE("live: light node with cache depth 8 fed 20 blocks holds 12..19") {
    auto owner = key_for("live-light");
    auto chain = build_chain(owner, 20);
    const auto id = chain_of(owner);
    TempDir f_dir;
    TempDir l_dir;
    seed_store(f_dir.path(), owner, chain);
    auto f = run_node(local_config(f_dir.path())).value();
    auto l_cfg = local_config(l_dir.path());
    l_cfg.kind = NodeKind::light;
    l_cfg.serve_api = false;
    l_cfg.cache_depth = 8;
    l_cfg.follow.push_back({id, owner.public_key});
    auto l = run_node(l_cfg).value();
    REQUIRE(l->connect({"127.0.0.1", f->p2p_port(), 0, 0}));
    REQUIRE(wait_until([&] { return l->cache()->head_height(id) == std::optional<std::uint64_t>(19); }));
    auto held = l->cache()->blocks(id);
    REQUIRE(held.size() == 8);
    CHECK(held.front().height == 12);
    // The light node asked only for the window it can hold.
    CHECK(l->peer_stats().blocks_appended == 8);
}

TEST_CASE("live: sessions require the infnote/1 subprotocol") {
    TempDir dir;
    auto n = run_node(local_config(dir.path())).value();
    namespace net = boost::asio;
    namespace beast = boost::beast;
    net::io_context ioc;
    net::ip::tcp::socket socket(ioc);
    socket.connect({net::ip::make_address("127.0.0.1"), n->p2p_port()});
    beast::websocket::stream<net::ip::tcp::socket> ws(std::move(socket));
    beast::error_code ec;
    ws.handshake("127.0.0.1", "/", ec);
    CHECK(ec);

    net::ip::tcp::socket again(ioc);
    again.connect({net::ip::make_address("127.0.0.1"), n->p2p_port()});
    beast::websocket::stream<net::ip::tcp::socket> ok(std::move(again));
    ok.set_option(beast::websocket::stream_base::decorator([](beast::websocket::request_type& req) {
        req.set(beast::http::field::sec_websocket_protocol, "infnote/1");
    }));
    beast::websocket::response_type res;
    ok.handshake(res, "127.0.0.1", "/", ec);
    REQUIRE_FALSE(ec);
    CHECK(std::string(res[beast::http::field::sec_websocket_protocol]) == "infnote/1");
    // Anything before hello is a protocol violation; a bad frame gets a structured error.
    ok.text(true);
    ok.write(net::buffer(std::string("not json")));
    beast::flat_buffer buffer;
    ok.read(buffer);
    auto reply = wire::decode_message(beast::buffers_to_string(buffer.data())).value();
    REQUIRE(std::holds_alternative<wire::ErrorMessage>(reply));
    CHECK(std::get<wire::ErrorMessage>(reply).code == "bad-json");
}

TEST_CASE("live: bind failure is reported") {
    TempDir a_dir;
    TempDir b_dir;
    auto a = run_node(local_config(a_dir.path())).value();
    auto cfg = local_config(b_dir.path());
    cfg.listen_port = a->p2p_port();
    auto b = run_node(cfg);
    CHECK(b.code() == Errc::bind_failed);
}

namespace {

/// Minimal no-auth SOCKS5 relay: serves one CONNECT and records the requested target.
class Socks5Relay {
public:
    Socks5Relay() : acceptor_(io_, {boost::asio::ip::make_address("127.0.0.1"), 0}) {
        worker_ = std::thread([this] { serve(); });
    }
    ~Socks5Relay() {
        boost::system::error_code ec;
        acceptor_.close(ec);
        client_.close(ec);
        upstream_.close(ec);
        if (worker_.joinable()) worker_.join();
        if (back_.joinable()) back_.join();
    }
    std::uint16_t port() const { return acceptor_.local_endpoint().port(); }
    std::string target() {
        std::lock_guard lock(mu_);
        return target_;
    }

private:
    using tcp = boost::asio::ip::tcp;

    void serve() {
        boost::system::error_code ec;
        acceptor_.accept(client_, ec);
        if (ec) return;
        std::array<std::uint8_t, 3> greeting{};
        boost::asio::read(client_, boost::asio::buffer(greeting), ec);
        if (ec || greeting[0] != 0x05) return;
        const std::array<std::uint8_t, 2> choice{0x05, 0x00};
        boost::asio::write(client_, boost::asio::buffer(choice), ec);
        std::array<std::uint8_t, 5> head{};
        boost::asio::read(client_, boost::asio::buffer(head), ec);
        if (ec || head[1] != 0x01 || head[3] != 0x03) return;
        std::string host(head[4], '\0');
        std::array<std::uint8_t, 2> port{};
        boost::asio::read(client_, boost::asio::buffer(host), ec);
        boost::asio::read(client_, boost::asio::buffer(port), ec);
        const std::uint16_t p = static_cast<std::uint16_t>(port[0] << 8 | port[1]);
        {
            std::lock_guard lock(mu_);
            target_ = host + ":" + std::to_string(p);
        }
        upstream_.connect({boost::asio::ip::make_address(host), p}, ec);
        const std::array<std::uint8_t, 10> reply{0x05, ec ? std::uint8_t{0x05} : std::uint8_t{0x00}, 0x00, 0x01};
        boost::asio::write(client_, boost::asio::buffer(reply), ec);
        if (ec || !upstream_.is_open()) return;
        back_ = std::thread([this] { pump(upstream_, client_); });
        pump(client_, upstream_);
    }

    static void pump(tcp::socket& from, tcp::socket& to) {
        std::array<char, 16384> buf{};
        boost::system::error_code ec;
        for (;;) {
            const std::size_t n = from.read_some(boost::asio::buffer(buf), ec);
            if (ec) break;
            boost::asio::write(to, boost::asio::buffer(buf.data(), n), ec);
            if (ec) break;
        }
        to.shutdown(tcp::socket::shutdown_both, ec);
    }

    boost::asio::io_context io_;
    tcp::acceptor acceptor_;
    tcp::socket client_{io_};
    tcp::socket upstream_{io_};
    std::thread worker_;
    std::thread back_;
    std::mutex mu_;
    std::string target_;
};

}  // namespace

TEST_CASE("live: outbound dials go through a SOCKS5 proxy") {
    auto owner = key_for("socks-owner");
    auto chain = build_chain(owner, 12);
    TempDir a_dir;
    TempDir b_dir;
    seed_store(a_dir.path(), owner, chain);
    auto a = run_node(local_config(a_dir.path())).value();

    Socks5Relay proxy;
    auto b_cfg = local_config(b_dir.path());
    b_cfg.follow.push_back({chain_of(owner), owner.public_key});
    b_cfg.seeds.push_back({"127.0.0.1", a->p2p_port(), 0, 0});
    b_cfg.socks_proxy = "127.0.0.1:" + std::to_string(proxy.port());
    auto b = run_node(b_cfg).value();

    const auto id = chain_of(owner);
    REQUIRE(wait_until([&] { return b->status().chains[id] == std::optional<std::uint64_t>(11); }));
    CHECK(proxy.target() == "127.0.0.1:" + std::to_string(a->p2p_port()));
    b->stop();
    a->stop();
}

namespace {

/// Self-signed P-256 certificate and key written as PEM files.
void write_self_signed(const std::filesystem::path& cert, const std::filesystem::path& key) {
    EVP_PKEY* pkey = EVP_EC_gen("P-256");
    REQUIRE(pkey);
    X509* x = X509_new();
    ASN1_INTEGER_set(X509_get_serialNumber(x), 1);
    X509_gmtime_adj(X509_getm_notBefore(x), 0);
    X509_gmtime_adj(X509_getm_notAfter(x), 3600);
    X509_set_pubkey(x, pkey);
    X509_NAME* name = X509_get_subject_name(x);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC, reinterpret_cast<const unsigned char*>("localhost"), -1, -1, 0);
    X509_set_issuer_name(x, name);
    REQUIRE(X509_sign(x, pkey, EVP_sha256()) > 0);
    FILE* f = std::fopen(cert.c_str(), "wb");
    REQUIRE(f);
    PEM_write_X509(f, x);
    std::fclose(f);
    f = std::fopen(key.c_str(), "wb");
    REQUIRE(f);
    PEM_write_PrivateKey(f, pkey, nullptr, nullptr, 0, nullptr, nullptr);
    std::fclose(f);
    X509_free(x);
    EVP_PKEY_free(pkey);
}

}  // namespace

TEST_CASE("live: wss and plain peers share one listener") {
    auto owner = key_for("tls-owner");
    auto chain = build_chain(owner, 10);
    TempDir a_dir;
    TempDir b_dir;
    TempDir c_dir;
    seed_store(a_dir.path(), owner, chain);
    auto a_cfg = local_config(a_dir.path());
    a_cfg.tls_cert = a_dir.path() / "cert.pem";
    a_cfg.tls_key = a_dir.path() / "key.pem";
    write_self_signed(*a_cfg.tls_cert, *a_cfg.tls_key);
    auto a = run_node(a_cfg).value();
    const auto id = chain_of(owner);

    auto follower = [&](const std::filesystem::path& dir, bool tls) {
        auto cfg = local_config(dir);
        cfg.follow.push_back({id, owner.public_key});
        cfg.seeds.push_back({"127.0.0.1", a->p2p_port(), 0, 0});
        cfg.tls_outbound = tls;
        cfg.serve_api = false;
        return run_node(cfg).value();
    };
    auto secure = follower(b_dir.path(), true);
    auto plain = follower(c_dir.path(), false);
    REQUIRE(wait_until([&] { return secure->status().chains[id] == std::optional<std::uint64_t>(9); }));
    REQUIRE(wait_until([&] { return plain->status().chains[id] == std::optional<std::uint64_t>(9); }));
    CHECK(a->status().peers == 2);
    secure->stop();
    plain->stop();

    // A listener without a certificate drops TLS clients.
    TempDir d_dir;
    TempDir e_dir;
    auto bare = run_node(local_config(d_dir.path())).value();
    auto e_cfg = local_config(e_dir.path());
    e_cfg.tls_outbound = true;
    e_cfg.serve_api = false;
    auto e = run_node(e_cfg).value();
    CHECK_FALSE(e->connect({"127.0.0.1", bare->p2p_port(), 0, 0}));
    e->stop();
    bare->stop();
    a->stop();
}

TEST_CASE("tls: unreadable certificate fails at start") {
    TempDir dir;
    auto cfg = local_config(dir.path());
    cfg.tls_cert = dir.path() / "missing.pem";
    cfg.tls_key = dir.path() / "missing.key";
    auto node = run_node(cfg);
    REQUIRE_FALSE(node);
    CHECK(node.error().code == Errc::invalid_argument);
}
