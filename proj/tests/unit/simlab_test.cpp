#include "doctest.h"
#include "test_support.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/apps/projection.hpp"
#include "infnote/nodekit/node.hpp"
#include "infnote/simlab/simulation.hpp"
#include "infnote/simlab/throughput.hpp"
#include "infnote/simlab/workload.hpp"

#include <chrono>
#include <random>
#include <thread>

using namespace infnote;
using namespace infnote::simlab;
using infnote::testing::TempDir;

namespace {

constexpr std::size_t kMiB = 1u << 20;

/// Closed-form single-hop time in virtual microseconds.
std::uint64_t hop_us(const LinkParams& link, std::size_t bytes) {
    return latency_us(link) + serialization_us(link, bytes);
}

Bytes text_payload(const std::string& text) { return Bytes(text.begin(), text.end()); }

}  // namespace

TEST_CASE("profiles are calibrated to the published per-hop times") {
    auto wan = profile("paper-wan").value();
    CHECK(hop_ms(wan, kMiB) == doctest::Approx(1460.0).epsilon(1e-9));
    auto star = profile("paper-star").value();
    CHECK(hop_ms(star, kMiB) == doctest::Approx(650.0).epsilon(1e-9));
    CHECK_FALSE(profile("nope"));
    CHECK(hop_us(wan, kMiB) == 1'460'000);
    CHECK(hop_us(star, kMiB) == 650'000);
}

TEST_CASE("topology builders") {
    LinkParams link{10, 1e6};
    auto star = build_topology(TopologyKind::star, 10, link).value();
    CHECK(star.links.size() == 9);
    for (const auto& l : star.links) CHECK((l.a == 0 || l.b == 0));
    CHECK(star.owner == 1);
    CHECK(star.diameter() == 2);

    auto path = build_topology(TopologyKind::linear, 11, link).value();
    CHECK(path.diameter() == 10);
    CHECK(path.owner == 0);
    CHECK(path.hops_from(0).back() == 10);

    CHECK(build_topology(TopologyKind::star, 1, link).error().code == Errc::invalid_topology);
    CHECK(build_topology(TopologyKind::linear, 0, link).error().code == Errc::invalid_topology);
    CHECK(build_topology(TopologyKind::custom, 4, link).error().code == Errc::invalid_topology);

    Topology split;
    for (std::uint32_t i = 0; i < 4; ++i) split.nodes.push_back({i, NodeKind::full});
    split.links = {{0, 1, link}, {2, 3, link}};
    CHECK(split.validate().error().code == Errc::invalid_topology);
    split.links.push_back({1, 2, link});
    CHECK(split.validate());
    split.links.push_back({2, 1, link});
    CHECK_FALSE(split.validate());
    split.links.pop_back();
    split.links.push_back({0, 3, LinkParams{0, 1e6}});
    CHECK_FALSE(split.validate());
    split.links.pop_back();
    split.nodes[0].kind = NodeKind::light;
    CHECK_FALSE(split.validate());

    auto light = build_topology(TopologyKind::star, 5, link, {3, 4}).value();
    CHECK(light.nodes[3].kind == NodeKind::light);
    CHECK(light.nodes[1].kind == NodeKind::full);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto r = random_connected(2 + seed % 11, seed, link, seed % 5).value();
        CHECK(r.validate());
        CHECK(r == random_connected(2 + seed % 11, seed, link, seed % 5).value());
    }
    auto mesh = build_mesh(6, link).value();
    CHECK(mesh.links.size() == 15);
    CHECK(mesh.diameter() == 1);
}

TEST_CASE("event loop orders by time then insertion") {
    EventLoop loop;
    std::vector<int> seen;
    loop.at(20, [&] { seen.push_back(3); });
    loop.at(10, [&] { seen.push_back(1); });
    loop.at(10, [&] {
        seen.push_back(2);
        loop.at(5, [&] { seen.push_back(4); });  // past times clamp to now
    });
    loop.run_until(15);
    CHECK(loop.now_us() == 15);
    CHECK(seen == std::vector<int>{1, 2, 4});
    loop.run();
    CHECK(seen == std::vector<int>{1, 2, 4, 3});
    CHECK(loop.empty());
}

TEST_CASE("linear path: every node receives at its hop count times the per-hop cost") {
    const auto link = profile("paper-wan").value();
    for (std::size_t n : {2u, 4u, 7u}) {
        auto topo = build_topology(TopologyKind::linear, n, link).value();
        Workload w;
        w.block_size_bytes = 256 * 1024;
        auto result = run_scenario(topo, w, 3, "paper-wan").value();
        REQUIRE(result.blocks.size() == 1);
        const auto& b = result.blocks[0];
        CHECK(b.bytes == w.block_size_bytes);
        const auto T = hop_us(link, w.block_size_bytes);
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(b.receipt_us[i]);
            CHECK(*b.receipt_us[i] - b.produced_us == i * T);
        }
        CHECK(result.max_latency_ms == static_cast<double>((n - 1) * T) / 1000.0);
        CHECK(result.complete);
    }
}

TEST_CASE("star: centre at one hop, other leaves at two") {
    const auto link = profile("paper-star").value();
    auto topo = build_topology(TopologyKind::star, 10, link).value();
    Workload w;
    w.block_count = 2;
    auto result = run_scenario(topo, w, 1, "paper-star").value();
    const auto T = hop_us(link, kMiB);
    CHECK(T == 650'000);
    for (const auto& b : result.blocks) {
        CHECK(*b.receipt_us[0] - b.produced_us == T);
        CHECK(*b.receipt_us[1] == b.produced_us);
        for (std::size_t i = 2; i < 10; ++i) CHECK(*b.receipt_us[i] - b.produced_us == 2 * T);
        CHECK(b.max_latency_ms == 1300.0);
        CHECK(b.mean_latency_ms == doctest::Approx((650.0 + 8 * 1300.0) / 9));
    }
    CHECK(result.mean_confirm_ms == 1300.0);
}

TEST_CASE("same seed gives a byte-identical result") {
    auto topo = random_connected(9, 77, LinkParams{40, 2e6}, 6).value();
    Workload w;
    w.block_size_bytes = 20'000;
    w.block_count = 6;
    w.block_interval_ms = 30;  // overlapping propagation
    auto a = run_scenario(topo, w, 5, "custom").value();
    auto b = run_scenario(topo, w, 5, "custom").value();
    CHECK(result_to_json(a).dump() == result_to_json(b).dump());
    CHECK(result_to_csv(a) == result_to_csv(b));
    CHECK(a.complete);
    for (const auto& blk : a.blocks)
        for (const auto& r : blk.receipt_ms) CHECK(*r >= blk.produced_ms);
}

TEST_CASE("raising a link latency never makes a receipt earlier") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 3 + rng() % 8;
        auto topo = random_connected(n, rng(), LinkParams{50, 1e6}, rng() % 4).value();
        Workload w;
        w.block_size_bytes = 50'000;
        w.block_count = 2;
        // Spaced far enough apart that blocks never share a link.
        w.block_interval_ms = 100'000;
        auto base = run_scenario(topo, w, 9).value();
        auto slower = topo;
        auto& l = slower.links[rng() % slower.links.size()];
        l.params.latency_ms += 1 + static_cast<double>(rng() % 500);
        auto after = run_scenario(slower, w, 9).value();
        for (std::size_t b = 0; b < base.blocks.size(); ++b)
            for (std::size_t i = 0; i < n; ++i)
                CHECK(*after.blocks[b].receipt_us[i] - after.blocks[b].produced_us >=
                      *base.blocks[b].receipt_us[i] - base.blocks[b].produced_us);
    }
}

TEST_CASE("inject bypasses the sender's ledger") {
    auto topo = build_topology(TopologyKind::linear, 3, LinkParams{5, 1e7}).value();
    auto sim = Simulation::create(topo).value();
    sim->loop().run_until(100'000);
    auto block = sim->seal_next(text_payload("side")).value();
    REQUIRE(sim->inject(0, 1, block));
    CHECK(sim->inject(0, 2, block).error().code == Errc::invalid_argument);
    sim->loop().run();
    CHECK_FALSE(sim->receipt_us(0, block.hash));
    CHECK(sim->receipt_us(1, block.hash));
    CHECK(sim->receipt_us(2, block.hash));
}

TEST_CASE("flooding stops once every node holds the block") {
    auto topo = random_connected(10, 4, LinkParams{20, 1e6}, 8).value();
    auto sim = Simulation::create(topo).value();
    sim->loop().run_until(1'000'000);
    auto block = sim->produce(text_payload("hello")).value();
    sim->loop().run();
    CHECK(sim->loop().empty());
    for (std::uint32_t i = 0; i < topo.nodes.size(); ++i) {
        CHECK(sim->receipt_us(i, block.hash));
        // At most one copy per neighbour.
        CHECK(sim->new_block_sends(i, block.hash) <= topo.neighbours(i).size());
    }
}

TEST_CASE("light nodes relay and cache in simulation") {
    auto topo = build_topology(TopologyKind::linear, 5, LinkParams{5, 1e7}, {2}).value();
    SimOptions opts;
    opts.light_cache_depth = 4;
    auto sim = Simulation::create(topo, opts).value();
    sim->loop().run_until(200'000);
    std::vector<Block> made;
    for (int i = 0; i < 10; ++i) {
        made.push_back(sim->produce(text_payload("b" + std::to_string(i))).value());
        sim->loop().run();
    }
    for (std::uint32_t i = 0; i < 5; ++i) CHECK(sim->receipt_us(i, made.back().hash));
    REQUIRE(sim->cache(2));
    CHECK(sim->cache(2)->blocks(sim->chain_id()).size() == 4);
    CHECK(sim->store(4)->chain_size(sim->chain_id()).value() == 11);
}

TEST_CASE("blocks produced during the handshake are recovered by sync") {
    // Hellos already carried height 0; the next block exposes the gap.
    auto topo = build_topology(TopologyKind::linear, 3, LinkParams{5, 1e7}).value();
    auto sim = Simulation::create(topo).value();
    std::vector<Block> made;
    for (int i = 0; i < 70; ++i) made.push_back(sim->produce(text_payload("early-" + std::to_string(i))).value());
    sim->loop().run();
    CHECK(sim->store(1)->chain_size(sim->chain_id()).value() == 1);
    sim->produce(text_payload("late")).value();
    sim->loop().run();
    for (std::uint32_t i = 1; i < 3; ++i)
        CHECK(sim->store(i)->chain_size(sim->chain_id()).value() == 72);
}

TEST_CASE("equivocating owner: every mesh node bans and stops relaying") {
    auto topo = build_mesh(6, LinkParams{10, 1e7}).value();
    auto sim = Simulation::create(topo).value();
    sim->loop().run_until(500'000);
    for (int i = 0; i < 3; ++i) {
        sim->produce(text_payload("pre-" + std::to_string(i))).value();
        sim->loop().run();
    }
    auto a = sim->seal_next(text_payload("branch-a")).value();
    auto b = sim->seal_next(text_payload("branch-b")).value();
    REQUIRE(a.height == b.height);
    REQUIRE(a.hash != b.hash);
    // The two branches enter the mesh at different nodes.
    REQUIRE(sim->peer(1).publish_block(a));
    REQUIRE(sim->peer(4).publish_block(b));
    sim->loop().run();
    for (std::uint32_t i = 0; i < 6; ++i) {
        INFO("node " << i);
        auto banned = sim->banned_at_us(i);
        REQUIRE(banned);
        CHECK(sim->ledger(i).is_banned(sim->chain_id()));
        CHECK(sim->new_block_sends_after_ban(i, a.hash) == 0);
        CHECK(sim->new_block_sends_after_ban(i, b.hash) == 0);
        // Nor is anything sent at a later virtual instant.
        CHECK(sim->new_block_sends(i, a.hash, *banned + 1) == 0);
        CHECK(sim->new_block_sends(i, b.hash, *banned + 1) == 0);
        auto history = sim->store(i)->get_range(sim->chain_id(), 0, 3).value();
        CHECK(history.size() == 4);
    }
}

TEST_CASE("stores converge and projections replay identically") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t n = 2 + rng() % 8;
        auto topo = random_connected(n, seed, LinkParams{30, 5e5}, rng() % 6).value();
        SimOptions opts;
        opts.seed = seed;
        auto sim = Simulation::create(topo, opts).value();
        std::vector<apps::ForumProjector> incremental;
        for (std::size_t i = 0; i < n; ++i) incremental.emplace_back(sim->owner_key().public_key);
        sim->on_append([&](std::uint32_t node, const Block& block) { incremental[node].apply(block); });
        PostFactory posts(seed);
        const std::size_t blocks = 3 + rng() % 6;
        std::uint64_t t = 0;
        for (std::size_t k = 0; k < blocks; ++k) {
            t += rng() % 400'000;
            sim->loop().at(t, [&, k] {
                auto batch = posts.fill(600 + 300 * (k % 3), 300).value();
                sim->produce(apps::encode_payload(batch).value()).value();
            });
        }
        sim->loop().run();
        auto owner_chain = sim->store(topo.owner)->get_range(sim->chain_id(), 0, blocks).value();
        REQUIRE(owner_chain.size() == blocks + 1);
        for (std::uint32_t i = 0; i < n; ++i) {
            auto mine = sim->store(i)->get_range(sim->chain_id(), 0, blocks).value();
            REQUIRE(mine.size() == owner_chain.size());
            for (std::size_t h = 0; h < mine.size(); ++h)
                CHECK(chaincore::serialize_block(mine[h]) == chaincore::serialize_block(owner_chain[h]));
            auto replayed = apps::project_forum(mine, sim->owner_key().public_key);
            CHECK(replayed == incremental[i].state());
            CHECK(replayed.posts.size() > 0);
        }
    }
}

TEST_CASE("scenario files round trip and drive run_scenario") {
    auto parsed = scenario_from_json(nlohmann::json::parse(R"({
        "topology": {"kind": "linear", "n": 4},
        "workload": {"block_size_bytes": 1048576, "block_count": 1},
        "seed": 2, "profile": "paper-wan"})"));
    REQUIRE(parsed);
    CHECK(parsed->topology.nodes.size() == 4);
    CHECK(parsed->topology.links[0].params == profile("paper-wan").value());
    auto again = scenario_from_json(scenario_to_json(*parsed)).value();
    CHECK(again.topology == parsed->topology);
    CHECK(again.seed == 2);

    auto result = run_scenario(parsed->topology, parsed->workload, parsed->seed, parsed->profile).value();
    CHECK(result.max_latency_ms == 3 * 1460.0);
    auto csv = result_to_csv(result);
    CHECK(csv.rfind("node_id,block_height,receipt_ms\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    auto j = result_to_json(result);
    CHECK(j["blocks"][0]["receipt_ms"].size() == 4);

    CHECK(scenario_from_json(nlohmann::json::parse(R"({"topology": {"kind": "ring", "n": 3}})")).error().code ==
          Errc::bad_schema);
    CHECK(scenario_from_json(nlohmann::json::parse(R"({"topology": {"kind": "star", "n": 1}})")).error().code ==
          Errc::invalid_topology);
    CHECK(scenario_from_json(nlohmann::json::parse(R"({"profile": "moon", "topology": {"kind": "star", "n": 3}})"))
              .error()
              .code == Errc::invalid_argument);
    auto custom = scenario_from_json(nlohmann::json::parse(R"({
        "topology": {"kind": "custom", "owner": 0,
                     "nodes": [{"id": 0}, {"id": 1, "kind": "light"}, {"id": 2}],
                     "links": [{"a": 0, "b": 1}, {"a": 1, "b": 2, "latency_ms": 5}]}})"));
    REQUIRE(custom);
    CHECK(custom->topology.nodes[1].kind == NodeKind::light);
    CHECK(custom->topology.links[1].params.latency_ms == 5);
    auto disconnected = scenario_from_json(nlohmann::json::parse(R"({
        "topology": {"kind": "custom", "nodes": [{"id": 0}, {"id": 1}, {"id": 2}], "links": [{"a": 0, "b": 1}]}})"));
    CHECK(disconnected.error().code == Errc::invalid_topology);

    Workload tiny;
    tiny.block_size_bytes = 10;
    CHECK(run_scenario(parsed->topology, tiny, 1).error().code == Errc::invalid_argument);
}

TEST_CASE("posts in scenario payloads count toward posts per second") {
    auto topo = build_topology(TopologyKind::linear, 3, LinkParams{50, 1e6}).value();
    Workload w;
    w.block_size_bytes = 40'000;
    w.block_count = 2;
    w.block_interval_ms = 1000;
    w.post_bytes = 400;
    auto r = run_scenario(topo, w, 1).value();
    const std::size_t per_block = PostFactory::records_per_payload(40'000 - min_block_bytes(), 400);
    const double span_s = (r.blocks[1].produced_ms + r.blocks[1].max_latency_ms - r.blocks[0].produced_ms) / 1000.0;
    CHECK(r.posts_per_second == doctest::Approx(2.0 * static_cast<double>(per_block) / span_s));
}

TEST_CASE("post factory produces exact sizes") {
    PostFactory f(1);
    for (std::size_t want : {0u, 1u, 250u, 400u, 1000u, 70'000u}) {
        auto r = f.make(want).value();
        CHECK(apps::record_to_json(r).size() == PostFactory::effective_bytes(want));
        CHECK(apps::verify_record(r));
    }
    CHECK(PostFactory::effective_bytes(1) == PostFactory::min_record_bytes());
    CHECK(PostFactory::max_record_bytes() == PostFactory::min_record_bytes() + apps::kMaxContentBytes);
    auto batch = f.fill(kMiB, 400).value();
    CHECK(batch.size() == (kMiB - 1) / 401);
    CHECK(apps::encode_payload(batch).value().size() <= kMiB);
}

TEST_CASE("throughput: one record per block and the size ratio") {
    ThroughputOptions single;
    single.post_size = 1000;
    single.payload_limit = 1500;  // room for exactly one record
    single.blocks_per_round = 20;
    single.duration_s = 0.05;
    single.cold_blocks = 0;
    auto one = measure_throughput(single).value();
    CHECK(one.records_per_block == 1);
    CHECK(one.posts_per_second == doctest::Approx(one.blocks_per_second));

    ThroughputOptions o;
    o.duration_s = 0.6;
    o.blocks_per_round = 2;
    o.cold_blocks = 0;
    o.post_size = 1000;
    auto small = measure_throughput(o).value();
    o.post_size = 2000;
    auto large = measure_throughput(o).value();
    CHECK(small.records_per_block == (kMiB - 1) / 1001);
    CHECK(large.records_per_block == (kMiB - 1) / 2001);
    const double ratio = small.posts_per_second / large.posts_per_second;
    MESSAGE("posts/s at 1000 B: " << small.posts_per_second << ", at 2000 B: " << large.posts_per_second
                                  << ", ratio " << ratio);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.25));

    ThroughputOptions bad;
    bad.post_size = 0;
    CHECK(measure_throughput(bad).error().code == Errc::invalid_argument);
}

TEST_CASE("simulated and loopback delivery agree on a path") {
    auto topo = build_topology(TopologyKind::linear, 3, LinkParams{2, 1e8}).value();
    auto sim = Simulation::create(topo).value();
    std::vector<std::vector<std::uint64_t>> sim_order(3);
    sim->on_append([&](std::uint32_t node, const Block& b) { sim_order[node].push_back(b.height); });
    sim->loop().run_until(100'000);
    std::vector<Block> made;
    for (int i = 0; i < 8; ++i) {
        made.push_back(sim->produce(text_payload("parity-" + std::to_string(i))).value());
        sim->loop().run_until(sim->now_us() + 1'000);
    }
    sim->loop().run();

    const auto& owner = sim->owner_key();
    const auto id = sim->chain_id();
    TempDir dirs[3];
    std::vector<std::unique_ptr<nodekit::Node>> nodes;
    std::mutex order_mutex;
    std::vector<std::vector<std::uint64_t>> live_order(3);
    for (std::uint32_t i = 0; i < 3; ++i) {
        nodekit::NodeConfig c;
        c.data_dir = dirs[i].path();
        c.listen_host = "127.0.0.1";
        c.listen_port = 0;
        c.serve_api = false;
        c.peer.min_peers = 1;
        c.follow.push_back({id, owner.public_key});
        if (i > 0) c.seeds.push_back({"127.0.0.1", nodes.back()->p2p_port(), 0, 0});
        nodes.push_back(nodekit::Node::start(c).value());
    }
    for (std::uint32_t i = 0; i < 3; ++i) {
        REQUIRE(nodes[i]->publish(sim->genesis()));
        nodes[i]->store()->add_append_hook([&, i](const Block& b) {
            std::lock_guard lock(order_mutex);
            live_order[i].push_back(b.height);
        });
    }
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
    while (nodes[1]->status().peers < 2 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    REQUIRE(nodes[1]->status().peers == 2);
    for (const auto& b : made) {
        REQUIRE(nodes[0]->publish(b));
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    while (nodes[2]->store()->chain_size(id).value() < made.size() + 1 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    for (auto& n : nodes) n->stop();
    std::lock_guard lock(order_mutex);
    for (std::uint32_t i = 0; i < 3; ++i) {
        INFO("node " << i);
        CHECK(live_order[i] == sim_order[i]);
    }
}
