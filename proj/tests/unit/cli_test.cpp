#include "doctest.h"
#include "test_support.hpp"

#include "infnote/cli/cli.hpp"
#include "infnote/nodekit/node.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace infnote;
using infnote::testing::TempDir;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;

    json parsed() const { return json::parse(out); }
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = infnote::cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

const std::string kSeed(64, '1');

}  // namespace

TEST_CASE("keygen is deterministic under --seed and writes key files") {
    TempDir dir;
    auto a = invoke({"--json", "keygen", "--seed", kSeed});
    REQUIRE(a.code == 0);
    auto b = invoke({"--json", "keygen", "--seed", kSeed});
    CHECK(a.out == b.out);
    CHECK(a.parsed()["private_key"] == kSeed);
    CHECK(a.parsed()["chain_id"].get<std::string>().size() == 64);

    const auto file = (dir.path() / "k.key").string();
    auto w = invoke({"--json", "keygen", "--out", file});
    REQUIRE(w.code == 0);
    CHECK_FALSE(w.parsed().contains("private_key"));
    CHECK(std::filesystem::exists(file));

    auto bad = invoke({"keygen", "--seed", "zz"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("invalid-seed") != std::string::npos);
}

TEST_CASE("chain create then block query") {
    TempDir dir;
    const auto data = (dir.path() / "data").string();
    const auto key = (dir.path() / "owner.key").string();
    REQUIRE(invoke({"keygen", "--seed", kSeed, "--out", key}).code == 0);

    auto created = invoke({"--data-dir", data, "--json", "chain", "create", "--label", "demo", "--key", key});
    REQUIRE(created.code == 0);
    const std::string id = created.parsed()["chain_id"];
    CHECK(created.parsed()["created"] == true);
    auto again = invoke({"--data-dir", data, "--json", "chain", "create", "--label", "demo", "--key", key});
    CHECK(again.parsed()["created"] == false);

    auto genesis = invoke({"--data-dir", data, "--json", "block", "query", id, "0"});
    REQUIRE(genesis.code == 0);
    CHECK(genesis.parsed()["height"] == 0);
    CHECK(genesis.parsed()["prev_hash"] == std::string(64, '0'));
    CHECK(chaincore::block_from_hex(genesis.parsed()["raw"].get<std::string>()));

    auto missing = invoke({"--data-dir", data, "block", "query", id, "999"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("not found") != std::string::npos);
    auto missing_json = invoke({"--data-dir", data, "--json", "block", "query", id, "999"});
    CHECK(missing_json.code == 1);
    CHECK(missing_json.parsed()["error"]["code"] == "not-found");

    auto unknown = invoke({"--data-dir", data, "block", "query", std::string(64, 'a'), "0"});
    CHECK(unknown.code == 1);

    auto listed = invoke({"--data-dir", data, "--json", "chain", "list"});
    REQUIRE(listed.code == 0);
    REQUIRE(listed.parsed()["chains"].size() == 1);
    CHECK(listed.parsed()["chains"][0]["height"] == 0);
    CHECK(listed.parsed()["chains"][0]["label"] == "demo");
}

TEST_CASE("usage errors exit 2") {
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"bogus"}).code == 2);
    CHECK(invoke({"chain"}).code == 2);
    CHECK(invoke({"block", "query", "abc"}).code == 2);
    CHECK(invoke({"block", "query", "abc", "notanumber"}).code == 2);
    CHECK(invoke({"node", "run", "--kind", "medium"}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
    CHECK(invoke({"block", "query", "abc", "1"}).code == 1);
}

TEST_CASE("drop keeps blocks unless purged; export and import round trip") {
    TempDir dir;
    const auto data = (dir.path() / "data").string();
    const auto key = (dir.path() / "owner.key").string();
    REQUIRE(invoke({"keygen", "--seed", kSeed, "--out", key}).code == 0);
    const std::string id = invoke({"--data-dir", data, "--json", "chain", "create", "--label", "x", "--key", key})
                               .parsed()["chain_id"];
    const auto file = (dir.path() / "chain.hex").string();
    auto exported = invoke({"--data-dir", data, "--json", "chain", "export", id, file});
    REQUIRE(exported.code == 0);
    CHECK(exported.parsed()["blocks"] == 1);

    auto dropped = invoke({"--data-dir", data, "--json", "chain", "drop", id});
    REQUIRE(dropped.code == 0);
    CHECK(dropped.parsed()["purged"] == false);
    const auto log = std::filesystem::path(data) / "chains" / (id + ".log");
    CHECK(std::filesystem::exists(log));
    CHECK(invoke({"--data-dir", data, "--json", "chain", "list"}).parsed()["chains"][0]["status"] == "dropped");

    // Re-follow from the registry entry, then purge.
    REQUIRE(invoke({"--data-dir", data, "chain", "follow", id}).code == 0);
    auto purged = invoke({"--data-dir", data, "--json", "chain", "drop", id, "--purge-local"});
    REQUIRE(purged.code == 0);
    CHECK(purged.parsed()["files_removed"].get<int>() >= 1);
    CHECK_FALSE(std::filesystem::exists(log));

    const auto other = (dir.path() / "other").string();
    auto imported = invoke({"--data-dir", other, "--json", "chain", "import", file});
    REQUIRE(imported.code == 0);
    CHECK(imported.parsed()["appended"] == 1);
    CHECK(invoke({"--data-dir", other, "--json", "block", "query", id, "0"}).code == 0);

    auto unknown = invoke({"--data-dir", other, "chain", "follow", std::string(64, 'b')});
    CHECK(unknown.code == 1);
}

TEST_CASE("post and identity records are signed and verifiable") {
    TempDir dir;
    const auto key = (dir.path() / "a.key").string();
    REQUIRE(invoke({"keygen", "--seed", kSeed, "--out", key}).code == 0);
    const std::string chain(64, 'c');
    auto post = invoke({"--json", "post", "create", "--chain", chain, "--content", "hello", "--key", key, "--time", "7"});
    REQUIRE(post.code == 0);
    auto rec = apps::record_from_json(post.parsed()["record"]);
    REQUIRE(rec);
    CHECK(apps::verify_record(*rec));
    CHECK(rec->post()->client_time == 7);
    CHECK(post.parsed()["record_id"] == to_hex(apps::record_id(*rec)));

    const std::string post_id = post.parsed()["record"]["body"]["post_id"];
    auto reply = invoke({"--json", "post", "create", "--chain", chain, "--content", "re", "--key", key, "--reply-to",
                      post_id});
    REQUIRE(reply.code == 0);
    CHECK(reply.parsed()["record"]["body"]["reply_to"] == post_id);

    auto name = invoke({"--json", "identity", "register", "--chain", chain, "--name", "alice", "--key", key});
    REQUIRE(name.code == 0);
    CHECK(apps::verify_record(apps::record_from_json(name.parsed()["record"]).value()));
    CHECK(invoke({"identity", "register", "--chain", chain, "--name", "Bad Name", "--key", key}).code == 1);
    CHECK(invoke({"post", "create", "--chain", chain, "--content", "x"}).code == 1);  // no key
}

TEST_CASE("config file supplies the owner key and data dir") {
    TempDir dir;
    const auto key = (dir.path() / "owner.key").string();
    REQUIRE(invoke({"keygen", "--seed", kSeed, "--out", key}).code == 0);
    const auto cfg = dir.path() / "infnote.toml";
    std::ofstream(cfg) << "data_dir = \"" << (dir.path() / "cfgdata").string() << "\"\nowner_key_file = \"" << key
                       << "\"\n";
    auto created = invoke({"--config", cfg.string(), "--json", "chain", "create", "--label", "c"});
    REQUIRE(created.code == 0);
    CHECK(std::filesystem::exists(dir.path() / "cfgdata"));
    CHECK(invoke({"--config", (dir.path() / "missing.toml").string(), "chain", "list"}).code == 1);
}

TEST_CASE("post create --submit reaches a live node") {
    TempDir dir;
    const auto key = (dir.path() / "owner.key").string();
    REQUIRE(invoke({"keygen", "--seed", kSeed, "--out", key}).code == 0);
    nodekit::NodeConfig c;
    c.data_dir = dir.path() / "node";
    c.listen_host = "127.0.0.1";
    c.listen_port = 0;
    c.api_port = 0;
    c.owner_keys = nodekit::read_key_file(key).value();
    c.producer.block_interval = std::chrono::hours(1);
    auto node = nodekit::Node::start(c).value();
    const std::string id = chaincore::derive_chain_id(c.owner_keys->public_key).value().hex();
    const std::string api = "127.0.0.1:" + std::to_string(*node->api_port());
    auto sent = invoke({"--json", "post", "create", "--chain", id, "--content", "live", "--key", key, "--submit", api});
    REQUIRE(sent.code == 0);
    CHECK(sent.parsed()["submitted"]["status"] == "accepted");
    CHECK(node->status().pooled_records == 1);
    auto refused = invoke({"post", "create", "--chain", std::string(64, 'd'), "--content", "x", "--key", key, "--submit", api});
    CHECK(refused.code == 1);
    node->stop();
}

TEST_CASE("node run starts and stops") {
    TempDir dir;
    auto r = invoke({"--data-dir", (dir.path() / "n").string(), "--json", "node", "run", "--listen", "127.0.0.1:0",
                     "--api", "127.0.0.1:0", "--seconds", "0.3"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string first;
    std::string second;
    std::getline(lines, first);
    std::getline(lines, second);
    CHECK(json::parse(first)["p2p_port"].get<int>() > 0);
    CHECK(json::parse(second)["kind"] == "full");
    CHECK(invoke({"node", "run", "--kind", "light", "--owner", "--seconds", "0.1"}).code == 1);
}

TEST_CASE("sim run reports the analytic hop sum") {
    TempDir dir;
    const auto scenario = dir.path() / "linear10.json";
    std::ofstream(scenario) << R"({"topology": {"kind": "linear", "n": 11},
        "workload": {"block_size_bytes": 1048576, "block_count": 1}, "seed": 1, "profile": "paper-wan"})";
    const auto csv = dir.path() / "out.csv";
    auto r = invoke({"--json", "sim", "run", scenario.string(), "--csv", csv.string()});
    REQUIRE(r.code == 0);
    CHECK(r.parsed()["max_latency_ms"] == 10 * 1460.0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "node_id,block_height,receipt_ms");
    CHECK(invoke({"sim", "run", (dir.path() / "none.json").string()}).code == 1);

    auto t = invoke({"--json", "sim", "throughput", "--post-size", "2000", "--duration", "0.1", "--blocks", "1"});
    REQUIRE(t.code == 0);
    CHECK(t.parsed()["record_bytes"] == 2000);
    CHECK(t.parsed()["posts_per_second"].get<double>() > 0);
}
