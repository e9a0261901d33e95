#include "infnote/cli/cli.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/nodekit/api.hpp"
#include "infnote/nodekit/config.hpp"
#include "infnote/nodekit/node.hpp"
#include "infnote/simlab/simulation.hpp"
#include "infnote/simlab/throughput.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <thread>

namespace infnote::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using chaincore::ChainId;
using chaincore::KeyPair;

namespace {

/// A domain failure carried out of a command handler.
struct Failure {
    Error error;
};

template <class T>
T take(Result<T> r) {
    if (!r) throw Failure{r.error()};
    return std::move(*r);
}

void check(const Status& st) {
    if (!st) throw Failure{st.error()};
}

[[noreturn]] void fail(Errc code, std::string detail) { throw Failure{make_error(code, std::move(detail))}; }

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct Globals {
    std::string config;
    std::string data_dir;
    bool json = false;
};

class Context {
public:
    Context(const Globals& g, std::ostream& out) : globals_(g), out_(out) {}

    nodekit::NodeConfig& config() {
        if (!config_) {
            std::optional<fs::path> flag;
            if (!globals_.config.empty()) flag = globals_.config;
            auto path = nodekit::resolve_config_path(flag);
            config_ = path ? take(nodekit::load_config(*path)) : take(nodekit::parse_config(""));
            if (!globals_.data_dir.empty()) config_->data_dir = globals_.data_dir;
        }
        return *config_;
    }

    chainstore::ChainStore& store() {
        if (!store_) store_ = take(chainstore::ChainStore::open(config().data_dir, config().default_list));
        return *store_;
    }
    void close_store() { store_.reset(); }

    /// --key FILE, else the configured owner key.
    KeyPair key(const std::string& key_file) {
        if (!key_file.empty()) return take(nodekit::read_key_file(key_file));
        if (config().owner_keys) return *config().owner_keys;
        fail(Errc::invalid_argument, "no key: pass --key FILE or set owner_key_file in the config");
    }

    /// Prints `value` as JSON, or `text` when --json is off.
    void emit(const json& value, const std::string& text) {
        if (globals_.json)
            out_ << value.dump() << '\n';
        else
            out_ << text;
    }
    bool json_mode() const { return globals_.json; }
    std::ostream& out() { return out_; }

private:
    const Globals& globals_;
    std::ostream& out_;
    std::optional<nodekit::NodeConfig> config_;
    std::unique_ptr<chainstore::ChainStore> store_;
};

ChainId parse_chain(const std::string& text) {
    auto id = ChainId::from_hex(text);
    if (!id) fail(Errc::invalid_argument, "chain id must be 64 hex characters");
    return *id;
}

std::string describe_block(const chaincore::Block& b) {
    std::ostringstream s;
    s << "chain     " << b.chain_id.hex() << '\n'
      << "height    " << b.height << '\n'
      << "time      " << b.time << '\n'
      << "prev_hash " << to_hex(b.prev_hash) << '\n'
      << "hash      " << to_hex(b.hash) << '\n'
      << "signature " << to_hex(b.signature) << '\n'
      << "payload   " << b.payload.size() << " bytes\n";
    return s.str();
}

json key_json(const KeyPair& k, bool with_private) {
    json j = {{"public_key", to_hex(k.public_key)}, {"chain_id", take(chaincore::derive_chain_id(k.public_key)).hex()}};
    if (with_private) j["private_key"] = to_hex(k.private_key);
    return j;
}

/// Submits a record to a node's HTTP API.
json submit_record(const std::string& target, const ChainId& chain, const apps::ChainRecord& record) {
    auto addr = take(nodekit::parse_host_port(target));
    httplib::Client client(addr.host, addr.port);
    client.set_connection_timeout(5);
    client.set_read_timeout(10);
    auto res = client.Post("/chains/" + chain.hex() + "/records", apps::record_to_json(record), "application/json");
    if (!res) fail(Errc::io_error, "cannot reach " + target);
    auto body = json::parse(res->body, nullptr, false);
    if (res->status != 202) {
        if (body.is_object() && body.contains("error"))
            fail(Errc::invalid_argument, "node refused the record: " + body["error"].dump());
        fail(Errc::invalid_argument, "node answered HTTP " + std::to_string(res->status));
    }
    return body;
}

void emit_record(Context& ctx, const ChainId& chain, const apps::ChainRecord& record, const std::string& submit) {
    json out = {{"chain_id", chain.hex()},
                {"record_id", to_hex(apps::record_id(record))},
                {"record", apps::record_to_json_value(record)}};
    std::string text = apps::record_to_json(record) + "\n";
    if (!submit.empty()) {
        out["submitted"] = submit_record(submit, chain, record);
        text += "submitted: " + out["submitted"].value("status", std::string("?")) + "\n";
    }
    ctx.emit(out, text);
}

/// HOST:PORT for a local bind; port 0 asks for an ephemeral port.
std::pair<std::string, std::uint16_t> parse_bind(const std::string& text) {
    if (text.size() > 2 && text.compare(text.size() - 2, 2, ":0") == 0) {
        auto probe = take(nodekit::parse_host_port(text.substr(0, text.size() - 2) + ":1"));
        return {probe.host, 0};
    }
    auto a = take(nodekit::parse_host_port(text));
    return {a.host, a.port};
}

std::uint64_t unix_now() { return static_cast<std::uint64_t>(std::time(nullptr)); }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Infnote multi-chain node", "infnote"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Config file (else INFNOTE_CONFIG, else ./infnote.toml)");
    app.add_option("--data-dir", g.data_dir, "Data directory");
    app.add_flag("--json", g.json, "Machine-readable output");

    std::function<void(Context&)> action;

    // keygen
    auto* keygen = app.add_subcommand("keygen", "Create a key pair");
    std::string seed_hex;
    std::string key_out;
    keygen->add_option("--seed", seed_hex, "32-byte seed as hex (deterministic)");
    keygen->add_option("--out", key_out, "Write the key file here instead of printing the private key");
    keygen->callback([&] {
        action = [&](Context& ctx) {
            std::optional<ByteArray<32>> seed;
            if (!seed_hex.empty()) {
                seed = array_from_hex<32>(seed_hex);
                if (!seed) fail(Errc::invalid_seed, "seed must be 64 hex characters");
            }
            auto key = take(chaincore::generate_keypair(seed));
            json j = key_json(key, key_out.empty());
            if (!key_out.empty()) {
                check(nodekit::write_key_file(key_out, key));
                j["key_file"] = key_out;
            }
            std::string text = "public_key  " + j["public_key"].get<std::string>() + "\nchain_id    " +
                               j["chain_id"].get<std::string>() + "\n";
            if (key_out.empty())
                text = "private_key " + to_hex(key.private_key) + "\n" + text;
            else
                text += "key_file    " + key_out + "\n";
            ctx.emit(j, text);
        };
    });

    // chain ...
    auto* chain = app.add_subcommand("chain", "Manage chains");
    chain->require_subcommand(1);
    std::string label;
    std::string key_file;
    auto* create = chain->add_subcommand("create", "Create a chain owned by the key (writes its genesis)");
    create->add_option("--label", label, "Chain label")->required();
    create->add_option("--key", key_file, "Owner key file");
    create->callback([&] {
        action = [&](Context& ctx) {
            auto key = ctx.key(key_file);
            auto id = take(chaincore::derive_chain_id(key.public_key));
            auto& store = ctx.store();
            chainstore::ChainRegistryEntry entry;
            entry.chain_id = id;
            entry.owner_pub = key.public_key;
            entry.label = label;
            check(store.follow_chain(entry));
            bool created = false;
            auto head = take(store.get_block(id, 0));
            if (!head) {
                auto genesis = take(chaincore::make_genesis(key, label, unix_now()));
                take(store.append_block(genesis));
                head = genesis;
                created = true;
            }
            ctx.emit({{"chain_id", id.hex()}, {"label", label}, {"created", created}, {"genesis", nodekit::block_to_json(*head)}},
                     std::string(created ? "created " : "exists  ") + id.hex() + "\n");
        };
    });

    auto* list = chain->add_subcommand("list", "List known chains");
    list->callback([&] {
        action = [&](Context& ctx) {
            json chains = json::array();
            std::string text;
            for (const auto& e : ctx.store().list_chains()) {
                auto size = ctx.store().chain_size(e.chain_id);
                json height = size && *size > 0 ? json(*size - 1) : json(nullptr);
                chains.push_back({{"chain_id", e.chain_id.hex()},
                                  {"owner_pub", to_hex(e.owner_pub)},
                                  {"label", e.label},
                                  {"status", std::string(chainstore::status_name(e.status))},
                                  {"source", std::string(chainstore::source_name(e.source))},
                                  {"height", height}});
                text += e.chain_id.hex() + "  " + std::string(chainstore::status_name(e.status)) + "  " +
                        (height.is_null() ? std::string("-") : height.dump()) + "  " + e.label + "\n";
            }
            ctx.emit({{"chains", chains}}, text);
        };
    });

    std::string chain_arg;
    std::string owner_pub_hex;
    auto* follow = chain->add_subcommand("follow", "Follow a chain");
    follow->add_option("chain", chain_arg, "Chain id, optionally chain:owner_pub")->required();
    follow->add_option("--owner-pub", owner_pub_hex, "Owner public key (needed for chains not yet known)");
    follow->add_option("--label", label, "Label");
    follow->callback([&] {
        action = [&](Context& ctx) {
            auto spec = take(nodekit::parse_follow(chain_arg));
            if (!owner_pub_hex.empty()) {
                auto pub = array_from_hex<33>(owner_pub_hex);
                if (!pub) fail(Errc::invalid_key, "owner public key must be 66 hex characters");
                spec.owner_pub = *pub;
            }
            auto& store = ctx.store();
            auto known = store.entry(spec.chain_id);
            chainstore::ChainRegistryEntry entry;
            entry.chain_id = spec.chain_id;
            if (spec.owner_pub)
                entry.owner_pub = *spec.owner_pub;
            else if (known)
                entry.owner_pub = known->owner_pub;
            else
                fail(Errc::invalid_argument, "unknown chain: pass --owner-pub or chain:owner_pub");
            entry.label = !label.empty() ? label : known ? known->label : std::string();
            check(store.follow_chain(entry));
            ctx.emit({{"chain_id", entry.chain_id.hex()}, {"status", "followed"}}, "following " + entry.chain_id.hex() + "\n");
        };
    });

    bool purge = false;
    auto* drop = chain->add_subcommand("drop", "Stop following a chain (blocks stay unless --purge-local)");
    drop->add_option("chain", chain_arg, "Chain id")->required();
    drop->add_flag("--purge-local", purge, "Also delete the local block files");
    drop->callback([&] {
        action = [&](Context& ctx) {
            auto id = parse_chain(chain_arg);
            check(ctx.store().drop_chain(id));
            std::size_t removed = 0;
            if (purge) {
                const fs::path dir = ctx.store().data_dir() / "chains";
                ctx.close_store();
                std::error_code ec;
                for (const char* ext : {".log", ".log.idx", ".idx"})
                    if (fs::remove(dir / (id.hex() + ext), ec)) ++removed;
            }
            ctx.emit({{"chain_id", id.hex()}, {"status", "dropped"}, {"purged", purge}, {"files_removed", removed}},
                     "dropped " + id.hex() + (purge ? " (local blocks removed)\n" : "\n"));
        };
    });

    std::string file_arg;
    auto* exp = chain->add_subcommand("export", "Write a chain as one block hex per line");
    exp->add_option("chain", chain_arg, "Chain id")->required();
    exp->add_option("file", file_arg, "Output file")->required();
    exp->callback([&] {
        action = [&](Context& ctx) {
            auto id = parse_chain(chain_arg);
            check(ctx.store().export_chain(id, file_arg));
            auto size = take(ctx.store().chain_size(id));
            ctx.emit({{"chain_id", id.hex()}, {"file", file_arg}, {"blocks", size}},
                     "exported " + std::to_string(size) + " blocks to " + file_arg + "\n");
        };
    });

    auto* imp = chain->add_subcommand("import", "Append blocks from a block hex file");
    imp->add_option("file", file_arg, "Input file")->required();
    imp->callback([&] {
        action = [&](Context& ctx) {
            auto n = take(ctx.store().import_chain(file_arg));
            ctx.emit({{"file", file_arg}, {"appended", n}}, "appended " + std::to_string(n) + " blocks\n");
        };
    });

    // block query
    auto* block = app.add_subcommand("block", "Read blocks");
    block->require_subcommand(1);
    std::uint64_t height = 0;
    auto* query = block->add_subcommand("query", "Print the block at a height");
    query->add_option("chain", chain_arg, "Chain id")->required();
    query->add_option("height", height, "Height")->required();
    query->callback([&] {
        action = [&](Context& ctx) {
            auto id = parse_chain(chain_arg);
            if (!ctx.store().entry(id)) fail(Errc::unknown_chain, id.hex());
            auto b = take(ctx.store().get_block(id, height));
            if (!b) fail(Errc::not_found, "block not found at height " + std::to_string(height));
            ctx.emit(nodekit::block_to_json(*b), describe_block(*b));
        };
    });

    // post create / identity register
    std::string content;
    std::string reply_to;
    std::string submit;
    std::uint64_t client_time = 0;
    auto* post = app.add_subcommand("post", "Forum posts");
    post->require_subcommand(1);
    auto* post_create = post->add_subcommand("create", "Sign a post record");
    post_create->add_option("--chain", chain_arg, "Chain id")->required();
    post_create->add_option("--content", content, "Post text")->required();
    post_create->add_option("--reply-to", reply_to, "post_id being answered");
    post_create->add_option("--key", key_file, "Author key file");
    post_create->add_option("--time", client_time, "Client time in ms (default now)");
    post_create->add_option("--submit", submit, "Send to a node API at HOST:PORT");
    post_create->callback([&] {
        action = [&](Context& ctx) {
            auto id = parse_chain(chain_arg);
            auto key = ctx.key(key_file);
            std::optional<Hash256> parent;
            if (!reply_to.empty()) {
                parent = array_from_hex<32>(reply_to);
                if (!parent) fail(Errc::invalid_argument, "reply-to must be a 64-hex post id");
            }
            if (client_time == 0)
                client_time = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                             std::chrono::system_clock::now().time_since_epoch())
                                                             .count());
            emit_record(ctx, id, take(apps::make_post(key, content, parent, client_time)), submit);
        };
    });

    std::string name;
    std::string profile_text;
    auto* identity = app.add_subcommand("identity", "Name registrations");
    identity->require_subcommand(1);
    auto* reg = identity->add_subcommand("register", "Sign a name claim");
    reg->add_option("--chain", chain_arg, "Chain id")->required();
    reg->add_option("--name", name, "Name: 1-32 of [a-z0-9_]")->required();
    reg->add_option("--profile", profile_text, "Profile text");
    reg->add_option("--key", key_file, "Key file");
    reg->add_option("--submit", submit, "Send to a node API at HOST:PORT");
    reg->callback([&] {
        action = [&](Context& ctx) {
            auto id = parse_chain(chain_arg);
            auto key = ctx.key(key_file);
            std::optional<std::string> prof;
            if (!profile_text.empty()) prof = profile_text;
            emit_record(ctx, id, take(apps::make_identity(key, name, prof)), submit);
        };
    });

    // node run
    std::string kind_text;
    bool owner_mode = false;
    std::string listen;
    std::string api_bind;
    bool no_api = false;
    std::vector<std::string> seeds;
    std::vector<std::string> follows;
    double run_seconds = 0;
    auto* node = app.add_subcommand("node", "Run a node");
    node->require_subcommand(1);
    auto* run = node->add_subcommand("run", "Run until interrupted");
    run->add_option("--kind", kind_text, "full or light")->check(CLI::IsMember({"full", "light"}));
    run->add_flag("--owner", owner_mode, "Produce blocks for the owner key's chain");
    run->add_option("--key", key_file, "Owner key file (with --owner)");
    run->add_option("--listen", listen, "P2P listen HOST:PORT");
    run->add_option("--api", api_bind, "HTTP API HOST:PORT (full nodes)");
    run->add_flag("--no-api", no_api, "Do not serve the HTTP API");
    run->add_option("--seed", seeds, "Peer HOST:PORT to dial");
    run->add_option("--follow", follows, "chain or chain:owner_pub");
    run->add_option("--seconds", run_seconds, "Stop after this long (0 = until interrupted)");
    run->callback([&] {
        action = [&](Context& ctx) {
            auto cfg = ctx.config();
            if (!kind_text.empty()) cfg.kind = *wire::parse_node_kind(kind_text);
            if (owner_mode)
                cfg.owner_keys = ctx.key(key_file);
            else if (!key_file.empty())
                fail(Errc::invalid_argument, "--key needs --owner");
            if (!listen.empty()) std::tie(cfg.listen_host, cfg.listen_port) = parse_bind(listen);
            if (!api_bind.empty()) std::tie(cfg.api_host, cfg.api_port) = parse_bind(api_bind);
            if (no_api) cfg.serve_api = false;
            for (const auto& s : seeds) cfg.seeds.push_back(take(nodekit::parse_host_port(s)));
            for (const auto& f : follows) cfg.follow.push_back(take(nodekit::parse_follow(f)));
            check(cfg.validate());
            auto n = take(nodekit::run_node(cfg));
            json started = {{"kind", std::string(wire::node_kind_name(cfg.kind))}, {"p2p_port", n->p2p_port()}};
            started["api_port"] = n->api_port() ? json(*n->api_port()) : json(nullptr);
            ctx.emit(started, "listening on " + std::to_string(n->p2p_port()) +
                                  (n->api_port() ? ", api on " + std::to_string(*n->api_port()) : std::string()) +
                                  "\n");
            ctx.out().flush();
            g_interrupted = false;
            auto prev_int = std::signal(SIGINT, on_signal);
            auto prev_term = std::signal(SIGTERM, on_signal);
            const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(run_seconds);
            while (!g_interrupted && (run_seconds <= 0 || std::chrono::steady_clock::now() < deadline))
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            std::signal(SIGINT, prev_int);
            std::signal(SIGTERM, prev_term);
            auto status = n->status();
            n->stop();
            ctx.emit(nodekit::status_to_json(status), "stopped\n");
        };
    });

    // sim
    auto* sim = app.add_subcommand("sim", "Simulation lab");
    sim->require_subcommand(1);
    std::string scenario_file;
    std::string csv_out;
    auto* sim_run = sim->add_subcommand("run", "Run a scenario file");
    sim_run->add_option("scenario", scenario_file, "Scenario JSON")->required();
    sim_run->add_option("--csv", csv_out, "Write node_id,block_height,receipt_ms rows here ('-' for stdout)");
    sim_run->callback([&] {
        action = [&](Context& ctx) {
            auto sc = take(simlab::load_scenario(scenario_file));
            auto result = take(simlab::run_scenario(sc.topology, sc.workload, sc.seed, sc.profile));
            const auto csv = simlab::result_to_csv(result);
            if (!csv_out.empty() && csv_out != "-") {
                std::ofstream f(csv_out);
                if (!(f << csv)) fail(Errc::io_error, "cannot write " + csv_out);
            }
            std::ostringstream text;
            text << "nodes " << result.node_count << ", blocks " << result.blocks.size() << "\n"
                 << "max latency     " << result.max_latency_ms << " ms\n"
                 << "mean confirm    " << result.mean_confirm_ms << " ms\n"
                 << "mean per node   " << result.mean_latency_ms << " ms\n";
            if (result.posts_per_second > 0) text << "posts/s         " << result.posts_per_second << "\n";
            if (csv_out == "-") text << csv;
            ctx.emit(simlab::result_to_json(result), text.str());
        };
    });

    simlab::ThroughputOptions topts;
    auto* thr = sim->add_subcommand("throughput", "Time the verify-and-append pipeline");
    thr->add_option("--post-size", topts.post_size, "Encoded record size in bytes")->capture_default_str();
    thr->add_option("--duration", topts.duration_s, "Seconds of timed work")->capture_default_str();
    thr->add_option("--blocks", topts.blocks_per_round, "Blocks per round")->capture_default_str();
    thr->callback([&] {
        action = [&](Context& ctx) {
            auto r = take(simlab::measure_throughput(topts));
            constexpr double kReferenceRate = 150'000;
            json j = simlab::throughput_to_json(r);
            j["reference_posts_per_second"] = kReferenceRate;
            j["ratio_to_reference"] = r.posts_per_second / kReferenceRate;
            std::ostringstream text;
            text << "record size     " << r.record_bytes << " bytes (requested " << r.requested_post_bytes << ")\n"
                 << "records/block   " << r.records_per_block << "\n"
                 << "blocks          " << r.blocks << " in " << r.seconds << " s\n"
                 << "posts/s         " << static_cast<std::uint64_t>(r.posts_per_second) << " (signatures cached)\n";
            if (r.cold_posts_per_second)
                text << "posts/s cold    " << static_cast<std::uint64_t>(*r.cold_posts_per_second)
                     << " (every signature checked)\n";
            text << "reference       150000\n";
            ctx.emit(j, text.str());
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Context ctx(g, out);
    try {
        action(ctx);
    } catch (const Failure& f) {
        if (g.json)
            out << json{{"error", {{"code", std::string(errc_name(f.error.code))}, {"detail", f.error.detail}}}}.dump()
                << '\n';
        err << "error: " << f.error.message() << '\n';
        return kExitDomain;
    }
    return kExitOk;
}

}  // namespace infnote::cli
