#include "infnote/simlab/simulation.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/simlab/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

namespace infnote::simlab {

namespace fs = std::filesystem;
using peernet::SessionId;

void EventLoop::at(std::uint64_t time_us, Task task) {
    queue_.push(Event{std::max(time_us, now_), seq_++, std::move(task)});
}

void EventLoop::run_until(std::uint64_t until_us) {
    while (!queue_.empty() && queue_.top().time <= until_us) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        ++processed_;
        ev.task();
    }
    now_ = std::max(now_, until_us);
}

void EventLoop::run() {
    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        ++processed_;
        ev.task();
    }
}

std::size_t charged_bytes(const wire::Message& message) {
    if (const auto* nb = std::get_if<wire::NewBlock>(&message)) return chaincore::serialize_block(nb->block).size();
    if (const auto* bs = std::get_if<wire::Blocks>(&message)) {
        std::size_t total = 0;
        for (const auto& b : bs->blocks) total += chaincore::kCanonicalHeaderBytes + b.payload.size() + chaincore::kSignatureBytes;
        return total;
    }
    return wire::encode_message(message).size();
}

std::uint64_t serialization_us(const LinkParams& link, std::size_t bytes) {
    return static_cast<std::uint64_t>(std::ceil(static_cast<double>(bytes) * 1e6 / link.bandwidth_bytes_per_s - 1e-9));
}

std::uint64_t latency_us(const LinkParams& link) {
    return static_cast<std::uint64_t>(std::llround(link.latency_ms * 1000.0));
}

std::size_t min_block_bytes() { return chaincore::kCanonicalHeaderBytes + chaincore::kSignatureBytes; }

struct Simulation::Endpoint {
    std::uint32_t peer_node = 0;
    SessionId peer_session = 0;
    std::size_t direction = 0;
    LinkParams params;
    bool open = true;
};

class Simulation::Transport : public peernet::PeerTransport {
public:
    Transport(Simulation& sim, std::uint32_t node) : sim_(sim), node_(node) {}

    void send(SessionId session, const wire::Message& message) override;
    void close(SessionId session) override;

private:
    Simulation& sim_;
    std::uint32_t node_;
};

struct Simulation::NodeState {
    std::uint32_t id = 0;
    std::unique_ptr<chainstore::ChainStore> store;
    std::unique_ptr<peernet::StoreLedger> store_ledger;
    std::unique_ptr<nodekit::LightCache> light;
    apps::SignatureCache signatures{1u << 16};
    std::unique_ptr<Transport> transport;
    std::unique_ptr<peernet::PeerNode> peer;
    std::map<SessionId, Endpoint> endpoints;
    std::unordered_map<Hash256, std::uint64_t, Hash256Hasher> receipts;
    std::optional<std::uint64_t> banned_at;
    /// Global send sequence number at the moment of the ban.
    std::optional<std::uint64_t> banned_seq;
    struct Send {
        Hash256 hash;
        std::uint64_t time;
        std::uint64_t seq;
    };
    std::vector<Send> new_block_sends;

    void mark_banned(std::uint64_t now, std::uint64_t seq) {
        if (banned_at) return;
        banned_at = now;
        banned_seq = seq;
    }

    peernet::BlockLedger& ledger() {
        if (light) return *light;
        return *store_ledger;
    }
};

void Simulation::Transport::send(SessionId session, const wire::Message& message) {
    auto& node = *sim_.nodes_[node_];
    auto it = node.endpoints.find(session);
    if (it == node.endpoints.end() || !it->second.open) return;
    const Endpoint& ep = it->second;
    const std::size_t bytes = charged_bytes(message);
    const std::uint64_t now = sim_.loop_.now_us();
    const std::uint64_t start = std::max(now, sim_.link_free_us_[ep.direction]);
    const std::uint64_t done = start + serialization_us(ep.params, bytes);
    sim_.link_free_us_[ep.direction] = done;
    sim_.bytes_charged_ += bytes;
    ++sim_.send_seq_;
    if (const auto* nb = std::get_if<wire::NewBlock>(&message))
        node.new_block_sends.push_back({nb->block.hash, now, sim_.send_seq_});

    std::string frame;
    std::shared_ptr<wire::Message> direct;
    if (sim_.options_.encode_frames)
        frame = wire::encode_message(message);
    else
        direct = std::make_shared<wire::Message>(message);
    const auto to = ep.peer_node;
    const auto to_session = ep.peer_session;
    sim_.loop_.at(done + latency_us(ep.params), [this, to, to_session, frame = std::move(frame), direct] {
        auto& target = *sim_.nodes_[to];
        auto dest = target.endpoints.find(to_session);
        if (dest == target.endpoints.end() || !dest->second.open) return;
        ++sim_.delivered_;
        if (direct)
            target.peer->on_message(to_session, *direct);
        else
            target.peer->on_frame(to_session, frame);
        if (target.ledger().is_banned(sim_.chain_id_)) target.mark_banned(sim_.loop_.now_us(), sim_.send_seq_);
    });
}

void Simulation::Transport::close(SessionId session) {
    auto& node = *sim_.nodes_[node_];
    auto it = node.endpoints.find(session);
    if (it == node.endpoints.end() || !it->second.open) return;
    it->second.open = false;
    const auto to = it->second.peer_node;
    const auto to_session = it->second.peer_session;
    const auto lat = latency_us(it->second.params);
    const auto self = node_;
    sim_.loop_.at(sim_.loop_.now_us(), [this, self, session] { sim_.nodes_[self]->peer->on_session_closed(session); });
    sim_.loop_.at(sim_.loop_.now_us() + lat, [this, to, to_session] {
        auto& target = *sim_.nodes_[to];
        auto dest = target.endpoints.find(to_session);
        if (dest == target.endpoints.end() || !dest->second.open) return;
        dest->second.open = false;
        target.peer->on_session_closed(to_session);
    });
}

Simulation::Simulation(Topology topology, SimOptions options)
    : topology_(std::move(topology)), options_(std::move(options)) {}

Simulation::~Simulation() {
    // Peers reference ledgers and transports; tear them down before stores.
    for (auto& n : nodes_) n->peer.reset();
    nodes_.clear();
    if (owns_work_dir_) {
        std::error_code ec;
        fs::remove_all(work_dir_, ec);
    }
}

Result<std::unique_ptr<Simulation>> Simulation::create(Topology topology, SimOptions options) {
    if (auto st = topology.validate(); !st) return st.error();
    std::unique_ptr<Simulation> sim(new Simulation(std::move(topology), std::move(options)));
    if (auto st = sim->build(); !st) return st.error();
    return sim;
}

Status Simulation::build() {
    auto key = chaincore::generate_keypair(chaincore::sha256(as_bytes("infnote-sim-owner:" + std::to_string(options_.seed))));
    if (!key) return key.error();
    owner_ = *key;
    auto id = chaincore::derive_chain_id(owner_.public_key);
    if (!id) return id.error();
    chain_id_ = *id;
    auto genesis = chaincore::make_genesis(owner_, "simlab", options_.epoch_s);
    if (!genesis) return genesis.error();
    genesis_ = *genesis;

    if (options_.work_dir) {
        work_dir_ = *options_.work_dir;
    } else {
        std::random_device rd;
        work_dir_ = fs::temp_directory_path() /
                    ("infnote-sim-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        owns_work_dir_ = true;
    }
    std::error_code ec;
    fs::create_directories(work_dir_, ec);
    if (ec) return make_error(Errc::io_error, "cannot create " + work_dir_.string() + ": " + ec.message());

    const std::uint64_t epoch = options_.epoch_s;
    for (const auto& spec : topology_.nodes) {
        auto node = std::make_unique<NodeState>();
        node->id = spec.id;
        peernet::PeerNodeConfig cfg = options_.peer;
        cfg.kind = spec.kind;
        if (spec.kind == NodeKind::full) {
            auto store = chainstore::ChainStore::open(work_dir_ / ("node-" + std::to_string(spec.id)));
            if (!store) return store.error();
            node->store = std::move(*store);
            chainstore::ChainRegistryEntry entry;
            entry.chain_id = chain_id_;
            entry.owner_pub = owner_.public_key;
            entry.label = "simlab";
            if (auto st = node->store->follow_chain(entry); !st) return st.error();
            if (!node->store->get_head(chain_id_).value()) {
                if (auto r = node->store->append_block(genesis_); !r) return r.error();
            }
            node->store_ledger = std::make_unique<peernet::StoreLedger>(*node->store);
            node->store->add_ban_hook([this, raw = node.get()](const ChainId&, const chaincore::EquivocationEvidence&) {
                raw->mark_banned(loop_.now_us(), send_seq_);
            });
        } else {
            node->light = std::make_unique<nodekit::LightCache>(options_.light_cache_depth);
            if (auto st = node->light->follow(chain_id_, owner_.public_key); !st) return st.error();
            if (auto r = node->light->append(genesis_); !r) return r.error();
        }
        node->transport = std::make_unique<Transport>(*this, spec.id);
        node->peer = std::make_unique<peernet::PeerNode>(cfg, node->ledger(), *node->transport, nullptr,
                                                         &node->signatures, [this, epoch] {
                                                             return epoch + loop_.now_us() / 1'000'000;
                                                         });
        const auto self = spec.id;
        node->peer->set_block_listener([this, self](const Block& block) {
            auto& n = *nodes_[self];
            n.receipts.emplace(block.hash, loop_.now_us());
            if (append_listener_) append_listener_(self, block);
        });
        nodes_.push_back(std::move(node));
    }

    link_free_us_.assign(topology_.links.size() * 2, 0);
    for (std::size_t l = 0; l < topology_.links.size(); ++l) {
        const auto& link = topology_.links[l];
        const SessionId sa = 2 * l + 1;
        const SessionId sb = 2 * l + 2;
        nodes_[link.a]->endpoints[sa] = Endpoint{link.b, sb, 2 * l, link.params, true};
        nodes_[link.b]->endpoints[sb] = Endpoint{link.a, sa, 2 * l + 1, link.params, true};
    }
    for (std::size_t l = 0; l < topology_.links.size(); ++l) {
        const auto& link = topology_.links[l];
        nodes_[link.b]->peer->on_session_open(2 * l + 2, false);
        nodes_[link.a]->peer->on_session_open(2 * l + 1, true);
    }
    return {};
}

peernet::PeerNode& Simulation::peer(std::uint32_t node) { return *nodes_.at(node)->peer; }
peernet::BlockLedger& Simulation::ledger(std::uint32_t node) { return nodes_.at(node)->ledger(); }
chainstore::ChainStore* Simulation::store(std::uint32_t node) { return nodes_.at(node)->store.get(); }
nodekit::LightCache* Simulation::cache(std::uint32_t node) { return nodes_.at(node)->light.get(); }

Result<Block> Simulation::seal_next(Bytes payload) {
    auto* owner_store = nodes_[topology_.owner]->store.get();
    auto head = owner_store->get_head(chain_id_);
    if (!head) return head.error();
    if (!*head) return make_error(Errc::not_found, "owner has no genesis");
    const Block& prev = **head;
    chaincore::BlockDraft draft;
    draft.chain_id = chain_id_;
    draft.height = prev.height + 1;
    draft.time = std::max(options_.epoch_s + loop_.now_us() / 1'000'000, prev.time + 1);
    draft.prev_hash = prev.hash;
    draft.payload = std::move(payload);
    return chaincore::seal_block(std::move(draft), owner_);
}

Result<Block> Simulation::produce(Bytes payload) {
    auto block = seal_next(std::move(payload));
    if (!block) return block.error();
    auto r = nodes_[topology_.owner]->peer->publish_block(*block);
    if (!r) return r.error();
    return block;
}

Status Simulation::inject(std::uint32_t from, std::uint32_t to, const Block& block) {
    if (from >= nodes_.size() || to >= nodes_.size()) return make_error(Errc::invalid_argument, "no such node");
    auto& node = *nodes_[from];
    for (const auto& [session, ep] : node.endpoints) {
        if (ep.peer_node != to) continue;
        node.transport->send(session, wire::NewBlock{block});
        return {};
    }
    return make_error(Errc::invalid_argument, "nodes are not neighbours");
}

std::optional<std::uint64_t> Simulation::receipt_us(std::uint32_t node, const Hash256& block_hash) const {
    const auto& r = nodes_.at(node)->receipts;
    auto it = r.find(block_hash);
    if (it == r.end()) return std::nullopt;
    return it->second;
}

std::optional<std::uint64_t> Simulation::banned_at_us(std::uint32_t node) const { return nodes_.at(node)->banned_at; }

std::size_t Simulation::new_block_sends(std::uint32_t node, const Hash256& block_hash, std::uint64_t since_us) const {
    std::size_t n = 0;
    for (const auto& s : nodes_.at(node)->new_block_sends)
        if (s.hash == block_hash && s.time >= since_us) ++n;
    return n;
}

std::size_t Simulation::new_block_sends_after_ban(std::uint32_t node, const Hash256& block_hash) const {
    const auto& state = *nodes_.at(node);
    if (!state.banned_seq) return 0;
    std::size_t n = 0;
    for (const auto& s : state.new_block_sends)
        if (s.hash == block_hash && s.seq > *state.banned_seq) ++n;
    return n;
}

namespace {

double to_ms(std::uint64_t us) { return static_cast<double>(us) / 1000.0; }

Bytes filler_payload(std::size_t size, std::uint64_t seed, std::uint64_t height) {
    std::mt19937_64 rng(seed * 1'000'003 + height);
    Bytes out(size);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

}  // namespace

Result<ScenarioResult> run_scenario(const Topology& topology, const Workload& workload, std::uint64_t seed,
                                    std::string profile_name) {
    if (workload.block_size_bytes < min_block_bytes() ||
        workload.block_size_bytes - min_block_bytes() > chaincore::kMaxPayloadBytes)
        return make_error(Errc::invalid_argument, "block size must be between " + std::to_string(min_block_bytes()) +
                                                      " and " +
                                                      std::to_string(chaincore::kMaxPayloadBytes + min_block_bytes()));
    if (workload.block_interval_ms < 0 || workload.start_ms < 0)
        return make_error(Errc::invalid_argument, "times must be non-negative");
    SimOptions options;
    options.seed = seed;
    auto sim_or = Simulation::create(topology, options);
    if (!sim_or) return sim_or.error();
    auto& sim = **sim_or;
    const std::size_t payload_size = workload.block_size_bytes - min_block_bytes();

    std::vector<std::pair<Block, std::size_t>> produced;
    std::optional<Error> failure;
    PostFactory posts(seed);
    auto make_payload = [&](std::uint64_t height) -> Result<std::pair<Bytes, std::size_t>> {
        if (workload.post_bytes == 0) return std::make_pair(filler_payload(payload_size, seed, height), std::size_t{0});
        auto batch = posts.fill(payload_size, workload.post_bytes);
        if (!batch) return batch.error();
        auto encoded = apps::encode_payload(*batch);
        if (!encoded) return encoded.error();
        return std::make_pair(std::move(*encoded), batch->size());
    };
    auto produce_one = [&] {
        if (failure) return;
        const std::uint64_t height = produced.size() + 1;
        auto payload = make_payload(height);
        if (!payload) {
            failure = payload.error();
            return;
        }
        auto block = sim.produce(std::move(payload->first));
        if (!block) {
            failure = block.error();
            return;
        }
        produced.emplace_back(std::move(*block), payload->second);
    };

    const auto start_us = static_cast<std::uint64_t>(std::llround(workload.start_ms * 1000.0));
    sim.loop().run_until(start_us);
    if (workload.block_interval_ms == 0) {
        for (std::size_t k = 0; k < workload.block_count && !failure; ++k) {
            produce_one();
            sim.loop().run();
        }
    } else {
        const auto step = static_cast<std::uint64_t>(std::llround(workload.block_interval_ms * 1000.0));
        for (std::size_t k = 0; k < workload.block_count; ++k) sim.loop().at(start_us + k * step, produce_one);
        sim.loop().run();
    }
    if (failure) return *failure;

    ScenarioResult result;
    result.profile = std::move(profile_name);
    result.seed = seed;
    result.node_count = topology.nodes.size();
    result.owner = topology.owner;
    double confirm_sum = 0;
    double latency_sum = 0;
    std::size_t latency_count = 0;
    std::size_t total_records = 0;
    std::uint64_t last_confirm_us = 0;
    for (const auto& [block, records] : produced) {
        BlockReceipts br;
        br.height = block.height;
        const std::uint64_t produced_us = *sim.receipt_us(topology.owner, block.hash);
        br.produced_us = produced_us;
        br.produced_ms = to_ms(produced_us);
        br.bytes = chaincore::serialize_block(block).size();
        double node_sum = 0;
        std::size_t node_count = 0;
        for (std::uint32_t i = 0; i < topology.nodes.size(); ++i) {
            auto t = sim.receipt_us(i, block.hash);
            if (!t) {
                br.receipt_us.push_back(std::nullopt);
                br.receipt_ms.push_back(std::nullopt);
                result.complete = false;
                continue;
            }
            br.receipt_us.push_back(*t);
            br.receipt_ms.push_back(to_ms(*t));
            last_confirm_us = std::max(last_confirm_us, *t);
            const double lat = to_ms(*t - produced_us);
            br.max_latency_ms = std::max(br.max_latency_ms, lat);
            if (i != topology.owner) {
                node_sum += lat;
                ++node_count;
            }
        }
        br.mean_latency_ms = node_count ? node_sum / static_cast<double>(node_count) : 0.0;
        confirm_sum += br.max_latency_ms;
        latency_sum += node_sum;
        latency_count += node_count;
        total_records += records;
        result.max_latency_ms = std::max(result.max_latency_ms, br.max_latency_ms);
        result.blocks.push_back(std::move(br));
    }
    if (!produced.empty()) {
        result.mean_confirm_ms = confirm_sum / static_cast<double>(produced.size());
        const std::uint64_t first_us = *sim.receipt_us(topology.owner, produced.front().first.hash);
        const double span_s = static_cast<double>(last_confirm_us - first_us) / 1e6;
        if (span_s > 0) result.posts_per_second = static_cast<double>(total_records) / span_s;
    }
    if (latency_count) result.mean_latency_ms = latency_sum / static_cast<double>(latency_count);
    return result;
}

nlohmann::json result_to_json(const ScenarioResult& result) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : result.blocks) {
        nlohmann::json receipts = nlohmann::json::array();
        for (const auto& r : b.receipt_ms) receipts.push_back(r ? nlohmann::json(*r) : nlohmann::json(nullptr));
        blocks.push_back({{"height", b.height},
                          {"produced_ms", b.produced_ms},
                          {"bytes", b.bytes},
                          {"receipt_ms", std::move(receipts)},
                          {"max_latency_ms", b.max_latency_ms},
                          {"mean_latency_ms", b.mean_latency_ms}});
    }
    return {{"profile", result.profile},
            {"seed", result.seed},
            {"node_count", result.node_count},
            {"owner", result.owner},
            {"complete", result.complete},
            {"max_latency_ms", result.max_latency_ms},
            {"mean_confirm_ms", result.mean_confirm_ms},
            {"mean_latency_ms", result.mean_latency_ms},
            {"posts_per_second", result.posts_per_second},
            {"blocks", std::move(blocks)}};
}

std::string result_to_csv(const ScenarioResult& result) {
    std::ostringstream out;
    out << "node_id,block_height,receipt_ms\n";
    for (const auto& b : result.blocks)
        for (std::size_t i = 0; i < b.receipt_ms.size(); ++i) {
            out << i << ',' << b.height << ',';
            if (b.receipt_ms[i]) out << nlohmann::json(*b.receipt_ms[i]).dump();
            out << '\n';
        }
    return out.str();
}

namespace {

template <class T>
Result<T> field(const nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        return make_error(Errc::bad_schema, std::string("bad value for ") + key);
    }
}

Result<LinkParams> link_from(const nlohmann::json& obj, LinkParams base) {
    auto lat = field<double>(obj, "latency_ms", base.latency_ms);
    if (!lat) return lat.error();
    auto bw = field<double>(obj, "bandwidth_bytes_per_s", base.bandwidth_bytes_per_s);
    if (!bw) return bw.error();
    return LinkParams{*lat, *bw};
}

}  // namespace

Result<Scenario> scenario_from_json(const nlohmann::json& value) {
    if (!value.is_object()) return make_error(Errc::bad_schema, "scenario must be an object");
    Scenario sc;
    auto prof = field<std::string>(value, "profile", "paper-wan");
    if (!prof) return prof.error();
    sc.profile = *prof;
    auto base = profile(sc.profile);
    if (!base) return make_error(Errc::invalid_argument, "unknown profile " + sc.profile);
    auto seed = field<std::uint64_t>(value, "seed", 1);
    if (!seed) return seed.error();
    sc.seed = *seed;

    if (!value.contains("topology") || !value["topology"].is_object())
        return make_error(Errc::bad_schema, "missing topology");
    const auto& t = value["topology"];
    auto kind_name = field<std::string>(t, "kind", "");
    if (!kind_name) return kind_name.error();
    auto kind = parse_topology_kind(*kind_name);
    if (!kind) return make_error(Errc::bad_schema, "topology kind must be star, linear or custom");
    auto link = link_from(t, *base);
    if (!link) return link.error();
    if (*kind == TopologyKind::custom) {
        if (!t.contains("nodes") || !t["nodes"].is_array() || !t.contains("links") || !t["links"].is_array())
            return make_error(Errc::bad_schema, "custom topology needs nodes and links");
        for (const auto& n : t["nodes"]) {
            auto id = field<std::uint32_t>(n, "id", 0);
            auto k = field<std::string>(n, "kind", "full");
            if (!id) return id.error();
            if (!k) return k.error();
            auto nk = wire::parse_node_kind(*k);
            if (!nk) return make_error(Errc::bad_schema, "node kind must be full or light");
            sc.topology.nodes.push_back({*id, *nk});
        }
        for (const auto& l : t["links"]) {
            auto a = field<std::uint32_t>(l, "a", 0);
            auto b = field<std::uint32_t>(l, "b", 0);
            if (!a) return a.error();
            if (!b) return b.error();
            auto params = link_from(l, *link);
            if (!params) return params.error();
            sc.topology.links.push_back({*a, *b, *params});
        }
        auto owner = field<std::uint32_t>(t, "owner", 0);
        if (!owner) return owner.error();
        sc.topology.owner = *owner;
        if (auto st = sc.topology.validate(); !st) return st.error();
    } else {
        auto n = field<std::size_t>(t, "n", 0);
        if (!n) return n.error();
        auto light = field<std::vector<std::uint32_t>>(t, "light", {});
        if (!light) return light.error();
        auto topo = build_topology(*kind, *n, *link, *light);
        if (!topo) return topo.error();
        sc.topology = std::move(*topo);
    }

    if (value.contains("workload")) {
        const auto& w = value["workload"];
        if (!w.is_object()) return make_error(Errc::bad_schema, "workload must be an object");
        auto size = field<std::size_t>(w, "block_size_bytes", sc.workload.block_size_bytes);
        auto count = field<std::size_t>(w, "block_count", sc.workload.block_count);
        auto interval = field<double>(w, "block_interval_ms", sc.workload.block_interval_ms);
        auto start = field<double>(w, "start_ms", sc.workload.start_ms);
        auto post = field<std::size_t>(w, "post_bytes", sc.workload.post_bytes);
        if (!size) return size.error();
        if (!count) return count.error();
        if (!interval) return interval.error();
        if (!start) return start.error();
        if (!post) return post.error();
        sc.workload = Workload{*size, *count, *interval, *start, *post};
    }
    return sc;
}

nlohmann::json scenario_to_json(const Scenario& scenario) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : scenario.topology.nodes)
        nodes.push_back({{"id", n.id}, {"kind", std::string(wire::node_kind_name(n.kind))}});
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : scenario.topology.links)
        links.push_back({{"a", l.a},
                         {"b", l.b},
                         {"latency_ms", l.params.latency_ms},
                         {"bandwidth_bytes_per_s", l.params.bandwidth_bytes_per_s}});
    const auto& w = scenario.workload;
    return {{"profile", scenario.profile},
            {"seed", scenario.seed},
            {"topology", {{"kind", "custom"}, {"nodes", nodes}, {"links", links}, {"owner", scenario.topology.owner}}},
            {"workload",
             {{"block_size_bytes", w.block_size_bytes},
              {"block_count", w.block_count},
              {"block_interval_ms", w.block_interval_ms},
              {"start_ms", w.start_ms},
              {"post_bytes", w.post_bytes}}}};
}

Result<Scenario> load_scenario(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return make_error(Errc::io_error, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto parsed = nlohmann::json::parse(buf.str(), nullptr, false);
    if (parsed.is_discarded()) return make_error(Errc::bad_json, path.string() + " is not valid JSON");
    return scenario_from_json(parsed);
}

}  // namespace infnote::simlab
