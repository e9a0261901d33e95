// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "../golden/golden_corpus.hpp"

#include "infnote/apps/projection.hpp"
#include "infnote/chaincore/golden.hpp"
#include "infnote/simlab/simulation.hpp"
#include "infnote/simlab/throughput.hpp"
#include "infnote/simlab/workload.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace infnote;
using namespace infnote::simlab;
using chaincore::Block;

namespace {

// Pinned tolerances and limits.
constexpr double kReferencePostsPerSecond = 150'000;
constexpr double kMinPostsPerSecond = 50'000;
constexpr double kReferenceFactor = 10.0;
constexpr double kThroughputBudgetS = 60;
constexpr double kFig6bTargetMs = 14'600;
constexpr double kFig6aTargetMs = 1'300;
constexpr double kRelTolerance = 0.02;
constexpr double kMinR2 = 0.999;
constexpr double kSimBudgetS = 10;
constexpr double kEquivocationBudgetS = 5;
constexpr std::size_t kTamperCasesPerField = 100;
constexpr std::size_t kConvergenceSeeds = 50;
constexpr std::size_t kMaxConvergenceNodes = 12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 1) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * target; }

Outcome throughput() {
    const auto start = Clock::now();
    ThroughputOptions o;
    o.post_size = 250;
    o.duration_s = 3.0;
    auto r = measure_throughput(o);
    const double elapsed = seconds_since(start);
    if (!r) return {false, r.error().message()};
    const double rate = r->posts_per_second;
    const double ratio = rate / kReferencePostsPerSecond;
    const bool ok = rate >= kMinPostsPerSecond && ratio >= 1 / kReferenceFactor && ratio <= kReferenceFactor &&
                    elapsed < kThroughputBudgetS;
    std::string detail = fmt(rate, 0) + " posts/s (target 150000, ratio " + fmt(ratio, 2) + "), " +
                         std::to_string(r->record_bytes) + "-byte records x " + std::to_string(r->records_per_block) +
                         "/block; cold " + (r->cold_posts_per_second ? fmt(*r->cold_posts_per_second, 0) : "-") +
                         " posts/s; " + fmt(elapsed, 1) + " s";
    return {ok, detail};
}

Outcome fig6b() {
    const auto start = Clock::now();
    const auto link = *profile("paper-wan");
    std::vector<double> xs;
    std::vector<double> ys;
    bool exact = true;
    for (std::size_t d = 1; d <= 10; ++d) {
        auto topo = build_topology(TopologyKind::linear, d + 1, link).value();
        Workload w;
        w.block_size_bytes = std::size_t{1} << 20;
        auto r = run_scenario(topo, w, 1, "paper-wan");
        if (!r) return {false, r.error().message()};
        const auto& b = r->blocks.at(0);
        const std::uint64_t per_hop = latency_us(link) + serialization_us(link, w.block_size_bytes);
        exact = exact && *b.receipt_us.at(d) - b.produced_us == d * per_hop;
        xs.push_back(static_cast<double>(d));
        ys.push_back(r->max_latency_ms);
    }
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fit = icept + slope * xs[i];
        ss_res += (ys[i] - fit) * (ys[i] - fit);
        ss_tot += (ys[i] - sy / n) * (ys[i] - sy / n);
    }
    const double r2 = 1 - ss_res / ss_tot;
    const double elapsed = seconds_since(start);
    const bool ok = r2 >= kMinR2 && within(ys.back(), kFig6bTargetMs, kRelTolerance) && exact && elapsed < kSimBudgetS;
    return {ok, "diameter 10 -> " + fmt(ys.back() / 1000, 3) + " s (target 14.6 s), slope " + fmt(slope, 1) +
                    " ms/hop, R^2 " + fmt(r2, 6) + ", hop sums " + (exact ? "exact" : "NOT exact") + "; " +
                    fmt(elapsed, 2) + " s"};
}

Outcome fig6a() {
    const auto start = Clock::now();
    const auto link = *profile("paper-star");
    auto topo = build_topology(TopologyKind::star, 10, link).value();
    Workload w;
    w.block_size_bytes = std::size_t{1} << 20;
    w.block_count = 5;
    auto r = run_scenario(topo, w, 1, "paper-star");
    if (!r) return {false, r.error().message()};
    const auto hops = topo.hops_from(topo.owner);
    const std::uint64_t per_hop = latency_us(link) + serialization_us(link, w.block_size_bytes);
    bool exact = true;
    for (const auto& b : r->blocks)
        for (std::size_t i = 0; i < hops.size(); ++i)
            exact = exact && b.receipt_us[i] && *b.receipt_us[i] - b.produced_us == static_cast<std::uint64_t>(hops[i]) * per_hop;
    const double elapsed = seconds_since(start);
    const bool ok = within(r->mean_confirm_ms, kFig6aTargetMs, kRelTolerance) && exact && elapsed < kSimBudgetS;
    return {ok, "mean all-node latency " + fmt(r->mean_confirm_ms / 1000, 3) + " s (target 1.3 s); per-node mean " +
                    fmt(r->mean_latency_ms / 1000, 3) + " s; hop sums " + (exact ? "exact" : "NOT exact") +
                    " for all 10 nodes x 5 blocks; " + fmt(elapsed, 2) + " s"};
}

struct EquivocationRun {
    bool all_banned = true;
    bool no_relay_after = true;
    bool history = true;
    std::vector<std::uint64_t> ban_times;
};

Result<EquivocationRun> equivocation_once() {
    auto topo = build_mesh(6, LinkParams{50, 1e6}).value();
    auto sim_or = Simulation::create(topo);
    if (!sim_or) return sim_or.error();
    auto& sim = **sim_or;
    sim.loop().run_until(1'000'000);
    std::vector<Block> history;
    for (int i = 0; i < 4; ++i) {
        const std::string text = "pre-fork " + std::to_string(i);
        auto b = sim.produce(Bytes(text.begin(), text.end()));
        if (!b) return b.error();
        history.push_back(*b);
        sim.loop().run();
    }
    auto a = sim.seal_next(Bytes{'A'});
    auto b = sim.seal_next(Bytes{'B'});
    if (!a || !b) return make_error(Errc::invalid_argument, "sealing failed");
    // Both branches are validly signed by the owner and enter at different nodes.
    if (auto r = sim.peer(1).publish_block(*a); !r) return r.error();
    if (auto r = sim.peer(4).publish_block(*b); !r) return r.error();
    sim.loop().run();
    EquivocationRun out;
    for (std::uint32_t i = 0; i < 6; ++i) {
        auto t = sim.banned_at_us(i);
        out.all_banned = out.all_banned && t && sim.ledger(i).is_banned(sim.chain_id());
        out.ban_times.push_back(t.value_or(0));
        out.no_relay_after = out.no_relay_after && sim.new_block_sends_after_ban(i, a->hash) == 0 &&
                             sim.new_block_sends_after_ban(i, b->hash) == 0;
        auto stored = sim.store(i)->get_range(sim.chain_id(), 0, history.back().height);
        out.history = out.history && stored && stored->size() == history.size() + 1 &&
                      std::equal(history.begin(), history.end(), stored->begin() + 1);
    }
    return out;
}

Outcome equivocation() {
    const auto start = Clock::now();
    auto first = equivocation_once();
    auto second = equivocation_once();
    const double elapsed = seconds_since(start);
    if (!first) return {false, first.error().message()};
    if (!second) return {false, second.error().message()};
    const bool deterministic = first->ban_times == second->ban_times;
    const bool ok = first->all_banned && first->no_relay_after && first->history && deterministic &&
                    elapsed < kEquivocationBudgetS;
    return {ok, std::string("6/6 banned: ") + (first->all_banned ? "yes" : "no") +
                    ", relays after detection: " + (first->no_relay_after ? "none" : "SOME") +
                    ", pre-fork history readable: " + (first->history ? "yes" : "no") +
                    ", deterministic: " + (deterministic ? "yes" : "no") + "; " + fmt(elapsed, 2) + " s"};
}

Outcome tamper() {
    std::mt19937_64 rng(2024);
    auto owner = chaincore::generate_keypair(chaincore::sha256(as_bytes("tamper-owner"))).value();
    auto other = chaincore::generate_keypair(chaincore::sha256(as_bytes("tamper-other"))).value();
    auto random_payload = [&] {
        Bytes p(1 + rng() % 512);
        for (auto& b : p) b = static_cast<std::uint8_t>(rng());
        return p;
    };
    std::vector<Block> chain{chaincore::make_genesis(owner, "tamper", 1'700'000'000).value()};
    for (int i = 0; i < 16; ++i) {
        const auto& prev = chain.back();
        chain.push_back(chaincore::seal_block({prev.chain_id, prev.height + 1, prev.time + 1 + rng() % 100, prev.hash,
                                               random_payload()},
                                              owner)
                            .value());
    }
    auto flip = [&](auto& bytes) { bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); };
    auto change = [&](std::uint64_t v) {
        std::uint64_t d = 1 + rng() % 1000;
        return rng() % 2 ? v + d : v ^ (std::uint64_t{1} << (rng() % 64));
    };

    struct Field {
        const char* name;
        Errc expected;
        std::function<void(Block&)> mutate;
    };
    const std::vector<Field> fields = {
        {"chain_id", Errc::bad_chain_id, [&](Block& b) { flip(b.chain_id.bytes); }},
        {"height", Errc::bad_hash, [&](Block& b) { b.height = change(b.height); }},
        {"time", Errc::bad_hash, [&](Block& b) { b.time = change(b.time); }},
        {"prev_hash", Errc::bad_hash, [&](Block& b) { flip(b.prev_hash); }},
        {"payload", Errc::bad_hash,
         [&](Block& b) {
             switch (rng() % 3) {
                 case 0: flip(b.payload); break;
                 case 1: b.payload.push_back(static_cast<std::uint8_t>(rng())); break;
                 default: b.payload.pop_back(); break;
             }
         }},
        {"hash", Errc::bad_hash, [&](Block& b) { flip(b.hash); }},
        {"signature", Errc::bad_signature, [&](Block& b) { flip(b.signature); }},
    };
    std::size_t total = 0;
    std::size_t rejected = 0;
    std::string failures;
    for (const auto& f : fields) {
        for (std::size_t k = 0; k < kTamperCasesPerField; ++k) {
            const std::size_t h = 1 + rng() % (chain.size() - 1);
            Block b = chain[h];
            f.mutate(b);
            ++total;
            Status st = chaincore::verify_block(b, owner.public_key);
            if (st) st = chaincore::validate_successor(chain[h - 1], b);
            if (!st && st.error().code == f.expected)
                ++rejected;
            else if (failures.size() < 200)
                failures += std::string(" ") + f.name;
        }
    }
    // Owner-resealed mutations pass verify_block and must fail validate_successor.
    struct Resealed {
        const char* name;
        Errc expected;
    };
    const std::vector<Resealed> resealed = {{"height", Errc::bad_height},
                                            {"time", Errc::bad_time},
                                            {"prev_hash", Errc::bad_prev_hash},
                                            {"chain_id", Errc::bad_chain}};
    for (const auto& r : resealed) {
        for (std::size_t k = 0; k < kTamperCasesPerField; ++k) {
            const std::size_t h = 1 + rng() % (chain.size() - 1);
            const Block& prev = chain[h - 1];
            chaincore::BlockDraft d{prev.chain_id, prev.height + 1, prev.time + 1, prev.hash, random_payload()};
            const chaincore::KeyPair* signer = &owner;
            switch (r.expected) {
                case Errc::bad_height: d.height = prev.height + 2 + rng() % 5; break;
                case Errc::bad_time: d.time = prev.time - rng() % 3; break;
                case Errc::bad_prev_hash: flip(d.prev_hash); break;
                default:
                    d.chain_id = chaincore::derive_chain_id(other.public_key).value();
                    signer = &other;
            }
            ++total;
            Block b = chaincore::seal_block(d, *signer).value();
            Status sealed_ok = chaincore::verify_block(b, signer->public_key);
            Status st = chaincore::validate_successor(prev, b);
            if (sealed_ok && !st && st.error().code == r.expected)
                ++rejected;
            else if (failures.size() < 200)
                failures += std::string(" resealed-") + r.name;
        }
    }
    const bool ok = rejected == total;
    std::string detail = std::to_string(rejected) + "/" + std::to_string(total) +
                         " rejected with the expected reason (7 fields x " + std::to_string(kTamperCasesPerField) +
                         " raw mutations + 4 x " + std::to_string(kTamperCasesPerField) + " owner-resealed successors)";
    if (!failures.empty()) detail += "; wrong:" + failures;
    return {ok, detail};
}

Outcome convergence() {
    const auto start = Clock::now();
    std::size_t checked_nodes = 0;
    std::size_t checked_blocks = 0;
    std::string problem;
    for (std::uint64_t seed = 1; seed <= kConvergenceSeeds && problem.empty(); ++seed) {
        std::mt19937_64 rng(seed * 7919);
        const std::size_t n = 2 + rng() % (kMaxConvergenceNodes - 1);
        auto topo = random_connected(n, seed, LinkParams{20 + static_cast<double>(rng() % 80), 2e5 + static_cast<double>(rng() % 2'000'000)},
                                     rng() % (n + 1))
                        .value();
        SimOptions opts;
        opts.seed = seed;
        opts.peer.sync_window = 1 + rng() % 8;
        auto sim_or = Simulation::create(topo, opts);
        if (!sim_or) return {false, sim_or.error().message()};
        auto& sim = **sim_or;
        const auto owner_pub = sim.owner_key().public_key;
        std::vector<apps::ForumProjector> forum;
        std::vector<apps::IdentityProjector> ident;
        for (std::size_t i = 0; i < n; ++i) {
            forum.emplace_back(owner_pub);
            ident.emplace_back();
        }
        sim.on_append([&](std::uint32_t node, const Block& b) {
            forum[node].apply(b);
            ident[node].apply(b);
        });
        PostFactory posts(seed);
        auto authors = std::vector<chaincore::KeyPair>{
            chaincore::generate_keypair(chaincore::sha256(as_bytes("conv-a" + std::to_string(seed)))).value(),
            chaincore::generate_keypair(chaincore::sha256(as_bytes("conv-b" + std::to_string(seed)))).value()};
        std::vector<Hash256> post_ids;
        const std::size_t blocks = 3 + rng() % 10;
        std::uint64_t t = 300'000;
        std::size_t made = 0;
        for (std::size_t k = 0; k < blocks; ++k) {
            // Bursts (zero gap) and long pauses both occur.
            t += rng() % 3 == 0 ? 0 : rng() % 1'500'000;
            sim.loop().at(t, [&, k] {
                std::vector<apps::ChainRecord> recs;
                auto batch = posts.fill(200 + (rng() % 4) * 400, 250 + rng() % 200).value();
                recs.insert(recs.end(), batch.begin(), batch.end());
                for (const auto& r : batch) post_ids.push_back(r.post()->post_id);
                if (!post_ids.empty() && rng() % 2)
                    recs.push_back(apps::make_delete_marker(authors[rng() % 2], post_ids[rng() % post_ids.size()]).value());
                recs.push_back(apps::make_identity(authors[rng() % 2], "user" + std::to_string(rng() % 4), std::nullopt).value());
                if (sim.produce(apps::encode_payload(recs).value())) ++made;
                (void)k;
            });
        }
        sim.loop().run();
        auto owner_chain = sim.store(topo.owner)->get_range(sim.chain_id(), 0, blocks);
        if (!owner_chain || owner_chain->size() != blocks + 1 || made != blocks) {
            problem = "seed " + std::to_string(seed) + ": owner chain incomplete";
            break;
        }
        for (std::uint32_t i = 0; i < n && problem.empty(); ++i) {
            auto mine = sim.store(i)->get_range(sim.chain_id(), 0, blocks + 5).value();
            if (mine.size() != owner_chain->size()) {
                problem = "seed " + std::to_string(seed) + " node " + std::to_string(i) + ": " +
                          std::to_string(mine.size()) + " of " + std::to_string(owner_chain->size()) + " blocks";
                break;
            }
            for (std::size_t h = 0; h < mine.size(); ++h)
                if (chaincore::serialize_block(mine[h]) != chaincore::serialize_block((*owner_chain)[h]))
                    problem = "seed " + std::to_string(seed) + " node " + std::to_string(i) + ": block " +
                              std::to_string(h) + " differs";
            apps::ForumProjector replay_forum(owner_pub);
            apps::IdentityProjector replay_ident;
            (void)sim.store(i)->replay(sim.chain_id(), replay_forum);
            (void)sim.store(i)->replay(sim.chain_id(), replay_ident);
            if (!(replay_forum.state() == forum[i].state()) || !(replay_ident.state() == ident[i].state()))
                problem = "seed " + std::to_string(seed) + " node " + std::to_string(i) + ": projection mismatch";
            if (!(apps::project_forum(mine, owner_pub) == forum[i].state()))
                problem = "seed " + std::to_string(seed) + " node " + std::to_string(i) + ": batch projection mismatch";
            ++checked_nodes;
            checked_blocks += mine.size();
        }
    }
    const double elapsed = seconds_since(start);
    if (!problem.empty()) return {false, problem};
    return {true, std::to_string(kConvergenceSeeds) + " random topologies (n <= 12), " + std::to_string(checked_nodes) +
                      " node stores byte-identical to the owner (" + std::to_string(checked_blocks) +
                      " blocks), replay == incremental projection; " + fmt(elapsed, 1) + " s"};
}

Outcome golden_vectors(const std::filesystem::path& dir) {
    auto corpus = golden::build_corpus();
    auto blocks = chaincore::read_golden_blocks(dir / "blocks.hex");
    if (!blocks) return {false, blocks.error().message()};
    const auto owner = chaincore::generate_keypair(golden::seed_of(corpus.owner_seed_hex)).value();
    std::size_t ok_blocks = 0;
    for (std::size_t h = 0; h < blocks->size(); ++h) {
        const auto& b = (*blocks)[h];
        Status st = h == 0 ? chaincore::verify_genesis(b, owner.public_key) : chaincore::verify_block(b, owner.public_key);
        if (st && h > 0) st = chaincore::validate_successor((*blocks)[h - 1], b);
        if (st && h < corpus.blocks.size() && b == corpus.blocks[h]) ++ok_blocks;
    }
    std::ifstream in(dir / "records.jsonl", std::ios::binary);
    std::size_t records = 0;
    std::size_t ok_records = 0;
    for (std::string line; std::getline(in, line); ++records) {
        auto r = apps::parse_record(line);
        if (r && apps::verify_record(*r) && apps::record_to_json(*r) == line && records < corpus.records.size() &&
            *r == corpus.records[records])
            ++ok_records;
    }
    std::string oracle = "python oracle not run (no python3)";
    bool oracle_ok = true;
    if (std::system("python3 --version > /dev/null 2>&1") == 0) {
        const std::string cmd = "python3 \"" + (dir.parent_path() / "oracle" / "check_golden.py").string() + "\" \"" +
                                dir.string() + "\" > /dev/null 2>&1";
        oracle_ok = std::system(cmd.c_str()) == 0;
        oracle = oracle_ok ? "independently re-derived by the Python secp256k1/SHA-256 oracle"
                           : "Python oracle re-derivation FAILED";
    }
    const bool ok = blocks->size() >= 20 && records >= 20 && ok_blocks == blocks->size() && ok_records == records &&
                    ok_blocks == corpus.blocks.size() && ok_records == corpus.records.size() && oracle_ok;
    return {ok, std::to_string(ok_blocks) + "/" + std::to_string(blocks->size()) + " blocks and " +
                    std::to_string(ok_records) + "/" + std::to_string(records) + " records bit-exact; " + oracle};
}

}  // namespace

int main(int argc, char** argv) {
    std::filesystem::path golden_dir = std::filesystem::path(INFNOTE_SOURCE_DIR) / "tests" / "golden";
    std::string only;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--golden-dir" && i + 1 < argc)
            golden_dir = argv[++i];
        else
            only = a;
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"throughput", throughput},
        {"fig6b-linear", fig6b},
        {"fig6a-star", fig6a},
        {"equivocation", equivocation},
        {"tamper-suite", tamper},
        {"convergence", convergence},
        {"golden-vectors", [&] { return golden_vectors(golden_dir); }},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        if (!only.empty() && only != name) continue;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
