#include "infnote/simlab/throughput.hpp"

#include "infnote/apps/payload.hpp"
#include "infnote/apps/projection.hpp"
#include "infnote/chainstore/store.hpp"
#include "infnote/simlab/workload.hpp"

#include <chrono>
#include <random>

namespace infnote::simlab {

namespace fs = std::filesystem;
using chaincore::Block;
using Clock = std::chrono::steady_clock;

namespace {

struct Sealed {
    chaincore::KeyPair owner{};
    Block genesis;
    std::vector<Bytes> wire;
    std::vector<apps::ChainRecord> records;
};

Result<Sealed> seal_blocks(const ThroughputOptions& o, std::size_t count, std::size_t record_bytes) {
    Sealed out;
    auto key = chaincore::generate_keypair(chaincore::sha256(as_bytes("simlab-throughput:" + std::to_string(o.seed))));
    if (!key) return key.error();
    out.owner = *key;
    auto genesis = chaincore::make_genesis(out.owner, "throughput", 1'700'000'000);
    if (!genesis) return genesis.error();
    out.genesis = *genesis;
    PostFactory posts(o.seed);
    Block prev = out.genesis;
    for (std::size_t i = 0; i < count; ++i) {
        auto batch = posts.fill(o.payload_limit, record_bytes);
        if (!batch) return batch.error();
        auto payload = apps::encode_payload(*batch);
        if (!payload) return payload.error();
        chaincore::BlockDraft d{prev.chain_id, prev.height + 1, prev.time + 1, prev.hash, std::move(*payload)};
        auto block = chaincore::seal_block(std::move(d), out.owner);
        if (!block) return block.error();
        out.wire.push_back(chaincore::serialize_block(*block));
        out.records.insert(out.records.end(), batch->begin(), batch->end());
        prev = std::move(*block);
    }
    return out;
}

struct Timed {
    double seconds = 0;
    std::size_t records = 0;
};

/// One pass over the sealed blocks into a fresh store.
Result<Timed> run_round(const Sealed& sealed, const fs::path& dir, std::size_t count, apps::SignatureCache* cache) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    auto store = chainstore::ChainStore::open(dir);
    if (!store) return store.error();
    chainstore::ChainRegistryEntry entry;
    entry.chain_id = sealed.genesis.chain_id;
    entry.owner_pub = sealed.owner.public_key;
    entry.label = "throughput";
    if (auto st = (*store)->follow_chain(entry); !st) return st.error();
    if (auto r = (*store)->append_block(sealed.genesis); !r) return r.error();
    apps::ForumProjector forum(sealed.owner.public_key, cache);

    const auto start = Clock::now();
    for (std::size_t i = 0; i < count; ++i) {
        auto block = chaincore::deserialize_block(sealed.wire[i]);
        if (!block) return block.error();
        auto appended = (*store)->append_block(*block);
        if (!appended) return appended.error();
        if (*appended != chainstore::AppendOutcome::appended)
            return make_error(Errc::bad_height, "block was not appended");
        forum.apply(*block);
    }
    Timed t;
    t.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    t.records = forum.state().posts.size();
    if (forum.state().skipped_records != 0) return make_error(Errc::bad_signature, "projection skipped records");
    store->reset();
    fs::remove_all(dir, ec);
    return t;
}

}  // namespace

Result<ThroughputReport> measure_throughput(const ThroughputOptions& o) {
    if (o.post_size < 1) return make_error(Errc::invalid_argument, "post size must be at least 1");
    if (o.blocks_per_round < 1) return make_error(Errc::invalid_argument, "need at least one block per round");
    const auto setup_start = Clock::now();

    ThroughputReport report;
    report.requested_post_bytes = o.post_size;
    report.record_bytes = PostFactory::effective_bytes(o.post_size);
    report.records_per_block = PostFactory::records_per_payload(o.payload_limit, report.record_bytes);
    if (report.records_per_block == 0) return make_error(Errc::invalid_argument, "payload limit below one record");

    const std::size_t sealed_count = std::max(o.blocks_per_round, o.cold_blocks);
    auto sealed = seal_blocks(o, sealed_count, report.record_bytes);
    if (!sealed) return sealed.error();
    report.block_bytes = sealed->wire.front().size();

    fs::path root;
    bool owns_root = false;
    if (o.work_dir) {
        root = *o.work_dir;
    } else {
        std::random_device rd;
        root = fs::temp_directory_path() / ("infnote-throughput-" + std::to_string(rd()));
        owns_root = true;
    }
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) return make_error(Errc::io_error, "cannot create " + root.string());

    // Pool admission already checked every record; the cache remembers it.
    apps::SignatureCache warm(sealed->records.size() + 16);
    for (const auto& r : sealed->records)
        if (auto st = apps::verify_record(r, &warm); !st) return st.error();
    report.setup_seconds = std::chrono::duration<double>(Clock::now() - setup_start).count();

    std::size_t round = 0;
    do {
        auto t = run_round(*sealed, root / ("warm-" + std::to_string(round++)), o.blocks_per_round, &warm);
        if (!t) return t.error();
        report.seconds += t->seconds;
        report.records += t->records;
        report.blocks += o.blocks_per_round;
    } while (report.seconds < o.duration_s);
    report.posts_per_second = static_cast<double>(report.records) / report.seconds;
    report.blocks_per_second = static_cast<double>(report.blocks) / report.seconds;

    if (o.cold_blocks > 0) {
        apps::SignatureCache cold(sealed->records.size() + 16);
        auto t = run_round(*sealed, root / "cold", o.cold_blocks, &cold);
        if (!t) return t.error();
        report.cold_posts_per_second = static_cast<double>(t->records) / t->seconds;
    }
    if (owns_root) fs::remove_all(root, ec);
    return report;
}

nlohmann::json throughput_to_json(const ThroughputReport& r) {
    nlohmann::json out = {{"requested_post_bytes", r.requested_post_bytes},
                          {"record_bytes", r.record_bytes},
                          {"records_per_block", r.records_per_block},
                          {"block_bytes", r.block_bytes},
                          {"blocks", r.blocks},
                          {"records", r.records},
                          {"seconds", r.seconds},
                          {"posts_per_second", r.posts_per_second},
                          {"blocks_per_second", r.blocks_per_second},
                          {"setup_seconds", r.setup_seconds}};
    out["cold_posts_per_second"] =
        r.cold_posts_per_second ? nlohmann::json(*r.cold_posts_per_second) : nlohmann::json(nullptr);
    return out;
}

}  // namespace infnote::simlab
