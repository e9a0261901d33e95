#pragma once

#include "infnote/common/result.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>

namespace infnote::simlab {

struct ThroughputOptions {
    /// Requested encoded record size; clamped to what a signed post can be.
    std::size_t post_size = 250;
    /// Timed work continues in rounds until this much has been measured.
    double duration_s = 3.0;
    /// Pre-sealed blocks replayed into a fresh store every round.
    std::size_t blocks_per_round = 4;
    /// Blocks pushed through with an empty signature cache; 0 skips it.
    std::size_t cold_blocks = 1;
    /// Payload budget per block.
    std::size_t payload_limit = std::size_t{1} << 20;
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> work_dir;
};

struct ThroughputReport {
    std::size_t requested_post_bytes = 0;
    std::size_t record_bytes = 0;
    std::size_t records_per_block = 0;
    std::size_t block_bytes = 0;
    std::size_t blocks = 0;
    std::size_t records = 0;
    double seconds = 0;
    /// Record signatures already in the cache from pool admission.
    double posts_per_second = 0;
    double blocks_per_second = 0;
    /// Every record signature checked during projection.
    std::optional<double> cold_posts_per_second;
    double setup_seconds = 0;
};

/// Times the receive path on pre-sealed blocks: wire bytes are parsed (hash
/// recomputed), appended to a ChainStore (owner signature and successor
/// checks) and folded into a forum projection (payload decode and record
/// checks). Signing and sealing are excluded.
Result<ThroughputReport> measure_throughput(const ThroughputOptions& options);

nlohmann::json throughput_to_json(const ThroughputReport& report);

}  // namespace infnote::simlab
