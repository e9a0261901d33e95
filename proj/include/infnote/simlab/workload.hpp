#pragma once

#include "infnote/apps/record.hpp"

#include <cstdint>
#include <vector>

namespace infnote::simlab {

/// Signed posts of an exact encoded size, deterministic in the seed.
class PostFactory {
public:
    explicit PostFactory(std::uint64_t seed, std::size_t authors = 16);

    /// Encoded size of a post with empty content.
    static std::size_t min_record_bytes();
    /// Encoded size of a post with the largest allowed content.
    static std::size_t max_record_bytes();
    /// The size `requested` is clamped to.
    static std::size_t effective_bytes(std::size_t requested);
    /// Posts of `record_bytes` that fit a payload of at most `payload_limit`.
    static std::size_t records_per_payload(std::size_t payload_limit, std::size_t record_bytes);

    Result<apps::ChainRecord> make(std::size_t record_bytes);
    Result<std::vector<apps::ChainRecord>> fill(std::size_t payload_limit, std::size_t record_bytes);

private:
    std::vector<apps::KeyPair> authors_;
    std::uint64_t next_time_;
    std::size_t next_author_ = 0;
};

}  // namespace infnote::simlab
