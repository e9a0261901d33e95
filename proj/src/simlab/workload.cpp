#include "infnote/simlab/workload.hpp"

#include <algorithm>

namespace infnote::simlab {

namespace {

// Thirteen digits for every client_time the factory hands out, so the
// envelope length never changes.
constexpr std::uint64_t kTimeBase = 1'000'000'000'000;

std::size_t empty_post_bytes() {
    static const std::size_t size = [] {
        auto key = chaincore::generate_keypair(chaincore::sha256(as_bytes("post-size-probe"))).value();
        return apps::record_to_json(apps::make_post(key, "", std::nullopt, kTimeBase).value()).size();
    }();
    return size;
}

}  // namespace

PostFactory::PostFactory(std::uint64_t seed, std::size_t authors) : next_time_(kTimeBase) {
    for (std::size_t i = 0; i < std::max<std::size_t>(authors, 1); ++i) {
        auto material = "simlab-author:" + std::to_string(seed) + ":" + std::to_string(i);
        authors_.push_back(chaincore::generate_keypair(chaincore::sha256(as_bytes(material))).value());
    }
}

std::size_t PostFactory::min_record_bytes() { return empty_post_bytes(); }

std::size_t PostFactory::max_record_bytes() { return empty_post_bytes() + apps::kMaxContentBytes; }

std::size_t PostFactory::effective_bytes(std::size_t requested) {
    return std::clamp(requested, min_record_bytes(), max_record_bytes());
}

std::size_t PostFactory::records_per_payload(std::size_t payload_limit, std::size_t record_bytes) {
    // Brackets plus one comma between neighbours: 2 + n * size + (n - 1).
    if (payload_limit < record_bytes + 2) return 0;
    return (payload_limit - 1) / (record_bytes + 1);
}

Result<apps::ChainRecord> PostFactory::make(std::size_t record_bytes) {
    const std::size_t size = effective_bytes(record_bytes);
    std::string content(size - min_record_bytes(), 'a');
    for (std::size_t i = 0; i < content.size(); ++i) content[i] = static_cast<char>('a' + (i + next_time_) % 26);
    const auto& author = authors_[next_author_++ % authors_.size()];
    return apps::make_post(author, std::move(content), std::nullopt, next_time_++);
}

Result<std::vector<apps::ChainRecord>> PostFactory::fill(std::size_t payload_limit, std::size_t record_bytes) {
    const std::size_t n = records_per_payload(payload_limit, effective_bytes(record_bytes));
    std::vector<apps::ChainRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = make(record_bytes);
        if (!r) return r.error();
        out.push_back(std::move(*r));
    }
    return out;
}

}  // namespace infnote::simlab
