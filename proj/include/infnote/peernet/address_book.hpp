#pragma once

#include "infnote/common/result.hpp"
#include "infnote/wire/message.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace infnote::peernet {

using wire::PeerAddress;

/// Known peer addresses keyed by (host, port).
class AddressBook {
public:
    static constexpr std::size_t kDefaultCapacity = 1024;
    /// Consecutive failures after which an address is tried last.
    static constexpr std::uint32_t kDemoteAfter = 3;

    explicit AddressBook(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {}

    /// Inserts or merges (keeps the newer last_seen). Evicts when over capacity.
    void add(const PeerAddress& address);
    void record_failure(const std::string& host, std::uint16_t port);
    /// A completed handshake: failures reset, last_seen refreshed.
    void record_success(const std::string& host, std::uint16_t port, std::uint64_t now);

    std::optional<PeerAddress> find(const std::string& host, std::uint16_t port) const;
    bool is_demoted(const PeerAddress& address) const { return address.failures >= kDemoteAfter; }

    /// Dial order: fewest failures, then most recently seen. Demoted last.
    std::vector<PeerAddress> candidates() const;
    std::vector<PeerAddress> entries() const;
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }

    /// File format: one `host port last_seen failures` line per entry.
    Status save(const std::filesystem::path& path) const;
    static Result<AddressBook> load(const std::filesystem::path& path, std::size_t capacity = kDefaultCapacity);

private:
    using Key = std::pair<std::string, std::uint16_t>;
    void evict();

    std::size_t capacity_;
    std::map<Key, PeerAddress> entries_;
};

}  // namespace infnote::peernet
