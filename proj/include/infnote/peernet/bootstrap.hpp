#pragma once

#include "infnote/peernet/address_book.hpp"

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace infnote::peernet {

struct BootstrapConfig {
    /// User-specified addresses, tried first.
    std::vector<PeerAddress> manual;
    /// Hostnames whose resolution yields several node addresses.
    std::vector<std::string> dns_seeds;
    /// Port assumed for addresses learned from DNS seeds.
    std::uint16_t dns_port = 7420;
    std::vector<PeerAddress> hard_coded;
    std::size_t min_peers = 3;
};

enum class PeerSource { manual, address_book, dns_seed, hard_coded };
std::string_view peer_source_name(PeerSource source);

struct DialAttempt {
    PeerAddress address;
    PeerSource source = PeerSource::manual;
    bool connected = false;
};

struct BootstrapReport {
    std::vector<DialAttempt> attempts;
    std::size_t connected = 0;
};

/// Hostname -> addresses. Tests stub it; the live node uses the system resolver.
using Resolver = std::function<std::vector<std::string>(const std::string& hostname)>;
/// Tries to open and handshake a session. True on success.
using Dialer = std::function<bool(const PeerAddress& address)>;

/// Dials manual addresses, then the address book, then DNS seeds, then the
/// hard-coded list, stopping once `min_peers` sessions are up. Outcomes are
/// recorded in the book. Zero sessions is bootstrap-failed; the report is
/// still filled in through `report` when given.
Result<BootstrapReport> bootstrap(const BootstrapConfig& config, AddressBook& book, const Resolver& resolve,
                                  const Dialer& dial, std::uint64_t now, BootstrapReport* report = nullptr);

/// Exponential retry delay: 1 s, 2 s, 4 s, ... capped at 5 minutes.
class Backoff {
public:
    static constexpr std::chrono::seconds kInitial{1};
    static constexpr std::chrono::seconds kCap{300};

    std::chrono::seconds next();
    void reset() { attempts_ = 0; }
    unsigned attempts() const { return attempts_; }

private:
    unsigned attempts_ = 0;
};

}  // namespace infnote::peernet
