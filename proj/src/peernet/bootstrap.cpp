#include "infnote/peernet/bootstrap.hpp"

#include <set>

namespace infnote::peernet {

std::string_view peer_source_name(PeerSource source) {
    switch (source) {
        case PeerSource::manual: return "manual";
        case PeerSource::address_book: return "address-book";
        case PeerSource::dns_seed: return "dns-seed";
        case PeerSource::hard_coded: return "hard-coded";
    }
    return "unknown";
}

Result<BootstrapReport> bootstrap(const BootstrapConfig& config, AddressBook& book, const Resolver& resolve,
                                  const Dialer& dial, std::uint64_t now, BootstrapReport* report) {
    BootstrapReport local;
    BootstrapReport& out = report ? *report : local;
    out = {};
    std::set<std::pair<std::string, std::uint16_t>> tried;

    auto try_all = [&](const std::vector<PeerAddress>& list, PeerSource source) {
        for (const auto& a : list) {
            if (out.connected >= config.min_peers) return;
            if (a.port == 0 || !tried.insert({a.host, a.port}).second) continue;
            // Sources other than the book get an entry so failures are counted.
            book.add({a.host, a.port, a.last_seen, 0});
            const bool ok = dial(a);
            if (ok) {
                book.record_success(a.host, a.port, now);
                ++out.connected;
            } else {
                book.record_failure(a.host, a.port);
            }
            out.attempts.push_back({a, source, ok});
        }
    };

    try_all(config.manual, PeerSource::manual);
    try_all(book.candidates(), PeerSource::address_book);
    for (const auto& seed : config.dns_seeds) {
        if (out.connected >= config.min_peers) break;
        std::vector<PeerAddress> resolved;
        if (resolve)
            for (const auto& host : resolve(seed)) resolved.push_back({host, config.dns_port, 0, 0});
        try_all(resolved, PeerSource::dns_seed);
    }
    try_all(config.hard_coded, PeerSource::hard_coded);

    if (out.connected == 0)
        return make_error(Errc::bootstrap_failed, std::to_string(out.attempts.size()) + " addresses tried");
    return out;
}

std::chrono::seconds Backoff::next() {
    const unsigned shift = std::min(attempts_, 16u);
    ++attempts_;
    return std::min(kInitial * (1u << shift), kCap);
}

}  // namespace infnote::peernet
