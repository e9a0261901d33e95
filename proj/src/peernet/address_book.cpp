#include "infnote/peernet/address_book.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace infnote::peernet {

void AddressBook::add(const PeerAddress& address) {
    if (address.port == 0 || address.host.empty()) return;
    Key key{address.host, address.port};
    if (auto it = entries_.find(key); it != entries_.end()) {
        it->second.last_seen = std::max(it->second.last_seen, address.last_seen);
        return;
    }
    entries_.emplace(std::move(key), address);
    evict();
}

void AddressBook::evict() {
    while (entries_.size() > capacity_) {
        auto victim = std::max_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
            if (a.second.failures != b.second.failures) return a.second.failures < b.second.failures;
            return a.second.last_seen > b.second.last_seen;
        });
        entries_.erase(victim);
    }
}

void AddressBook::record_failure(const std::string& host, std::uint16_t port) {
    if (auto it = entries_.find({host, port}); it != entries_.end()) ++it->second.failures;
}

void AddressBook::record_success(const std::string& host, std::uint16_t port, std::uint64_t now) {
    auto [it, inserted] = entries_.try_emplace({host, port}, PeerAddress{host, port, now, 0});
    it->second.failures = 0;
    it->second.last_seen = std::max(it->second.last_seen, now);
    if (inserted) evict();
}

std::optional<PeerAddress> AddressBook::find(const std::string& host, std::uint16_t port) const {
    auto it = entries_.find({host, port});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::vector<PeerAddress> AddressBook::candidates() const {
    auto out = entries();
    std::stable_sort(out.begin(), out.end(), [this](const PeerAddress& a, const PeerAddress& b) {
        if (is_demoted(a) != is_demoted(b)) return !is_demoted(a);
        if (a.failures != b.failures) return a.failures < b.failures;
        return a.last_seen > b.last_seen;
    });
    return out;
}

std::vector<PeerAddress> AddressBook::entries() const {
    std::vector<PeerAddress> out;
    out.reserve(entries_.size());
    for (const auto& [key, a] : entries_) out.push_back(a);
    return out;
}

Status AddressBook::save(const std::filesystem::path& path) const {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        for (const auto& [key, a] : entries_)
            out << a.host << ' ' << a.port << ' ' << a.last_seen << ' ' << a.failures << '\n';
        if (!out) return make_error(Errc::io_error, "write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) return make_error(Errc::io_error, "rename " + tmp.string() + ": " + ec.message());
    return {};
}

Result<AddressBook> AddressBook::load(const std::filesystem::path& path, std::size_t capacity) {
    AddressBook book(capacity);
    std::ifstream in(path);
    if (!in) {
        if (!std::filesystem::exists(path)) return book;
        return make_error(Errc::io_error, "cannot read " + path.string());
    }
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        PeerAddress a;
        unsigned long port = 0;
        if (!(fields >> a.host >> port >> a.last_seen >> a.failures) || port == 0 || port > 65535)
            return make_error(Errc::invalid_entry, path.string() + ":" + std::to_string(number));
        a.port = static_cast<std::uint16_t>(port);
        Key key{a.host, a.port};
        book.entries_[key] = a;
    }
    book.evict();
    return book;
}

}  // namespace infnote::peernet
