#include "infnote/simlab/topology.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>

namespace infnote::simlab {

std::optional<LinkParams> profile(std::string_view name) {
    constexpr double kMiB = 1048576.0;
    // 100 ms of latency plus the remainder of the per-hop budget spent
    // serializing 1 MiB.
    if (name == "paper-wan") return LinkParams{100.0, kMiB / 1.36};
    if (name == "paper-star") return LinkParams{100.0, kMiB / 0.55};
    if (name == "lan") return LinkParams{1.0, 100e6};
    return std::nullopt;
}

std::vector<std::string> profile_names() { return {"paper-wan", "paper-star", "lan"}; }

double hop_ms(const LinkParams& link, std::size_t bytes) {
    return link.latency_ms + 1000.0 * static_cast<double>(bytes) / link.bandwidth_bytes_per_s;
}

Status Topology::validate() const {
    if (nodes.size() < 2) return make_error(Errc::invalid_topology, "need at least two nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id != i) return make_error(Errc::invalid_topology, "node ids must be 0..n-1 in order");
    if (owner >= nodes.size()) return make_error(Errc::invalid_topology, "owner is not a node");
    if (nodes[owner].kind != NodeKind::full) return make_error(Errc::invalid_topology, "owner must be a full node");
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& l : links) {
        if (l.a >= nodes.size() || l.b >= nodes.size() || l.a == l.b)
            return make_error(Errc::invalid_topology, "link endpoints must be two distinct nodes");
        if (!(l.params.latency_ms > 0) || !(l.params.bandwidth_bytes_per_s > 0))
            return make_error(Errc::invalid_topology, "latency and bandwidth must be positive");
        if (!seen.insert(std::minmax(l.a, l.b)).second) return make_error(Errc::invalid_topology, "duplicate link");
    }
    auto hops = hops_from(0);
    if (std::find(hops.begin(), hops.end(), -1) != hops.end())
        return make_error(Errc::invalid_topology, "graph is not connected");
    return {};
}

std::vector<std::uint32_t> Topology::neighbours(std::uint32_t node) const {
    std::vector<std::uint32_t> out;
    for (const auto& l : links) {
        if (l.a == node) out.push_back(l.b);
        if (l.b == node) out.push_back(l.a);
    }
    return out;
}

std::vector<int> Topology::hops_from(std::uint32_t from) const {
    std::vector<int> dist(nodes.size(), -1);
    if (from >= nodes.size()) return dist;
    std::deque<std::uint32_t> queue{from};
    dist[from] = 0;
    while (!queue.empty()) {
        auto u = queue.front();
        queue.pop_front();
        for (auto v : neighbours(u)) {
            if (dist[v] >= 0) continue;
            dist[v] = dist[u] + 1;
            queue.push_back(v);
        }
    }
    return dist;
}

int Topology::diameter() const {
    int best = 0;
    for (std::uint32_t i = 0; i < nodes.size(); ++i)
        for (int d : hops_from(i)) best = std::max(best, d);
    return best;
}

std::optional<TopologyKind> parse_topology_kind(std::string_view name) {
    if (name == "star") return TopologyKind::star;
    if (name == "linear") return TopologyKind::linear;
    if (name == "custom") return TopologyKind::custom;
    return std::nullopt;
}

namespace {

Topology empty_nodes(std::size_t n, const std::vector<std::uint32_t>& light_nodes) {
    Topology t;
    for (std::uint32_t i = 0; i < n; ++i) t.nodes.push_back({i, NodeKind::full});
    for (auto id : light_nodes)
        if (id < n) t.nodes[id].kind = NodeKind::light;
    return t;
}

}  // namespace

Result<Topology> build_topology(TopologyKind kind, std::size_t n, const LinkParams& link,
                                const std::vector<std::uint32_t>& light_nodes) {
    if (n < 2) return make_error(Errc::invalid_topology, "need at least two nodes");
    Topology t = empty_nodes(n, light_nodes);
    switch (kind) {
        case TopologyKind::star:
            for (std::uint32_t i = 1; i < n; ++i) t.links.push_back({0, i, link});
            t.owner = 1;
            break;
        case TopologyKind::linear:
            for (std::uint32_t i = 1; i < n; ++i) t.links.push_back({i - 1, i, link});
            t.owner = 0;
            break;
        case TopologyKind::custom:
            return make_error(Errc::invalid_topology, "custom topologies are given explicitly");
    }
    if (auto st = t.validate(); !st) return st.error();
    return t;
}

Result<Topology> build_mesh(std::size_t n, const LinkParams& link) {
    if (n < 2) return make_error(Errc::invalid_topology, "need at least two nodes");
    Topology t = empty_nodes(n, {});
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) t.links.push_back({i, j, link});
    return t;
}

Result<Topology> random_connected(std::size_t n, std::uint64_t seed, const LinkParams& link,
                                  std::size_t extra_edges) {
    if (n < 2) return make_error(Errc::invalid_topology, "need at least two nodes");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    auto jitter = [&] { return LinkParams{link.latency_ms * scale(rng), link.bandwidth_bytes_per_s * scale(rng)}; };
    Topology t = empty_nodes(n, {});
    std::set<std::pair<std::uint32_t, std::uint32_t>> present;
    for (std::uint32_t i = 1; i < n; ++i) {
        const auto parent = static_cast<std::uint32_t>(rng() % i);
        t.links.push_back({parent, i, jitter()});
        present.insert({parent, i});
    }
    const std::size_t max_extra = n * (n - 1) / 2 - (n - 1);
    for (std::size_t k = 0; k < std::min(extra_edges, max_extra);) {
        auto a = static_cast<std::uint32_t>(rng() % n);
        auto b = static_cast<std::uint32_t>(rng() % n);
        if (a == b) continue;
        auto key = std::minmax(a, b);
        if (!present.insert(key).second) continue;
        t.links.push_back({key.first, key.second, jitter()});
        ++k;
    }
    return t;
}

}  // namespace infnote::simlab
