#pragma once

#include "infnote/common/result.hpp"
#include "infnote/wire/message.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace infnote::simlab {

using wire::NodeKind;

struct LinkParams {
    double latency_ms = 100.0;
    double bandwidth_bytes_per_s = 1e6;

    bool operator==(const LinkParams&) const = default;
};

/// Named link calibrations, each fitted to one measured aggregate:
///   paper-wan   1 MiB per hop in 1.46 s (linear, diameter 10 in 14.6 s)
///   paper-star  1 MiB per hop in 0.65 s (star, 1.3 s over two hops)
///   lan         1 ms, 100 MB/s
std::optional<LinkParams> profile(std::string_view name);
std::vector<std::string> profile_names();

/// Time to move `bytes` across one link: latency plus serialization.
double hop_ms(const LinkParams& link, std::size_t bytes);

struct SimNode {
    std::uint32_t id = 0;
    NodeKind kind = NodeKind::full;

    bool operator==(const SimNode&) const = default;
};

struct SimLink {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    LinkParams params;

    bool operator==(const SimLink&) const = default;
};

/// Undirected graph with node ids 0..n-1 and one chain owner.
struct Topology {
    std::vector<SimNode> nodes;
    std::vector<SimLink> links;
    std::uint32_t owner = 0;

    /// Connected, ids dense, owner is a full node, links positive and unique.
    Status validate() const;
    /// Hop counts from `from`; unreachable nodes get -1.
    std::vector<int> hops_from(std::uint32_t from) const;
    /// Largest hop count between any two nodes.
    int diameter() const;
    std::vector<std::uint32_t> neighbours(std::uint32_t node) const;

    bool operator==(const Topology&) const = default;
};

enum class TopologyKind { star, linear, custom };

std::optional<TopologyKind> parse_topology_kind(std::string_view name);

/// star: node 0 is the centre and the owner sits at leaf 1. linear: a path
/// 0-1-...-(n-1) with the owner at node 0. Both need n >= 2.
Result<Topology> build_topology(TopologyKind kind, std::size_t n, const LinkParams& link,
                                const std::vector<std::uint32_t>& light_nodes = {});

/// Complete graph on n nodes, owner 0.
Result<Topology> build_mesh(std::size_t n, const LinkParams& link);

/// Random spanning tree plus `extra_edges` random chords, with per-link
/// parameters drawn around `link`. Owner 0. Deterministic in `seed`.
Result<Topology> random_connected(std::size_t n, std::uint64_t seed, const LinkParams& link,
                                  std::size_t extra_edges = 0);

}  // namespace infnote::simlab
