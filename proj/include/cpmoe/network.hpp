#pragma once

#include <string>
#include <vector>

#include "cpmoe/ops.hpp"
#include "cpmoe/tensor.hpp"

namespace cpmoe::data {

struct LinkInfo {
    int id = 0;
    std::vector<double> attrs;  // static attributes (length, lanes, ...)
    double lon = 0.0, lat = 0.0;
};

// Directed edge from -> to: traffic on `from` flows into `to`, so `to` is
// downstream of `from`. r_km is the physical distance between the links.
struct DirectedEdge {
    int from = 0, to = 0;
    double r_km = 0.0;
};

struct TrafficNetwork {
    std::vector<LinkInfo> links;
    std::vector<DirectedEdge> edges;

    int n_links() const { return static_cast<int>(links.size()); }
    int attr_dim() const { return links.empty() ? 0 : static_cast<int>(links[0].attrs.size()); }
    // upstream(i) = {from : from->i}, downstream(i) = {to : i->to}
    std::vector<std::vector<int>> upstream() const;
    std::vector<std::vector<int>> downstream() const;
};

// Link ids must be dense 0..N-1; edges must reference existing links and
// carry positive distances. Throws std::runtime_error otherwise.
void validate_network(const TrafficNetwork& net);
TrafficNetwork load_network(const std::string& path);
void save_network(const TrafficNetwork& net, const std::string& path);

// Links within k undirected hops, excluding the link itself; each list
// sorted ascending. k = 0 yields empty sets.
std::vector<std::vector<int>> k_hop_neighbors(const TrafficNetwork& net, int k);

// Edge list grouped by destination for a given aggregation direction, plus
// the k-hop pooling csr; precomputed once per (network, config).
struct EdgeSetIdx {
    std::vector<int32_t> src, dst;  // parallel arrays, sorted by dst
    Tensor r;                       // [E,1] distances aligned with src/dst
    nn::Csr by_dst;                 // segments over dst
};

enum class NeighborMode { Upstream, Downstream, Undirected };
EdgeSetIdx build_edge_set(const TrafficNetwork& net, NeighborMode mode);
nn::Csr build_khop_csr(const TrafficNetwork& net, int k);

}  // namespace cpmoe::data
