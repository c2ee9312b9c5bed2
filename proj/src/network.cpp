#include "cpmoe/network.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace cpmoe::data {

using json = nlohmann::json;

std::vector<std::vector<int>> TrafficNetwork::upstream() const {
    std::vector<std::vector<int>> up(links.size());
    for (const auto& e : edges) up[e.to].push_back(e.from);
    for (auto& v : up) std::sort(v.begin(), v.end());
    return up;
}

std::vector<std::vector<int>> TrafficNetwork::downstream() const {
    std::vector<std::vector<int>> down(links.size());
    for (const auto& e : edges) down[e.from].push_back(e.to);
    for (auto& v : down) std::sort(v.begin(), v.end());
    return down;
}

void validate_network(const TrafficNetwork& net) {
    int n = net.n_links();
    if (n == 0) throw std::runtime_error("network has no links");
    for (int i = 0; i < n; ++i)
        if (net.links[i].id != i) throw std::runtime_error("link ids must be dense 0..N-1 in order");
    size_t d = net.links[0].attrs.size();
    for (const auto& l : net.links)
        if (l.attrs.size() != d) throw std::runtime_error("links disagree on attribute dimension");
    std::set<std::pair<int, int>> seen;
    for (const auto& e : net.edges) {
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
            throw std::runtime_error("edge references unknown link id");
        if (e.from == e.to) throw std::runtime_error("self-loop edge");
        if (!(e.r_km > 0.0)) throw std::runtime_error("edge distance must be positive");
        if (!seen.insert({e.from, e.to}).second) throw std::runtime_error("duplicate edge");
    }
}

TrafficNetwork load_network(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open network file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("network file is not valid JSON: " + std::string(e.what()));
    }
    if (j.value("format_version", 0) != 1) throw std::runtime_error("unsupported network format_version");
    TrafficNetwork net;
    for (const auto& lj : j.at("links")) {
        LinkInfo l;
        l.id = lj.at("id").get<int>();
        l.attrs = lj.at("attrs").get<std::vector<double>>();
        l.lon = lj.at("lon").get<double>();
        l.lat = lj.at("lat").get<double>();
        net.links.push_back(std::move(l));
    }
    for (const auto& ej : j.at("edges")) {
        DirectedEdge e;
        e.from = ej.at("from").get<int>();
        e.to = ej.at("to").get<int>();
        e.r_km = ej.at("r_km").get<double>();
        net.edges.push_back(e);
    }
    validate_network(net);
    return net;
}

void save_network(const TrafficNetwork& net, const std::string& path) {
    json j;
    j["format_version"] = 1;
    json links = json::array();
    for (const auto& l : net.links)
        links.push_back({{"id", l.id}, {"attrs", l.attrs}, {"lon", l.lon}, {"lat", l.lat}});
    json edges = json::array();
    for (const auto& e : net.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"r_km", e.r_km}});
    j["links"] = std::move(links);
    j["edges"] = std::move(edges);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open network file for writing: " + path);
    f << j.dump(2) << '\n';
}

std::vector<std::vector<int>> k_hop_neighbors(const TrafficNetwork& net, int k) {
    int n = net.n_links();
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : net.edges) {
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    std::vector<std::vector<int>> out(n);
    if (k <= 0) return out;
    std::vector<int> dist(n);
    for (int s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[s] = 0;
        std::deque<int> q{s};
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            if (dist[u] == k) continue;
            for (int v : adj[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                    out[s].push_back(v);
                }
        }
        std::sort(out[s].begin(), out[s].end());
    }
    return out;
}

EdgeSetIdx build_edge_set(const TrafficNetwork& net, NeighborMode mode) {
    int n = net.n_links();
    // Aggregation edges (neighbor j -> aggregated-into i).
    std::vector<std::tuple<int, int, double>> pairs;  // (dst, src, r)
    if (mode == NeighborMode::Upstream) {
        for (const auto& e : net.edges) pairs.emplace_back(e.to, e.from, e.r_km);
    } else if (mode == NeighborMode::Downstream) {
        for (const auto& e : net.edges) pairs.emplace_back(e.from, e.to, e.r_km);
    } else {
        std::set<std::pair<int, int>> seen;
        for (const auto& e : net.edges) {
            if (seen.insert({e.to, e.from}).second) pairs.emplace_back(e.to, e.from, e.r_km);
            if (seen.insert({e.from, e.to}).second) pairs.emplace_back(e.from, e.to, e.r_km);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    EdgeSetIdx idx;
    int E = static_cast<int>(pairs.size());
    idx.r = Tensor({std::max(E, 1), 1});
    idx.by_dst.offsets.assign(n + 1, 0);
    for (int e = 0; e < E; ++e) {
        auto [d, s, r] = pairs[e];
        idx.dst.push_back(d);
        idx.src.push_back(s);
        idx.r.data[e] = r;
        idx.by_dst.offsets[d + 1]++;
        idx.by_dst.items.push_back(e);
    }
    if (E == 0) idx.r = Tensor({1, 1});  // placeholder, unused
    for (int i = 0; i < n; ++i) idx.by_dst.offsets[i + 1] += idx.by_dst.offsets[i];
    return idx;
}

nn::Csr build_khop_csr(const TrafficNetwork& net, int k) {
    auto nbrs = k_hop_neighbors(net, k);
    nn::Csr csr;
    csr.offsets.assign(nbrs.size() + 1, 0);
    for (size_t i = 0; i < nbrs.size(); ++i) {
        csr.offsets[i + 1] = csr.offsets[i] + static_cast<int32_t>(nbrs[i].size());
        for (int j : nbrs[i]) csr.items.push_back(j);
    }
    return csr;
}

}  // namespace cpmoe::data
