#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hetformer/content.hpp"
#include "hetformer/graph.hpp"
#include "hetformer/rwr.hpp"

namespace hetformer::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("hetformer_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

// Two news, three posts, three users; every news has neighbors of all types.
inline HetGraph toy_graph() {
    std::vector<NodeRecord> nodes = {
        {1, NodeType::News, NewsLabel::Fake}, {2, NodeType::News, NewsLabel::Real},
        {10, NodeType::Post, std::nullopt},  {11, NodeType::Post, std::nullopt},
        {12, NodeType::Post, std::nullopt},  {20, NodeType::User, std::nullopt},
        {21, NodeType::User, std::nullopt},  {22, NodeType::User, std::nullopt},
    };
    std::vector<EdgeRecord> edges = {
        {1, 10, EdgeType::NewsPost}, {1, 11, EdgeType::NewsPost}, {2, 12, EdgeType::NewsPost},
        {10, 20, EdgeType::PostUser}, {11, 21, EdgeType::PostUser}, {12, 21, EdgeType::PostUser},
        {12, 22, EdgeType::PostUser}, {1, 20, EdgeType::NewsUser}, {2, 22, EdgeType::NewsUser},
        {10, 11, EdgeType::PostPost}, {20, 22, EdgeType::UserUser},
    };
    return HetGraph::build(std::move(nodes), std::move(edges));
}

// Random connected graph of `n` nodes: node 0 is news, the rest cycle
// through post/user/news; a random spanning tree plus `extra` edges.
// Only edge types the endpoint types allow are used.
inline HetGraph random_graph(std::size_t n, std::size_t extra, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<NodeRecord> nodes;
    const NodeType cycle[3] = {NodeType::Post, NodeType::User, NodeType::News};
    for (std::size_t i = 0; i < n; ++i) {
        const NodeType t = i == 0 ? NodeType::News : cycle[(i - 1) % 3];
        std::optional<NewsLabel> label;
        if (t == NodeType::News) label = i % 2 ? NewsLabel::Real : NewsLabel::Fake;
        nodes.push_back({i + 1, t, label});
    }
    auto edge_type = [](NodeType a, NodeType b) -> std::optional<EdgeType> {
        for (std::size_t k = 0; k < kEdgeTypeCount; ++k) {
            const auto e = static_cast<EdgeType>(k);
            const auto [x, y] = endpoint_types(e);
            if ((x == a && y == b) || (x == b && y == a)) return e;
        }
        return std::nullopt;
    };
    std::vector<EdgeRecord> edges;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    auto try_add = [&](std::size_t a, std::size_t b) {
        if (a == b) return false;
        const auto e = edge_type(nodes[a].type, nodes[b].type);
        if (!e || !seen.emplace(std::min(a, b), std::max(a, b)).second) return false;
        const auto [x, y] = endpoint_types(*e);
        if (nodes[a].type == x && nodes[b].type == y) {
            edges.push_back({a + 1, b + 1, *e});
        } else {
            edges.push_back({b + 1, a + 1, *e});
        }
        return true;
    };
    for (std::size_t i = 1; i < n; ++i) {
        // News-news edges do not exist, so retry until the parent fits.
        while (!try_add(i, std::uniform_int_distribution<std::size_t>(0, i - 1)(rng))) {
        }
    }
    for (std::size_t k = 0, tries = 0; k < extra && tries < 100 * extra; ++tries) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        if (try_add(pick(rng), pick(rng))) ++k;
    }
    return HetGraph::build(std::move(nodes), std::move(edges));
}

}  // namespace hetformer::testing
