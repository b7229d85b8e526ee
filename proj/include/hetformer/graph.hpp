#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hetformer/error.hpp"

namespace hetformer {

using NodeId = std::uint64_t;

enum class NodeType : std::uint8_t { News = 0, Post = 1, User = 2 };
inline constexpr std::size_t kNodeTypeCount = 3;

enum class EdgeType : std::uint8_t { NewsPost = 0, NewsUser = 1, PostUser = 2, PostPost = 3, UserUser = 4 };
inline constexpr std::size_t kEdgeTypeCount = 5;

enum class NewsLabel : std::uint8_t { Fake = 0, Real = 1 };

// Which relation kinds a dataset family may contain. PHEME has no
// "follow" relation, so user-user edges are rejected there.
enum class GraphSchema { FakeNewsNet, Pheme };

std::string_view to_string(NodeType t);
std::string_view to_string(EdgeType t);
std::string_view to_string(GraphSchema s);
std::optional<NodeType> parse_node_type(std::string_view s);
std::optional<EdgeType> parse_edge_type(std::string_view s);
std::optional<GraphSchema> parse_schema(std::string_view s);

// Endpoint node types an edge type joins, in (first, second) order.
std::pair<NodeType, NodeType> endpoint_types(EdgeType t);
bool schema_allows(GraphSchema schema, EdgeType t);

struct Neighbor {
    NodeId id;
    EdgeType type;
    bool operator==(const Neighbor&) const = default;
};

struct GraphStats {
    std::array<std::size_t, kNodeTypeCount> nodes{};
    std::array<std::size_t, kEdgeTypeCount> edges{};
    std::size_t fake_news = 0;
    std::size_t real_news = 0;
    std::size_t unlabeled_news = 0;
    std::size_t total_news() const { return nodes[static_cast<std::size_t>(NodeType::News)]; }
    std::size_t total_nodes() const;
    std::size_t total_edges() const;
};

struct NodeRecord {
    NodeId id;
    NodeType type;
    std::optional<NewsLabel> label;
};

struct EdgeRecord {
    NodeId src;
    NodeId dst;
    EdgeType type;
};

// Immutable heterogeneous graph. Nodes are stored at dense indices that
// follow ascending NodeId, so index order and id order agree everywhere.
// Edges are undirected: each loaded edge appears in both endpoint lists.
class HetGraph {
public:
    HetGraph() = default;

    // Validates and indexes the records. Line numbers in errors refer to
    // positions in the input vectors (1-based) when no file is involved.
    static HetGraph build(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges,
                          GraphSchema schema = GraphSchema::FakeNewsNet);
    // Same as build, with source line numbers used in error reports.
    static HetGraph build_with_lines(std::vector<NodeRecord> nodes, const std::vector<std::size_t>& node_lines,
                                     std::vector<EdgeRecord> edges, const std::vector<std::size_t>& edge_lines,
                                     GraphSchema schema);

    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    GraphSchema schema() const { return schema_; }

    bool contains(NodeId id) const { return index_.count(id) != 0; }
    std::optional<std::size_t> index_of(NodeId id) const;
    std::size_t require_index(NodeId id) const;  // throws UnknownNode

    NodeId id_at(std::size_t index) const { return ids_[index]; }
    NodeType type_at(std::size_t index) const { return types_[index]; }
    std::optional<NewsLabel> label_at(std::size_t index) const { return labels_[index]; }

    NodeType type_of(NodeId id) const { return types_[require_index(id)]; }
    std::optional<NewsLabel> label_of(NodeId id) const { return labels_[require_index(id)]; }

    // Neighbor indices of the node at `index`, ascending.
    std::span<const std::uint32_t> adjacent(std::size_t index) const {
        return {adj_targets_.data() + adj_offsets_[index], adj_offsets_[index + 1] - adj_offsets_[index]};
    }
    std::span<const EdgeType> adjacent_types(std::size_t index) const {
        return {adj_types_.data() + adj_offsets_[index], adj_offsets_[index + 1] - adj_offsets_[index]};
    }

    // News ids in ascending order.
    const std::vector<NodeId>& news_ids() const { return news_ids_; }

    std::vector<NodeRecord> node_records() const;
    // Each undirected edge once, src < dst, sorted.
    std::vector<EdgeRecord> edge_records() const;

private:
    GraphSchema schema_ = GraphSchema::FakeNewsNet;
    std::vector<NodeId> ids_;
    std::vector<NodeType> types_;
    std::vector<std::optional<NewsLabel>> labels_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<std::size_t> adj_offsets_{0};
    std::vector<std::uint32_t> adj_targets_;
    std::vector<EdgeType> adj_types_;
    std::vector<NodeId> news_ids_;
    std::size_t edge_count_ = 0;
};

// Reads `nodes.tsv` / `edges.tsv`. Load is independent of line order.
HetGraph load_graph(const std::string& nodes_path, const std::string& edges_path,
                    GraphSchema schema = GraphSchema::FakeNewsNet);
// Convenience: DIR/nodes.tsv and DIR/edges.tsv.
HetGraph load_graph_dir(const std::string& dir, GraphSchema schema = GraphSchema::FakeNewsNet);
void write_graph(const HetGraph& g, const std::string& nodes_path, const std::string& edges_path);
void write_graph_dir(const HetGraph& g, const std::string& dir);

// Sorted ascending by neighbor id. Throws UnknownNode.
std::vector<Neighbor> neighbors(const HetGraph& g, NodeId v);
GraphStats stats(const HetGraph& g);

}  // namespace hetformer
