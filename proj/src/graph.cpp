#include "hetformer/graph.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <limits>
#include <tuple>

namespace hetformer {

namespace {

constexpr std::array<std::string_view, kNodeTypeCount> kNodeTypeNames{"news", "post", "user"};
constexpr std::array<std::string_view, kEdgeTypeCount> kEdgeTypeNames{"np", "nu", "pu", "pp", "uu"};

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::optional<NodeId> parse_id(std::string_view s) {
    NodeId value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return value;
}

[[noreturn]] void fail(GraphErrc kind, const std::string& msg, std::uint64_t detail) {
    throw GraphError(kind, msg, detail);
}

}  // namespace

std::string_view to_string(NodeType t) { return kNodeTypeNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(EdgeType t) { return kEdgeTypeNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(GraphSchema s) {
    return s == GraphSchema::Pheme ? "pheme" : "fakenewsnet";
}

std::optional<NodeType> parse_node_type(std::string_view s) {
    for (std::size_t i = 0; i < kNodeTypeNames.size(); ++i) {
        if (kNodeTypeNames[i] == s) return static_cast<NodeType>(i);
    }
    return std::nullopt;
}

std::optional<EdgeType> parse_edge_type(std::string_view s) {
    for (std::size_t i = 0; i < kEdgeTypeNames.size(); ++i) {
        if (kEdgeTypeNames[i] == s) return static_cast<EdgeType>(i);
    }
    return std::nullopt;
}

std::optional<GraphSchema> parse_schema(std::string_view s) {
    if (s == "fakenewsnet") return GraphSchema::FakeNewsNet;
    if (s == "pheme") return GraphSchema::Pheme;
    return std::nullopt;
}

std::pair<NodeType, NodeType> endpoint_types(EdgeType t) {
    switch (t) {
        case EdgeType::NewsPost: return {NodeType::News, NodeType::Post};
        case EdgeType::NewsUser: return {NodeType::News, NodeType::User};
        case EdgeType::PostUser: return {NodeType::Post, NodeType::User};
        case EdgeType::PostPost: return {NodeType::Post, NodeType::Post};
        case EdgeType::UserUser: return {NodeType::User, NodeType::User};
    }
    return {NodeType::News, NodeType::News};
}

bool schema_allows(GraphSchema schema, EdgeType t) {
    return schema == GraphSchema::FakeNewsNet || t != EdgeType::UserUser;
}

std::size_t GraphStats::total_nodes() const { return std::accumulate(nodes.begin(), nodes.end(), std::size_t{0}); }
std::size_t GraphStats::total_edges() const { return std::accumulate(edges.begin(), edges.end(), std::size_t{0}); }

std::optional<std::size_t> HetGraph::index_of(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t HetGraph::require_index(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) fail(GraphErrc::UnknownNode, "unknown node " + std::to_string(id), id);
    return it->second;
}

HetGraph HetGraph::build(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges, GraphSchema schema) {
    std::vector<std::size_t> node_lines(nodes.size());
    std::vector<std::size_t> edge_lines(edges.size());
    std::iota(node_lines.begin(), node_lines.end(), std::size_t{1});
    std::iota(edge_lines.begin(), edge_lines.end(), std::size_t{1});
    return build_with_lines(std::move(nodes), node_lines, std::move(edges), edge_lines, schema);
}

HetGraph HetGraph::build_with_lines(std::vector<NodeRecord> nodes, const std::vector<std::size_t>& node_lines,
                                    std::vector<EdgeRecord> edges, const std::vector<std::size_t>& edge_lines,
                                    GraphSchema schema) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].label && nodes[i].type != NodeType::News) {
            fail(GraphErrc::MalformedLine,
                 "line " + std::to_string(node_lines[i]) + ": label on non-news node", node_lines[i]);
        }
    }

    std::vector<std::size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(nodes[a].id, node_lines[a]) < std::tie(nodes[b].id, node_lines[b]);
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (nodes[order[i]].id == nodes[order[i - 1]].id) {
            const auto id = nodes[order[i]].id;
            fail(GraphErrc::DuplicateNode, "duplicate node id " + std::to_string(id), id);
        }
    }

    HetGraph g;
    g.schema_ = schema;
    g.ids_.reserve(nodes.size());
    for (auto i : order) {
        g.index_.emplace(nodes[i].id, g.ids_.size());
        g.ids_.push_back(nodes[i].id);
        g.types_.push_back(nodes[i].type);
        g.labels_.push_back(nodes[i].label);
        if (nodes[i].type == NodeType::News) g.news_ids_.push_back(nodes[i].id);
    }
    if (g.ids_.size() > std::numeric_limits<std::uint32_t>::max()) {
        fail(GraphErrc::MalformedLine, "graph exceeds 2^32 nodes", 0);
    }

    struct Half {
        std::uint32_t from;
        std::uint32_t to;
        EdgeType type;
    };
    std::vector<Half> halves;
    halves.reserve(edges.size() * 2);
    std::set<std::tuple<std::uint32_t, std::uint32_t, EdgeType>> seen;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        const auto line = edge_lines[i];
        auto si = g.index_of(e.src);
        if (!si) fail(GraphErrc::DanglingEdge, "line " + std::to_string(line) + ": dangling endpoint " + std::to_string(e.src), e.src);
        auto di = g.index_of(e.dst);
        if (!di) fail(GraphErrc::DanglingEdge, "line " + std::to_string(line) + ": dangling endpoint " + std::to_string(e.dst), e.dst);
        if (*si == *di) fail(GraphErrc::SelfLoop, "line " + std::to_string(line) + ": self loop", line);
        if (!schema_allows(schema, e.type)) {
            fail(GraphErrc::TypeMismatch,
                 "line " + std::to_string(line) + ": edge type '" + std::string(to_string(e.type)) +
                     "' not allowed by schema " + std::string(to_string(schema)),
                 line);
        }
        const auto [ta, tb] = endpoint_types(e.type);
        const auto s_type = g.types_[*si];
        const auto d_type = g.types_[*di];
        if (!((s_type == ta && d_type == tb) || (s_type == tb && d_type == ta))) {
            fail(GraphErrc::TypeMismatch,
                 "line " + std::to_string(line) + ": edge '" + std::string(to_string(e.type)) + "' joins " +
                     std::string(to_string(s_type)) + " and " + std::string(to_string(d_type)),
                 line);
        }
        auto lo = static_cast<std::uint32_t>(std::min(*si, *di));
        auto hi = static_cast<std::uint32_t>(std::max(*si, *di));
        if (!seen.emplace(lo, hi, e.type).second) {
            fail(GraphErrc::DuplicateEdge, "line " + std::to_string(line) + ": duplicate edge", line);
        }
        halves.push_back({lo, hi, e.type});
        halves.push_back({hi, lo, e.type});
    }
    std::sort(halves.begin(), halves.end(), [](const Half& a, const Half& b) {
        return std::tie(a.from, a.to, a.type) < std::tie(b.from, b.to, b.type);
    });

    g.edge_count_ = edges.size();
    g.adj_offsets_.assign(g.ids_.size() + 1, 0);
    g.adj_targets_.reserve(halves.size());
    g.adj_types_.reserve(halves.size());
    for (const auto& h : halves) {
        ++g.adj_offsets_[h.from + 1];
        g.adj_targets_.push_back(h.to);
        g.adj_types_.push_back(h.type);
    }
    std::partial_sum(g.adj_offsets_.begin(), g.adj_offsets_.end(), g.adj_offsets_.begin());
    return g;
}

namespace {

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

bool skippable(const std::string& line) { return line.empty() || line.front() == '#'; }

}  // namespace

std::vector<NodeRecord> HetGraph::node_records() const {
    std::vector<NodeRecord> out;
    out.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) out.push_back({ids_[i], types_[i], labels_[i]});
    return out;
}

std::vector<EdgeRecord> HetGraph::edge_records() const {
    std::vector<EdgeRecord> out;
    out.reserve(edge_count_);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        auto targets = adjacent(i);
        auto types = adjacent_types(i);
        for (std::size_t j = 0; j < targets.size(); ++j) {
            if (targets[j] > i) out.push_back({ids_[i], ids_[targets[j]], types[j]});
        }
    }
    return out;
}

HetGraph load_graph(const std::string& nodes_path, const std::string& edges_path, GraphSchema schema) {
    std::ifstream nin(nodes_path);
    if (!nin) fail(GraphErrc::IoError, "cannot open " + nodes_path, 0);
    std::vector<NodeRecord> nodes;
    std::vector<std::size_t> node_lines;
    std::string line;
    for (std::size_t lineno = 1; std::getline(nin, line); ++lineno) {
        line = strip_cr(std::move(line));
        if (skippable(line)) continue;
        auto f = split_tabs(line);
        if (f.size() != 3) fail(GraphErrc::MalformedLine, nodes_path + ":" + std::to_string(lineno) + ": expected 3 fields", lineno);
        auto id = parse_id(f[0]);
        if (!id) fail(GraphErrc::MalformedLine, nodes_path + ":" + std::to_string(lineno) + ": bad node id", lineno);
        auto type = parse_node_type(f[1]);
        if (!type) {
            fail(GraphErrc::UnknownNodeType,
                 nodes_path + ":" + std::to_string(lineno) + ": unknown node type '" + std::string(f[1]) + "'", lineno);
        }
        std::optional<NewsLabel> label;
        if (f[2] == "0") {
            label = NewsLabel::Fake;
        } else if (f[2] == "1") {
            label = NewsLabel::Real;
        } else if (f[2] != "-") {
            fail(GraphErrc::MalformedLine, nodes_path + ":" + std::to_string(lineno) + ": bad label", lineno);
        }
        nodes.push_back({*id, *type, label});
        node_lines.push_back(lineno);
    }

    std::ifstream ein(edges_path);
    if (!ein) fail(GraphErrc::IoError, "cannot open " + edges_path, 0);
    std::vector<EdgeRecord> edges;
    std::vector<std::size_t> edge_lines;
    for (std::size_t lineno = 1; std::getline(ein, line); ++lineno) {
        line = strip_cr(std::move(line));
        if (skippable(line)) continue;
        auto f = split_tabs(line);
        if (f.size() != 3) fail(GraphErrc::MalformedLine, edges_path + ":" + std::to_string(lineno) + ": expected 3 fields", lineno);
        auto src = parse_id(f[0]);
        auto dst = parse_id(f[1]);
        auto type = parse_edge_type(f[2]);
        if (!src || !dst || !type) {
            fail(GraphErrc::MalformedLine, edges_path + ":" + std::to_string(lineno) + ": malformed edge", lineno);
        }
        edges.push_back({*src, *dst, *type});
        edge_lines.push_back(lineno);
    }
    return HetGraph::build_with_lines(std::move(nodes), node_lines, std::move(edges), edge_lines, schema);
}

HetGraph load_graph_dir(const std::string& dir, GraphSchema schema) {
    const std::filesystem::path root(dir);
    return load_graph((root / "nodes.tsv").string(), (root / "edges.tsv").string(), schema);
}

void write_graph(const HetGraph& g, const std::string& nodes_path, const std::string& edges_path) {
    std::ofstream nout(nodes_path, std::ios::trunc);
    if (!nout) fail(GraphErrc::IoError, "cannot write " + nodes_path, 0);
    for (const auto& n : g.node_records()) {
        nout << n.id << '\t' << to_string(n.type) << '\t';
        if (n.label) {
            nout << (*n.label == NewsLabel::Real ? '1' : '0');
        } else {
            nout << '-';
        }
        nout << '\n';
    }
    std::ofstream eout(edges_path, std::ios::trunc);
    if (!eout) fail(GraphErrc::IoError, "cannot write " + edges_path, 0);
    for (const auto& e : g.edge_records()) {
        eout << e.src << '\t' << e.dst << '\t' << to_string(e.type) << '\n';
    }
    if (!nout || !eout) fail(GraphErrc::IoError, "write failed", 0);
}

void write_graph_dir(const HetGraph& g, const std::string& dir) {
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    write_graph(g, (root / "nodes.tsv").string(), (root / "edges.tsv").string());
}

std::vector<Neighbor> neighbors(const HetGraph& g, NodeId v) {
    const auto idx = g.require_index(v);
    auto targets = g.adjacent(idx);
    auto types = g.adjacent_types(idx);
    std::vector<Neighbor> out;
    out.reserve(targets.size());
    for (std::size_t j = 0; j < targets.size(); ++j) out.push_back({g.id_at(targets[j]), types[j]});
    return out;
}

GraphStats stats(const HetGraph& g) {
    GraphStats s;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        ++s.nodes[static_cast<std::size_t>(g.type_at(i))];
        if (g.type_at(i) == NodeType::News) {
            auto label = g.label_at(i);
            if (!label) {
                ++s.unlabeled_news;
            } else if (*label == NewsLabel::Fake) {
                ++s.fake_news;
            } else {
                ++s.real_news;
            }
        }
        auto targets = g.adjacent(i);
        auto types = g.adjacent_types(i);
        for (std::size_t j = 0; j < targets.size(); ++j) {
            if (targets[j] > i) ++s.edges[static_cast<std::size_t>(types[j])];
        }
    }
    return s;
}

}  // namespace hetformer
