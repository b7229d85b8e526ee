#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "fixtures.hpp"
#include "hetformer/graph.hpp"

using namespace hetformer;
using hetformer::testing::TempDir;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

template <typename F>
GraphErrc graph_error_kind(F&& f) {
    try {
        f();
    } catch (const GraphError& e) {
        return e.kind();
    }
    FAIL("expected GraphError");
    return GraphErrc::IoError;
}

}  // namespace

TEST_CASE("minimal graph loads with three nodes and two edges") {
    TempDir dir("graph_min");
    write_text(dir.file("nodes.tsv"), "# comment\n1\tnews\t0\n2\tpost\t-\n3\tuser\t-\n");
    write_text(dir.file("edges.tsv"), "1\t2\tnp\n2\t3\tpu\n");
    const auto g = load_graph_dir(dir.str());
    CHECK(g.node_count() == 3);
    CHECK(g.edge_count() == 2);
    CHECK(g.label_of(1) == NewsLabel::Fake);
    CHECK_FALSE(g.label_of(2).has_value());
}

TEST_CASE("dangling edge reports the missing endpoint id") {
    TempDir dir("graph_dangling");
    write_text(dir.file("nodes.tsv"), "1\tnews\t1\n2\tpost\t-\n");
    write_text(dir.file("edges.tsv"), "1\t2\tnp\n2\t99\tpp\n");
    try {
        load_graph_dir(dir.str());
        FAIL("expected DanglingEdge");
    } catch (const GraphError& e) {
        CHECK(e.kind() == GraphErrc::DanglingEdge);
        CHECK(e.detail() == 99);
    }
}

TEST_CASE("pheme schema rejects follow edges") {
    std::vector<NodeRecord> nodes = {{1, NodeType::News, NewsLabel::Real},
                                     {2, NodeType::User, std::nullopt},
                                     {3, NodeType::User, std::nullopt}};
    std::vector<EdgeRecord> edges = {{1, 2, EdgeType::NewsUser}, {2, 3, EdgeType::UserUser}};
    CHECK(graph_error_kind([&] { HetGraph::build(nodes, edges, GraphSchema::Pheme); }) == GraphErrc::TypeMismatch);
    CHECK_NOTHROW(HetGraph::build(nodes, edges, GraphSchema::FakeNewsNet));
}

TEST_CASE("load errors carry their kind") {
    using N = NodeRecord;
    using E = EdgeRecord;
    const std::vector<N> base = {{1, NodeType::News, NewsLabel::Fake}, {2, NodeType::Post, std::nullopt}};
    CHECK(graph_error_kind([&] {
              HetGraph::build({{1, NodeType::News, NewsLabel::Fake}, {1, NodeType::Post, std::nullopt}}, {});
          }) == GraphErrc::DuplicateNode);
    CHECK(graph_error_kind([&] { HetGraph::build(base, std::vector<E>{{1, 2, EdgeType::NewsUser}}); }) ==
          GraphErrc::TypeMismatch);
    CHECK(graph_error_kind([&] { HetGraph::build(base, std::vector<E>{{2, 2, EdgeType::PostPost}}); }) ==
          GraphErrc::SelfLoop);
    CHECK(graph_error_kind([&] {
              HetGraph::build(base, std::vector<E>{{1, 2, EdgeType::NewsPost}, {2, 1, EdgeType::NewsPost}});
          }) == GraphErrc::DuplicateEdge);

    TempDir dir("graph_errors");
    write_text(dir.file("nodes.tsv"), "1\tarticle\t0\n");
    write_text(dir.file("edges.tsv"), "");
    CHECK(graph_error_kind([&] { load_graph_dir(dir.str()); }) == GraphErrc::UnknownNodeType);
    write_text(dir.file("nodes.tsv"), "1\tnews\n");
    try {
        load_graph_dir(dir.str());
        FAIL("expected MalformedLine");
    } catch (const GraphError& e) {
        CHECK(e.kind() == GraphErrc::MalformedLine);
        CHECK(e.detail() == 1);
    }
    CHECK(graph_error_kind([&] { load_graph_dir(dir.file("missing")); }) == GraphErrc::IoError);
}

TEST_CASE("neighbors are sorted, symmetric and typed") {
    const auto g = hetformer::testing::toy_graph();
    const auto n1 = neighbors(g, 1);
    REQUIRE(n1.size() == 3);
    CHECK(std::is_sorted(n1.begin(), n1.end(), [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; }));
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const NodeId u = g.id_at(i);
        for (const auto& nb : neighbors(g, u)) {
            const auto back = neighbors(g, nb.id);
            CHECK(std::find(back.begin(), back.end(), Neighbor{u, nb.type}) != back.end());
            const auto [a, b] = endpoint_types(nb.type);
            const auto tu = g.type_of(u), tv = g.type_of(nb.id);
            CHECK(((tu == a && tv == b) || (tu == b && tv == a)));
        }
    }
    CHECK_THROWS_AS(neighbors(g, 999), GraphError);
}

TEST_CASE("star center has one neighbor per leaf and isolated nodes have none") {
    std::vector<NodeRecord> nodes = {{1, NodeType::News, NewsLabel::Real}, {9, NodeType::News, NewsLabel::Fake}};
    std::vector<EdgeRecord> edges;
    for (NodeId leaf = 2; leaf <= 5; ++leaf) {
        nodes.push_back({leaf, NodeType::Post, std::nullopt});
        edges.push_back({1, leaf, EdgeType::NewsPost});
    }
    const auto g = HetGraph::build(nodes, edges);
    CHECK(neighbors(g, 1).size() == 4);
    CHECK(neighbors(g, 9).empty());
}

TEST_CASE("stats count types and labels") {
    CHECK(stats(HetGraph{}).total_nodes() == 0);
    CHECK(stats(HetGraph{}).total_edges() == 0);
    const auto s = stats(hetformer::testing::toy_graph());
    CHECK(s.total_news() == 2);
    CHECK(s.fake_news + s.real_news == s.total_news());
    CHECK(s.nodes[static_cast<std::size_t>(NodeType::Post)] == 3);
    CHECK(s.nodes[static_cast<std::size_t>(NodeType::User)] == 3);
    CHECK(s.total_edges() == 11);
    CHECK(s.edges[static_cast<std::size_t>(EdgeType::UserUser)] == 1);
}

TEST_CASE("load is order independent and survives a write/reload cycle") {
    TempDir dir("graph_roundtrip");
    write_text(dir.file("a_nodes.tsv"), "1\tnews\t0\n2\tpost\t-\n3\tuser\t-\n4\tnews\t1\n");
    write_text(dir.file("a_edges.tsv"), "1\t2\tnp\n2\t3\tpu\n4\t3\tnu\n");
    write_text(dir.file("b_nodes.tsv"), "4\tnews\t1\n3\tuser\t-\n2\tpost\t-\n1\tnews\t0\n");
    write_text(dir.file("b_edges.tsv"), "3\t4\tnu\n3\t2\tpu\n2\t1\tnp\n");
    const auto a = load_graph(dir.file("a_nodes.tsv"), dir.file("a_edges.tsv"));
    const auto b = load_graph(dir.file("b_nodes.tsv"), dir.file("b_edges.tsv"));
    auto same = [](const HetGraph& x, const HetGraph& y) {
        const auto ex = x.edge_records(), ey = y.edge_records();
        const auto nx = x.node_records(), ny = y.node_records();
        if (ex.size() != ey.size() || nx.size() != ny.size()) return false;
        for (std::size_t i = 0; i < ex.size(); ++i) {
            if (ex[i].src != ey[i].src || ex[i].dst != ey[i].dst || ex[i].type != ey[i].type) return false;
        }
        for (std::size_t i = 0; i < nx.size(); ++i) {
            if (nx[i].id != ny[i].id || nx[i].type != ny[i].type || nx[i].label != ny[i].label) return false;
        }
        return true;
    };
    CHECK(same(a, b));
    write_graph_dir(a, dir.file("out"));
    CHECK(same(a, load_graph_dir(dir.file("out"))));
}
