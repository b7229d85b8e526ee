#include "hetformer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "hetformer/random.hpp"

namespace hetformer {

void SynthConfig::validate() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (news == 0) throw std::invalid_argument("synth: news must be positive");
    if (!in_unit(fake_fraction) || !in_unit(community_strength) || !in_unit(repost_prob)) {
        throw std::invalid_argument("synth: fractions must lie in [0, 1]");
    }
    if (!(signal >= 0.0) || !(separation >= 0.0) || !(posts_per_news > 0.0)) {
        throw std::invalid_argument("synth: signal, separation and posts_per_news must be non-negative");
    }
    if (follow_community > 1.0 || neighbor_signal > 1e6) throw std::invalid_argument("synth: bad follow/neighbor settings");
    if (users_per_post == 0) throw std::invalid_argument("synth: users_per_post must be positive");
    for (const auto& a : attributes) {
        if (a.dim == 0 || a.name.empty()) throw std::invalid_argument("synth: attributes need a name and dim > 0");
    }
}

namespace {

std::uint32_t poisson(std::mt19937_64& rng, double mean) {
    const double limit = std::exp(-mean);
    std::uint32_t k = 0;
    double p = unit(rng);
    while (p > limit) {
        ++k;
        p *= unit(rng);
    }
    return k;
}

struct EdgeSet {
    std::set<std::tuple<NodeId, NodeId, EdgeType>> seen;
    std::vector<EdgeRecord> edges;

    void add(NodeId a, NodeId b, EdgeType t) {
        if (a == b) return;
        const auto lo = std::min(a, b), hi = std::max(a, b);
        if (seen.emplace(lo, hi, t).second) edges.push_back({a, b, t});
    }
};

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(splitmix64(cfg.seed));
    const std::uint32_t n_news = cfg.news;
    const std::uint32_t n_users = cfg.users ? std::max(cfg.users, 2u) : std::max(n_news / 2, 2u);
    const double follow_same = cfg.follow_community >= 0.0 ? cfg.follow_community : cfg.community_strength;
    const double neighbor_signal = cfg.neighbor_signal >= 0.0 ? cfg.neighbor_signal : cfg.signal;
    const double news_signal = cfg.content_free ? 0.0 : cfg.signal;

    // News ids 1..N, user ids N+1..N+U, post ids after that.
    const NodeId first_user = n_news + 1;
    std::vector<NodeRecord> nodes;
    std::vector<NewsLabel> labels(n_news, NewsLabel::Real);
    {
        std::vector<std::uint32_t> order(n_news);
        for (std::uint32_t i = 0; i < n_news; ++i) order[i] = i;
        shuffle(order, rng);
        const auto n_fake = static_cast<std::uint32_t>(std::llround(cfg.fake_fraction * n_news));
        for (std::uint32_t i = 0; i < n_fake; ++i) labels[order[i]] = NewsLabel::Fake;
    }
    for (std::uint32_t i = 0; i < n_news; ++i) nodes.push_back({i + 1, NodeType::News, labels[i]});

    // Community 0 hosts fake-leaning users, community 1 real-leaning users.
    std::array<std::vector<NodeId>, 2> community;
    std::vector<int> community_of(n_users);
    for (std::uint32_t u = 0; u < n_users; ++u) {
        community_of[u] = u < n_users / 2 ? 0 : 1;
        community[community_of[u]].push_back(first_user + u);
        nodes.push_back({first_user + u, NodeType::User, std::nullopt});
    }
    auto draw_user = [&](int preferred, double strength) -> NodeId {
        if (unit(rng) < strength) return community[preferred][pick(rng, community[preferred].size())];
        return first_user + pick(rng, n_users);
    };

    EdgeSet edges;
    NodeId next_post = first_user + n_users;
    std::vector<std::pair<NodeId, int>> posts;  // (post id, author community)
    for (std::uint32_t i = 0; i < n_news; ++i) {
        const NodeId news = i + 1;
        const int preferred = static_cast<int>(labels[i]);
        const std::uint32_t k = std::max<std::uint32_t>(1, poisson(rng, cfg.posts_per_news));
        std::vector<NodeId> own;
        for (std::uint32_t j = 0; j < k; ++j) {
            const NodeId post = next_post++;
            nodes.push_back({post, NodeType::Post, std::nullopt});
            edges.add(news, post, EdgeType::NewsPost);
            NodeId author = 0;
            for (std::uint32_t u = 0; u < cfg.users_per_post; ++u) {
                const NodeId user = draw_user(preferred, cfg.community_strength);
                if (u == 0) author = user;
                edges.add(post, user, EdgeType::PostUser);
                edges.add(news, user, EdgeType::NewsUser);
            }
            if (!own.empty() && unit(rng) < cfg.repost_prob) {
                edges.add(post, own[pick(rng, own.size())], EdgeType::PostPost);
            }
            own.push_back(post);
            posts.emplace_back(post, community_of[author - first_user]);
        }
    }
    const NodeId first_background = next_post;
    const std::uint32_t n_background = cfg.background_users;
    std::vector<int> background_stance(n_background);
    for (std::uint32_t b = 0; b < n_background; ++b) {
        nodes.push_back({first_background + b, NodeType::User, std::nullopt});
        background_stance[b] = unit(rng) < 0.5 ? 0 : 1;
    }
    // Follows leave the community with probability 1 - follow_same and then
    // land anywhere, background users included.
    auto draw_followee = [&](int own) -> NodeId {
        if (own >= 0 && unit(rng) < follow_same) return community[own][pick(rng, community[own].size())];
        const std::size_t k = pick(rng, n_users + n_background);
        return k < n_users ? first_user + k : first_background + (k - n_users);
    };
    for (std::uint32_t u = 0; u < n_users; ++u) {
        for (std::uint32_t f = 0; f < cfg.follows_per_user; ++f) {
            edges.add(first_user + u, draw_followee(community_of[u]), EdgeType::UserUser);
        }
    }
    for (std::uint32_t b = 0; b < n_background; ++b) {
        for (std::uint32_t f = 0; f < cfg.follows_per_user; ++f) {
            edges.add(first_background + b, draw_followee(-1), EdgeType::UserUser);
        }
    }

    SynthDataset out;
    out.graph = HetGraph::build(std::move(nodes), std::move(edges.edges), GraphSchema::FakeNewsNet);

    for (const auto& spec : cfg.attributes) {
        // Mean direction per attribute, independent of the wiring stream.
        std::mt19937_64 arng(hash_name(cfg.seed, std::string(to_string(spec.type)) + "." + spec.name));
        std::vector<double> dir(spec.dim);
        double norm = 0.0;
        for (auto& x : dir) {
            x = normal(arng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : dir) x /= norm > 0.0 ? norm : 1.0;

        EmbeddingTable table(AttributeKey{spec.type, spec.name, spec.dim});
        std::vector<float> row(spec.dim);
        auto emit = [&](NodeId id, int cls, double strength) {
            const double sign = cls == 0 ? -1.0 : 1.0;
            for (std::uint32_t k = 0; k < spec.dim; ++k) {
                row[k] = static_cast<float>(strength * sign * 0.5 * cfg.separation * dir[k] + normal(arng));
            }
            table.set(id, row);
        };
        switch (spec.type) {
            case NodeType::News:
                for (std::uint32_t i = 0; i < n_news; ++i) emit(i + 1, static_cast<int>(labels[i]), news_signal);
                break;
            case NodeType::User:
                for (std::uint32_t u = 0; u < n_users; ++u) emit(first_user + u, community_of[u], neighbor_signal);
                for (std::uint32_t b = 0; b < n_background; ++b) {
                    emit(first_background + b, background_stance[b], neighbor_signal);
                }
                break;
            case NodeType::Post:
                for (const auto& [post, cls] : posts) emit(post, cls, neighbor_signal);
                break;
        }
        out.tables.push_back(std::move(table));
    }
    return out;
}

SynthDataset content_free_variant(SynthConfig cfg) {
    cfg.content_free = true;
    return generate(cfg);
}

void write_dataset(const SynthDataset& data, const std::string& dir) {
    write_graph_dir(data.graph, dir);
    write_embedding_dir(data.tables, dir);
}

}  // namespace hetformer
