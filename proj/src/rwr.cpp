#include "hetformer/rwr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <thread>

#include "hetformer/binary_io.hpp"
#include "hetformer/random.hpp"

namespace hetformer {

namespace {

constexpr char kMagic[8] = {'H', 'E', 'T', 'R', 'W', 'R', '1', '\0'};

struct Scratch {
    std::vector<std::uint32_t> count;
    std::vector<std::uint64_t> first;
    std::vector<std::uint32_t> touched;
};

NeighborSample walk(const HetGraph& g, std::size_t root_idx, const WalkConfig& cfg, Scratch& s) {
    const NodeId root = g.id_at(root_idx);
    if (g.adjacent(root_idx).empty()) return make_sample(root, {});
    if (s.count.size() != g.node_count()) {
        s.count.assign(g.node_count(), 0);
        s.first.assign(g.node_count(), 0);
    }
    s.touched.clear();

    std::mt19937_64 rng(root_seed(cfg.seed, root));
    std::size_t v = root_idx;
    for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
        if (unit(rng) < cfg.restart_p) v = root_idx;
        auto nbrs = g.adjacent(v);
        if (nbrs.empty()) {
            v = root_idx;
            nbrs = g.adjacent(v);
        }
        const std::uint32_t w = nbrs[pick(rng, nbrs.size())];
        if (s.count[w]++ == 0) {
            s.first[w] = t;
            s.touched.push_back(w);
        }
        v = w;
    }

    std::vector<VisitTally> tallies;
    tallies.reserve(s.touched.size());
    for (auto idx : s.touched) {
        if (idx != root_idx) tallies.push_back({g.id_at(idx), s.count[idx], s.first[idx]});
        s.count[idx] = 0;
    }
    return make_sample(root, sort_most_frequent(tallies, cfg.top_gamma, g));
}

[[noreturn]] void bad_cache(const std::string& msg) { throw SamplerError(SamplerErrc::BadCache, msg); }

}  // namespace

void WalkConfig::validate() const {
    if (!(restart_p >= 0.0 && restart_p <= 1.0)) throw SamplerError(SamplerErrc::InvalidConfig, "restart_p must lie in [0,1]");
    if (iterations < 1) throw SamplerError(SamplerErrc::InvalidConfig, "iterations must be >= 1");
    if (top_gamma < 1) throw SamplerError(SamplerErrc::InvalidConfig, "top_gamma must be >= 1");
    if (top_gamma > std::numeric_limits<std::uint16_t>::max()) {
        throw SamplerError(SamplerErrc::InvalidConfig, "top_gamma exceeds the cache format limit");
    }
}

NeighborSample make_sample(NodeId root, std::vector<RankedNeighbor> ranked) {
    NeighborSample s;
    s.root = root;
    s.ranked = std::move(ranked);
    for (const auto& r : s.ranked) s.partitions[static_cast<std::size_t>(r.type)].push_back(r);
    return s;
}

std::vector<RankedNeighbor> sort_most_frequent(std::span<const VisitTally> tallies, std::size_t gamma,
                                               const HetGraph& g) {
    std::vector<VisitTally> sorted(tallies.begin(), tallies.end());
    const auto keep = std::min(gamma, sorted.size());
    auto better = [](const VisitTally& a, const VisitTally& b) {
        if (a.count != b.count) return a.count > b.count;
        if (a.first_visit != b.first_visit) return a.first_visit < b.first_visit;
        return a.id < b.id;
    };
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep), sorted.end(), better);
    std::vector<RankedNeighbor> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back({sorted[i].id, g.type_of(sorted[i].id), sorted[i].count});
    return out;
}

std::uint64_t root_seed(std::uint64_t seed, NodeId root) { return splitmix64(splitmix64(seed) ^ root); }

NeighborSample sample_neighbors(const HetGraph& g, NodeId root, const WalkConfig& cfg) {
    cfg.validate();
    const auto idx = g.require_index(root);
    if (g.type_at(idx) != NodeType::News) {
        throw SamplerError(SamplerErrc::NotANewsNode, "node " + std::to_string(root) + " is not a news node", root);
    }
    Scratch scratch;
    return walk(g, idx, cfg, scratch);
}

std::map<NodeId, double> rwr_oracle(const HetGraph& g, NodeId root, double restart_p) {
    const auto root_idx = g.require_index(root);
    if (g.adjacent(root_idx).empty()) {
        throw SamplerError(SamplerErrc::NoNeighbors, "root " + std::to_string(root) + " has no neighbors", root);
    }
    // Connected component of the root, in ascending index order.
    std::vector<std::size_t> comp{root_idx};
    std::vector<char> seen(g.node_count(), 0);
    seen[root_idx] = 1;
    for (std::size_t head = 0; head < comp.size(); ++head) {
        for (auto w : g.adjacent(comp[head])) {
            if (!seen[w]) {
                seen[w] = 1;
                comp.push_back(w);
            }
        }
    }
    std::sort(comp.begin(), comp.end());
    const std::size_t n = comp.size();
    std::vector<std::size_t> local(g.node_count(), 0);
    for (std::size_t i = 0; i < n; ++i) local[comp[i]] = i;
    const std::size_t r = local[root_idx];

    // Row-stochastic transition matrix over recorded positions.
    std::vector<double> P(n * n, 0.0);
    auto spread = [&](std::size_t row, std::size_t from, double mass) {
        auto nbrs = g.adjacent(from);
        for (auto w : nbrs) P[row * n + local[w]] += mass / static_cast<double>(nbrs.size());
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (restart_p > 0.0) spread(i, comp[r], restart_p);
        if (restart_p < 1.0) spread(i, comp[i], 1.0 - restart_p);
    }

    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    for (int iter = 0; iter < 10'000'000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double m = pi[i];
            if (m == 0.0) continue;
            const double* row = &P[i * n];
            for (std::size_t j = 0; j < n; ++j) next[j] += m * row[j];
        }
        double residual = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            next[j] = 0.5 * (pi[j] + next[j]);
            residual += std::abs(next[j] - pi[j]);
        }
        pi.swap(next);
        if (residual < 1e-12) break;
    }

    double non_root = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j != r) non_root += pi[j];
    }
    std::map<NodeId, double> out;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == r) continue;
        out.emplace(g.id_at(comp[j]), non_root > 0.0 ? pi[j] / non_root : 0.0);
    }
    return out;
}

SampleMap sample_all(const HetGraph& g, const WalkConfig& cfg, unsigned workers) {
    cfg.validate();
    std::vector<std::size_t> roots;
    for (NodeId id : g.news_ids()) roots.push_back(*g.index_of(id));
    std::vector<NeighborSample> slots(roots.size());

    std::atomic<std::size_t> next{0};
    auto run = [&] {
        Scratch scratch;
        for (std::size_t i = next.fetch_add(1); i < roots.size(); i = next.fetch_add(1)) {
            slots[i] = walk(g, roots[i], cfg, scratch);
        }
    };
    workers = std::max(1u, workers);
    if (workers == 1 || roots.size() < 2) {
        run();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }

    SampleMap out;
    for (auto& s : slots) {
        const auto root = s.root;
        out.emplace(root, std::move(s));
    }
    return out;
}

std::vector<char> encode_rwr_cache(const SampleMap& samples) {
    std::vector<char> out;
    binary::put_bytes(out, kMagic, sizeof kMagic);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(samples.size()));
    for (const auto& [root, s] : samples) {
        if (s.ranked.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw SamplerError(SamplerErrc::IoError, "neighbor list too long for cache format", root);
        }
        binary::put<std::uint64_t>(out, root);
        binary::put<std::uint16_t>(out, static_cast<std::uint16_t>(s.ranked.size()));
        for (const auto& r : s.ranked) {
            binary::put<std::uint64_t>(out, r.id);
            binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(r.type));
            binary::put<std::uint32_t>(out, r.frequency);
        }
    }
    return out;
}

SampleMap decode_rwr_cache(const std::vector<char>& bytes) {
    binary::Reader rd(bytes);
    char magic[8];
    if (!rd.get_bytes(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) bad_cache("not a HETRWR1 file");
    std::uint32_t count = 0;
    if (!rd.get(count)) bad_cache("truncated header");
    SampleMap out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint64_t root = 0;
        std::uint16_t l = 0;
        if (!rd.get(root) || !rd.get(l)) bad_cache("truncated record");
        std::vector<RankedNeighbor> ranked(l);
        for (auto& r : ranked) {
            std::uint8_t type = 0;
            if (!rd.get(r.id) || !rd.get(type) || !rd.get(r.frequency)) bad_cache("truncated record");
            if (type >= kNodeTypeCount) bad_cache("bad node type code");
            r.type = static_cast<NodeType>(type);
        }
        if (!out.emplace(root, make_sample(root, std::move(ranked))).second) bad_cache("duplicate root");
    }
    if (rd.remaining() != 0) bad_cache("trailing bytes");
    return out;
}

void write_rwr_cache(const SampleMap& samples, const std::string& path) {
    if (!binary::write_file(path, encode_rwr_cache(samples))) {
        throw SamplerError(SamplerErrc::IoError, "cannot write " + path);
    }
}

SampleMap load_rwr_cache(const std::string& path) {
    std::vector<char> bytes;
    if (!binary::read_file(path, bytes)) throw SamplerError(SamplerErrc::IoError, "cannot read " + path);
    return decode_rwr_cache(bytes);
}

}  // namespace hetformer
