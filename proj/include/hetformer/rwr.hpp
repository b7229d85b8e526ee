#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hetformer/error.hpp"
#include "hetformer/graph.hpp"

namespace hetformer {

struct WalkConfig {
    double restart_p = 0.5;
    std::uint32_t iterations = 10000;  // walk length per root
    std::uint32_t top_gamma = 15;
    std::uint64_t seed = 42;

    void validate() const;  // throws SamplerError(InvalidConfig)
};

struct RankedNeighbor {
    NodeId id = 0;
    NodeType type = NodeType::News;
    std::uint32_t frequency = 0;
    bool operator==(const RankedNeighbor&) const = default;
};

// Top-gamma walk neighbors of one news root in rank order, plus the same
// list split by node type (each partition keeps rank order).
struct NeighborSample {
    NodeId root = 0;
    std::vector<RankedNeighbor> ranked;
    std::array<std::vector<RankedNeighbor>, kNodeTypeCount> partitions;

    std::size_t size() const { return ranked.size(); }
    std::size_t count(NodeType t) const { return partitions[static_cast<std::size_t>(t)].size(); }
    const std::vector<RankedNeighbor>& of(NodeType t) const { return partitions[static_cast<std::size_t>(t)]; }

    bool operator==(const NeighborSample& other) const { return root == other.root && ranked == other.ranked; }
};

NeighborSample make_sample(NodeId root, std::vector<RankedNeighbor> ranked);

struct VisitTally {
    NodeId id = 0;
    std::uint32_t count = 0;
    std::uint64_t first_visit = 0;  // iteration index of the first recording
};

// Orders by (count desc, first_visit asc, id asc) and keeps min(gamma, n).
std::vector<RankedNeighbor> sort_most_frequent(std::span<const VisitTally> tallies, std::size_t gamma,
                                               const HetGraph& g);

// Stable 64-bit mix of the global seed and a root id.
std::uint64_t root_seed(std::uint64_t seed, NodeId root);

// One walk of `iterations` steps from `root`. Every step records exactly
// one node; visits that land back on the root are tallied but the root is
// never part of the ranked result.
NeighborSample sample_neighbors(const HetGraph& g, NodeId root, const WalkConfig& cfg);

// Stationary visit distribution of the restart walk, restricted to
// non-root nodes and renormalised. Dense power iteration on the lazy
// chain (I + P) / 2, which shares P's stationary law and is aperiodic.
std::map<NodeId, double> rwr_oracle(const HetGraph& g, NodeId root, double restart_p);

using SampleMap = std::map<NodeId, NeighborSample>;

// One sample per news node. Output does not depend on `workers`.
SampleMap sample_all(const HetGraph& g, const WalkConfig& cfg, unsigned workers = 1);

// HETRWR1: magic, u32 count, then per root: u64 root, u16 l,
// l x [u64 neighbor, u8 node type, u32 frequency]. Roots ascending.
std::vector<char> encode_rwr_cache(const SampleMap& samples);
SampleMap decode_rwr_cache(const std::vector<char>& bytes);
void write_rwr_cache(const SampleMap& samples, const std::string& path);
SampleMap load_rwr_cache(const std::string& path);

}  // namespace hetformer
