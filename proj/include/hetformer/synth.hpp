#pragma once

#include <string>
#include <vector>

#include "hetformer/embeddings.hpp"
#include "hetformer/graph.hpp"

namespace hetformer {

struct AttributeSpec {
    NodeType type = NodeType::News;
    std::string name;
    std::uint32_t dim = 32;
};

// Two user communities; fake news draws its posting users from community 0
// and real news from community 1 with probability `community_strength`,
// otherwise uniformly from all users.
struct SynthConfig {
    std::uint32_t news = 500;
    double fake_fraction = 0.4;
    double posts_per_news = 4.0;    // Poisson mean, at least one post per news
    std::uint32_t users_per_post = 1;
    std::uint32_t users = 0;        // 0 means news / 2, at least 2
    // Users outside both communities. Each has a random stance whose
    // attributes look like one community's but are unrelated to any label;
    // they never post and are reached only through follow edges.
    std::uint32_t background_users = 0;
    double community_strength = 1.0;
    double signal = 1.0;            // scales the class means of news content
    double neighbor_signal = -1.0;  // scales post/user means; negative means `signal`
    double separation = 4.0;        // distance between the two class means
    double repost_prob = 0.3;
    std::uint32_t follows_per_user = 2;
    double follow_community = -1.0;  // same-community follow probability; negative means community_strength
    bool content_free = false;       // news content carries no label signal
    std::vector<AttributeSpec> attributes = {
        {NodeType::News, "text", 32}, {NodeType::Post, "text", 32}, {NodeType::User, "profile", 32}};
    std::uint64_t seed = 7;

    void validate() const;  // throws std::invalid_argument
};

struct SynthDataset {
    HetGraph graph;
    std::vector<EmbeddingTable> tables;
};

SynthDataset generate(const SynthConfig& cfg);
// News content is pure noise; only the wiring and the attributes of posts
// and users (through community membership) relate to the label.
SynthDataset content_free_variant(SynthConfig cfg);

// nodes.tsv, edges.tsv and one <type>.<attr>.hetemb per table, all in `dir`.
void write_dataset(const SynthDataset& data, const std::string& dir);

}  // namespace hetformer
