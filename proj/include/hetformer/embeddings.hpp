#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hetformer/error.hpp"
#include "hetformer/graph.hpp"

namespace hetformer {

// Attribute φ of node type k with embedding size d_{ik}.
struct AttributeKey {
    NodeType node_type = NodeType::News;
    std::string name;
    std::uint32_t dim = 0;

    bool operator==(const AttributeKey&) const = default;
    // "<type>.<name>", the file stem used in embedding directories.
    std::string stem() const;
};

// Fixed-length float vectors for one attribute, keyed by node id.
// Rows are kept in ascending id order.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(AttributeKey key);

    const AttributeKey& key() const { return key_; }
    std::uint32_t dim() const { return key_.dim; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    // Inserts or replaces. Throws DimMismatch / NonFiniteValue.
    void set(NodeId id, std::span<const float> values);
    // Empty optional signals Missing.
    std::optional<std::span<const float>> lookup(NodeId id) const;

    const std::vector<NodeId>& ids() const { return ids_; }
    std::span<const float> row_at(std::size_t i) const { return {data_.data() + i * key_.dim, key_.dim}; }

    bool operator==(const EmbeddingTable& other) const;

private:
    AttributeKey key_;
    std::vector<NodeId> ids_;
    std::vector<float> data_;
    std::unordered_map<NodeId, std::size_t> index_;
};

inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

// HETEMB1: magic "HETEMB1\0", u32 count, u32 dim, then count x [u64 id, dim x f32].
// The file carries no attribute name; `key` supplies it. When key.dim is
// nonzero the header dim must match it (DimMismatch otherwise).
EmbeddingTable load_embeddings(const std::string& path, AttributeKey key = {});
EmbeddingTable decode_embeddings(const std::vector<char>& bytes, AttributeKey key = {});
std::vector<char> encode_embeddings(const EmbeddingTable& table);
void write_embeddings(const EmbeddingTable& table, const std::string& path);

// All attribute tables in a directory, one file per attribute named
// "<type>.<attr>.hetemb". Tables are returned sorted by (type, name).
std::vector<EmbeddingTable> load_embedding_dir(const std::string& dir);
void write_embedding_dir(const std::vector<EmbeddingTable>& tables, const std::string& dir);

}  // namespace hetformer
