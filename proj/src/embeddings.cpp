#include "hetformer/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "hetformer/binary_io.hpp"

namespace hetformer {

namespace {

constexpr char kMagic[8] = {'H', 'E', 'T', 'E', 'M', 'B', '1', '\0'};
constexpr std::string_view kSuffix = ".hetemb";

}  // namespace

std::string AttributeKey::stem() const { return std::string(to_string(node_type)) + "." + name; }

EmbeddingTable::EmbeddingTable(AttributeKey key) : key_(std::move(key)) {
    if (key_.dim == 0) throw EmbeddingError(EmbeddingErrc::DimMismatch, "embedding dim must be positive");
}

void EmbeddingTable::set(NodeId id, std::span<const float> values) {
    if (values.size() != key_.dim) {
        throw EmbeddingError(EmbeddingErrc::DimMismatch,
                             "expected " + std::to_string(key_.dim) + " values, got " + std::to_string(values.size()), id);
    }
    for (float v : values) {
        if (!std::isfinite(v)) throw EmbeddingError(EmbeddingErrc::NonFiniteValue, "non-finite value for node " + std::to_string(id), id);
    }
    if (auto it = index_.find(id); it != index_.end()) {
        std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * key_.dim));
        return;
    }
    auto pos = std::lower_bound(ids_.begin(), ids_.end(), id);
    const auto row = static_cast<std::size_t>(pos - ids_.begin());
    if (row == ids_.size()) {
        ids_.push_back(id);
        data_.insert(data_.end(), values.begin(), values.end());
        index_.emplace(id, row);
        return;
    }
    ids_.insert(pos, id);
    data_.insert(data_.begin() + static_cast<std::ptrdiff_t>(row * key_.dim), values.begin(), values.end());
    index_.clear();
    for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

std::optional<std::span<const float>> EmbeddingTable::lookup(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return row_at(it->second);
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
    if (!(key_ == other.key_) || ids_ != other.ids_ || data_.size() != other.data_.size()) return false;
    return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::vector<char> encode_embeddings(const EmbeddingTable& table) {
    std::vector<char> out;
    out.reserve(kEmbeddingHeaderBytes + table.size() * (8 + 4 * table.dim()));
    binary::put_bytes(out, kMagic, sizeof kMagic);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(table.size()));
    binary::put<std::uint32_t>(out, table.dim());
    for (std::size_t i = 0; i < table.size(); ++i) {
        binary::put<std::uint64_t>(out, table.ids()[i]);
        for (float v : table.row_at(i)) binary::put<float>(out, v);
    }
    return out;
}

EmbeddingTable decode_embeddings(const std::vector<char>& bytes, AttributeKey key) {
    binary::Reader r(bytes);
    char magic[8];
    if (!r.get_bytes(magic, sizeof magic)) throw EmbeddingError(EmbeddingErrc::TruncatedFile, "file shorter than header");
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw EmbeddingError(EmbeddingErrc::BadMagic, "not a HETEMB1 file");
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
    if (!r.get(count) || !r.get(dim)) throw EmbeddingError(EmbeddingErrc::TruncatedFile, "file shorter than header");
    if (dim == 0) throw EmbeddingError(EmbeddingErrc::DimMismatch, "header dim is zero");
    if (key.dim != 0 && key.dim != dim) {
        throw EmbeddingError(EmbeddingErrc::DimMismatch,
                             "header dim " + std::to_string(dim) + " != expected " + std::to_string(key.dim));
    }
    key.dim = dim;
    EmbeddingTable table(key);
    std::vector<float> row(dim);
    std::optional<NodeId> prev;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint64_t id = 0;
        if (!r.get(id)) throw EmbeddingError(EmbeddingErrc::TruncatedFile, "truncated at record " + std::to_string(i), i);
        for (auto& v : row) {
            if (!r.get(v)) throw EmbeddingError(EmbeddingErrc::TruncatedFile, "truncated at record " + std::to_string(i), i);
        }
        if (prev && id <= *prev) {
            throw EmbeddingError(EmbeddingErrc::UnsortedRecords, "records not strictly ascending at row " + std::to_string(i), i);
        }
        for (float v : row) {
            if (!std::isfinite(v)) throw EmbeddingError(EmbeddingErrc::NonFiniteValue, "non-finite value in row " + std::to_string(i), i);
        }
        table.set(id, row);
        prev = id;
    }
    if (r.remaining() != 0) throw EmbeddingError(EmbeddingErrc::TrailingData, "trailing bytes after last record");
    return table;
}

EmbeddingTable load_embeddings(const std::string& path, AttributeKey key) {
    std::vector<char> bytes;
    if (!binary::read_file(path, bytes)) throw EmbeddingError(EmbeddingErrc::IoError, "cannot read " + path);
    return decode_embeddings(bytes, std::move(key));
}

void write_embeddings(const EmbeddingTable& table, const std::string& path) {
    if (!binary::write_file(path, encode_embeddings(table))) {
        throw EmbeddingError(EmbeddingErrc::IoError, "cannot write " + path);
    }
}

std::vector<EmbeddingTable> load_embedding_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<EmbeddingTable> tables;
    std::error_code ec;
    fs::directory_iterator it(dir, ec);
    if (ec) throw EmbeddingError(EmbeddingErrc::IoError, "cannot list " + dir);
    for (const auto& entry : it) {
        const auto name = entry.path().filename().string();
        if (name.size() <= kSuffix.size() || !name.ends_with(kSuffix)) continue;
        const auto stem = name.substr(0, name.size() - kSuffix.size());
        const auto dot = stem.find('.');
        if (dot == std::string::npos) continue;
        auto type = parse_node_type(stem.substr(0, dot));
        if (!type) continue;
        AttributeKey key{*type, stem.substr(dot + 1), 0};
        tables.push_back(load_embeddings(entry.path().string(), key));
    }
    std::sort(tables.begin(), tables.end(), [](const EmbeddingTable& a, const EmbeddingTable& b) {
        return std::pair(a.key().node_type, a.key().name) < std::pair(b.key().node_type, b.key().name);
    });
    return tables;
}

void write_embedding_dir(const std::vector<EmbeddingTable>& tables, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& t : tables) {
        write_embeddings(t, (std::filesystem::path(dir) / (t.key().stem() + std::string(kSuffix))).string());
    }
}

}  // namespace hetformer
