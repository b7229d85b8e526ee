#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "hetformer/binary_io.hpp"
#include "hetformer/embeddings.hpp"

using namespace hetformer;
using hetformer::testing::TempDir;

namespace {

EmbeddingErrc decode_error(const std::vector<char>& bytes, AttributeKey key = {}) {
    try {
        decode_embeddings(bytes, key);
    } catch (const EmbeddingError& e) {
        return e.kind();
    }
    FAIL("expected EmbeddingError");
    return EmbeddingErrc::IoError;
}

}  // namespace

TEST_CASE("lookup returns stored vectors or nothing") {
    EmbeddingTable t(AttributeKey{NodeType::Post, "text", 3});
    const float v[3] = {1, 2, 3};
    t.set(7, v);
    const auto row = t.lookup(7);
    REQUIRE(row);
    CHECK((*row)[0] == 1.0f);
    CHECK((*row)[2] == 3.0f);
    CHECK_FALSE(t.lookup(8));
    const float bad[2] = {1, 2};
    CHECK_THROWS_AS(t.set(9, bad), EmbeddingError);
    const float nan[3] = {1, std::numeric_limits<float>::quiet_NaN(), 3};
    CHECK_THROWS_AS(t.set(9, nan), EmbeddingError);
}

TEST_CASE("file sizes follow the header and record layout") {
    TempDir dir("emb_sizes");
    EmbeddingTable empty(AttributeKey{NodeType::News, "text", 4});
    write_embeddings(empty, dir.file("empty.hetemb"));
    CHECK(std::filesystem::file_size(dir.file("empty.hetemb")) == 16);
    CHECK(load_embeddings(dir.file("empty.hetemb")).empty());

    EmbeddingTable two(AttributeKey{NodeType::News, "text", 4});
    const float a[4] = {1, 2, 3, 4}, b[4] = {5, 6, 7, 8};
    two.set(3, b);
    two.set(1, a);
    write_embeddings(two, dir.file("two.hetemb"));
    CHECK(std::filesystem::file_size(dir.file("two.hetemb")) == 16 + 2 * (8 + 4 * 4));
    CHECK(load_embeddings(dir.file("two.hetemb"), two.key()) == two);
}

TEST_CASE("random tables round-trip bit-exactly") {
    std::mt19937_64 rng(5);
    std::normal_distribution<float> dist(0.0f, 10.0f);
    EmbeddingTable t(AttributeKey{NodeType::User, "profile", 16});
    std::vector<float> row(16);
    for (NodeId id = 0; id < 100; ++id) {
        for (auto& x : row) x = dist(rng);
        t.set(id * 7 + 1, row);
    }
    const auto back = decode_embeddings(encode_embeddings(t), t.key());
    REQUIRE(back.size() == 100);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back.ids()[i] == t.ids()[i]);
        const auto x = t.row_at(i), y = back.row_at(i);
        CHECK(std::memcmp(x.data(), y.data(), 16 * sizeof(float)) == 0);
    }
}

TEST_CASE("malformed files are rejected by kind") {
    EmbeddingTable t(AttributeKey{NodeType::News, "text", 8});
    std::vector<float> row(8, 0.5f);
    t.set(1, row);
    t.set(2, row);
    const auto good = encode_embeddings(t);

    auto truncated = good;
    truncated.resize(truncated.size() - 4);  // last row has 7 floats
    CHECK(decode_error(truncated) == EmbeddingErrc::TruncatedFile);

    auto magic = good;
    magic[0] = 'X';
    CHECK(decode_error(magic) == EmbeddingErrc::BadMagic);

    auto trailing = good;
    trailing.push_back(0);
    CHECK(decode_error(trailing) == EmbeddingErrc::TrailingData);

    CHECK(decode_error(good, AttributeKey{NodeType::News, "text", 4}) == EmbeddingErrc::DimMismatch);

    auto nonfinite = good;
    const float inf = std::numeric_limits<float>::infinity();
    std::memcpy(nonfinite.data() + 16 + 8, &inf, sizeof inf);
    CHECK(decode_error(nonfinite) == EmbeddingErrc::NonFiniteValue);

    std::vector<char> unsorted;
    binary::put_bytes(unsorted, "HETEMB1\0", 8);
    binary::put<std::uint32_t>(unsorted, 2);
    binary::put<std::uint32_t>(unsorted, 1);
    binary::put<std::uint64_t>(unsorted, 5);
    binary::put<float>(unsorted, 1.0f);
    binary::put<std::uint64_t>(unsorted, 4);
    binary::put<float>(unsorted, 1.0f);
    CHECK(decode_error(unsorted) == EmbeddingErrc::UnsortedRecords);
}

TEST_CASE("embedding directories use type.attr file stems") {
    TempDir dir("emb_dir");
    EmbeddingTable a(AttributeKey{NodeType::User, "profile", 2});
    EmbeddingTable b(AttributeKey{NodeType::News, "text", 3});
    const float x[3] = {1, 2, 3};
    a.set(4, std::span<const float>(x, 2));
    b.set(1, x);
    write_embedding_dir({a, b}, dir.str());
    CHECK(std::filesystem::exists(dir.file("user.profile.hetemb")));
    CHECK(std::filesystem::exists(dir.file("news.text.hetemb")));
    const auto tables = load_embedding_dir(dir.str());
    REQUIRE(tables.size() == 2);
    CHECK(tables[0] == b);
    CHECK(tables[1] == a);
}
