#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hetformer {

// Exception carrying a module-specific error kind. Callers that care about
// the failure class compare `kind()`; everyone else sees a runtime_error.
template <typename Kind>
class KindedError : public std::runtime_error {
public:
    KindedError(Kind kind, const std::string& what, std::uint64_t detail = 0)
        : std::runtime_error(what), kind_(kind), detail_(detail) {}

    Kind kind() const noexcept { return kind_; }
    // Line number, node id or row index, depending on the kind.
    std::uint64_t detail() const noexcept { return detail_; }

private:
    Kind kind_;
    std::uint64_t detail_;
};

enum class GraphErrc {
    MalformedLine,
    UnknownNodeType,
    DanglingEdge,
    TypeMismatch,
    DuplicateNode,
    DuplicateEdge,
    SelfLoop,
    UnknownNode,
    IoError,
};
using GraphError = KindedError<GraphErrc>;

enum class EmbeddingErrc {
    BadMagic,
    DimMismatch,
    NonFiniteValue,
    TruncatedFile,
    TrailingData,
    UnsortedRecords,
    IoError,
};
using EmbeddingError = KindedError<EmbeddingErrc>;

enum class SamplerErrc {
    NotANewsNode,
    NoNeighbors,
    InvalidConfig,
    BadCache,
    IoError,
};
using SamplerError = KindedError<SamplerErrc>;

enum class TensorErrc {
    ShapeMismatch,
    NonFiniteValue,
    IndexOutOfRange,
    NotScalar,
    NonFiniteGradient,
    BadCheckpoint,
    IoError,
};
using TensorError = KindedError<TensorErrc>;

enum class ModelErrc {
    NotANewsNode,
    DimMismatch,
    LengthOverflow,
    InvalidConfig,
};
using ModelError = KindedError<ModelErrc>;

enum class TrainErrc {
    TooFewSamples,
    MissingLabel,
    InvalidConfig,
    IoError,
};
using TrainError = KindedError<TrainErrc>;

}  // namespace hetformer
