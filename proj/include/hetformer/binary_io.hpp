#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

// Little-endian helpers shared by the HETEMB1, HETRWR1 and HETCKPT1 codecs.
namespace hetformer::binary {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian targets are not supported");

template <typename T>
T byteswap_if_needed(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        std::array<unsigned char, sizeof(T)> bytes;
        std::memcpy(bytes.data(), &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
        std::memcpy(&value, bytes.data(), sizeof(T));
    }
    return value;
}

template <typename T>
void put(std::vector<char>& out, T value) {
    value = byteswap_if_needed(value);
    const auto* p = reinterpret_cast<const char*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

inline void put_bytes(std::vector<char>& out, const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    out.insert(out.end(), p, p + n);
}

// Bounds-checked cursor over an in-memory file image.
class Reader {
public:
    explicit Reader(const std::vector<char>& buf) : buf_(buf) {}

    bool can_read(std::size_t n) const { return pos_ + n <= buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }
    std::size_t position() const { return pos_; }

    // Returns false (and leaves the cursor untouched) on short input.
    template <typename T>
    bool get(T& value) {
        if (!can_read(sizeof(T))) return false;
        std::memcpy(&value, buf_.data() + pos_, sizeof(T));
        value = byteswap_if_needed(value);
        pos_ += sizeof(T);
        return true;
    }

    bool get_bytes(void* dst, std::size_t n) {
        if (!can_read(n)) return false;
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
        return true;
    }

private:
    const std::vector<char>& buf_;
    std::size_t pos_ = 0;
};

// Whole-file helpers; both return false on I/O failure.
bool read_file(const std::string& path, std::vector<char>& out);
bool write_file(const std::string& path, const std::vector<char>& data);

}  // namespace hetformer::binary
