#pragma once

// Little-endian byte packing shared by the WAV and weights-file codecs.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nrsar/error.hpp"

namespace nrsar::binary {

template <typename T>
inline T byteswap(T value) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

class Writer {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) value = byteswap(value);
        const auto* p = reinterpret_cast<const unsigned char*>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    std::vector<unsigned char>& buffer() { return buf_; }
    const std::vector<unsigned char>& buffer() const { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(std::span<const unsigned char> data, std::string context)
        : data_(data), context_(std::move(context)) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        require(sizeof(T));
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) value = byteswap(value);
        return value;
    }

    std::string get_bytes(std::size_t n) {
        require(n);
        std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return out;
    }

    void skip(std::size_t n) {
        require(n);
        pos_ += n;
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }
    std::span<const unsigned char> rest() const { return data_.subspan(pos_); }

private:
    void require(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw TruncatedDataError(context_ + ": unexpected end of data at byte " + std::to_string(pos_));
    }

    std::span<const unsigned char> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

} // namespace nrsar::binary
