#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "cbop/errors.hpp"

namespace cbop::binary {

// Little-endian encoders, independent of host byte order.

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

inline void put_f64(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

inline void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) {
    out.insert(out.end(), s.begin(), s.end());
}

/// Bounds-checked cursor over an in-memory file image.
class Reader {
public:
    Reader(const std::vector<std::uint8_t>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    void require(std::size_t n) const {
        if (pos_ + n > buf_.size()) {
            const std::size_t missing = pos_ + n - buf_.size();
            throw TruncationError(what_ + " is truncated: missing " + std::to_string(missing) + " bytes", missing);
        }
    }

    std::uint32_t u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        require(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }

    std::uint8_t u8() {
        require(1);
        return buf_[pos_++];
    }

    std::string bytes(std::size_t n) {
        require(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace cbop::binary
