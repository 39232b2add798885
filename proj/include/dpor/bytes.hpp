#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpor {

using Bytes = std::vector<uint8_t>;

struct DecodeError : std::runtime_error {
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

inline void put_u8(Bytes& out, uint8_t v) { out.push_back(v); }

inline void put_u16be(Bytes& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void put_u32be(Bytes& out, uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

inline void put_u64be(Bytes& out, uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

inline void put_bytes(Bytes& out, const Bytes& v) { out.insert(out.end(), v.begin(), v.end()); }

/// Length-prefixed (2-byte BE) byte string.
inline void put_lp(Bytes& out, const Bytes& v) {
    if (v.size() > 0xFFFF) throw std::length_error("lp field too long");
    put_u16be(out, static_cast<uint16_t>(v.size()));
    put_bytes(out, v);
}

/// Bounds-checked sequential reader over a byte buffer.
class Cursor {
public:
    Cursor(const uint8_t* data, size_t size) : data_(data), size_(size) {}
    explicit Cursor(const Bytes& b) : Cursor(b.data(), b.size()) {}

    size_t remaining() const { return size_ - pos_; }
    bool done() const { return pos_ == size_; }

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    uint16_t u16be() {
        need(2);
        uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    uint32_t u32be() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
        pos_ += 4;
        return v;
    }
    uint64_t u64be() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = v << 8 | data_[pos_ + i];
        pos_ += 8;
        return v;
    }
    Bytes take(size_t len) {
        need(len);
        Bytes v(data_ + pos_, data_ + pos_ + len);
        pos_ += len;
        return v;
    }
    Bytes lp() { return take(u16be()); }

    void expect_done() const {
        if (!done()) throw DecodeError("trailing bytes in message");
    }

private:
    void need(size_t len) const {
        if (size_ - pos_ < len) throw DecodeError("truncated message");
    }
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

inline std::string to_hex(const Bytes& b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (uint8_t c : b) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 0xF]);
    }
    return s;
}

inline Bytes from_hex(const std::string& s) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw DecodeError("bad hex digit");
    };
    if (s.size() % 2) throw DecodeError("odd hex length");
    Bytes b(s.size() / 2);
    for (size_t i = 0; i < b.size(); ++i)
        b[i] = static_cast<uint8_t>(nib(s[2 * i]) << 4 | nib(s[2 * i + 1]));
    return b;
}

}  // namespace dpor
