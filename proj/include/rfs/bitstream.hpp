#pragma once

#include <cstdint>
#include <vector>

#include "rfs/errors.hpp"
#include "rfs/text.hpp"

namespace rfs {

// MSB-first bit packer. Values are appended high bit first; the final byte is
// zero padded.
class BitWriter {
public:
    void put(std::uint32_t value, int bits) {
        for (int b = bits - 1; b >= 0; --b) {
            if (bitpos_ == 0) bytes_.push_back(0);
            std::uint8_t bit = (value >> b) & 1u;
            bytes_.back() |= static_cast<std::uint8_t>(bit << (7 - bitpos_));
            bitpos_ = (bitpos_ + 1) & 7;
        }
    }

    std::size_t bit_count() const {
        return bytes_.empty() ? 0 : (bytes_.size() - 1) * 8 + (bitpos_ == 0 ? 8 : bitpos_);
    }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    int bitpos_ = 0; // next free bit within the last byte, 0 means byte-aligned
};

class BitReader {
public:
    BitReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t get(int bits) {
        std::uint32_t v = 0;
        for (int i = 0; i < bits; ++i) {
            std::size_t byte = pos_ >> 3;
            if (byte >= size_)
                throw FormatError("bitstream truncated at bit " + fmt_int(static_cast<std::int64_t>(pos_)));
            std::uint8_t bit = (data_[byte] >> (7 - (pos_ & 7))) & 1u;
            v = (v << 1) | bit;
            ++pos_;
        }
        return v;
    }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace rfs
