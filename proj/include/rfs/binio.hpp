#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rfs/errors.hpp"
#include "rfs/text.hpp"

namespace rfs {

static_assert(std::endian::native == std::endian::little,
              "wire formats are little-endian; big-endian hosts are not supported");

// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        buf_.insert(buf_.end(), raw, raw + sizeof(T));
    }

    void put_bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    void put_f32(double v) { put(static_cast<float>(v)); }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

// Reads little-endian scalars; faults carry the byte offset.
class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const std::vector<std::uint8_t>& v) : ByteReader(v.data(), v.size()) {}

    template <typename T>
    T get(const char* what) {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > size_)
            throw FormatError(std::string("truncated reading ") + what + " at byte offset " +
                              fmt_int(static_cast<std::int64_t>(pos_)));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    double get_f32(const char* what) { return static_cast<double>(get<float>(what)); }

    const std::uint8_t* cursor() const { return data_ + pos_; }
    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    void skip(std::size_t n, const char* what) {
        if (pos_ + n > size_)
            throw FormatError(std::string("truncated reading ") + what + " at byte offset " +
                              fmt_int(static_cast<std::int64_t>(pos_)));
        pos_ += n;
    }

    void expect_magic(const char magic[4], const char* format_name) {
        if (size_ < 4)
            throw FormatError(std::string("truncated ") + format_name + " header at byte offset 0");
        if (std::memcmp(data_, magic, 4) != 0)
            throw FormatError(std::string("bad magic for ") + format_name + " at byte offset 0");
        pos_ = 4;
    }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("short write to file: " + path);
}

} // namespace rfs
