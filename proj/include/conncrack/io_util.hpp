#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace conncrack::io {

std::string read_file(const std::filesystem::path& path);

/// Write `bytes` to a temporary file next to `path`, then rename over it.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

/// Little-endian encoder.
class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        bytes(b, 4);
    }
    void f32(float v);
    std::string take() && { return std::move(buf_); }
    const std::string& view() const { return buf_; }

private:
    std::string buf_;
};

/// Little-endian decoder; throws FormatError with the offset on underrun.
class ByteReader {
public:
    explicit ByteReader(const std::string& data) : data_(data) {}

    std::string bytes(std::size_t n);
    std::uint32_t u32();
    float f32();
    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const;

    const std::string& data_;
    std::size_t pos_ = 0;
};

} // namespace conncrack::io
