#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "core.hpp"

namespace sdrom {

/// Little-endian binary writer with explicit byte packing (host-order agnostic).
class BinWriter {
  public:
    explicit BinWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open '" + path + "' for writing");
        path_ = path;
    }

    void magic(const char (&tag)[9]) { raw(tag, 8); }

    void u8(std::uint8_t v) { raw(&v, 1); }

    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 4);
    }

    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        raw(b, 8);
    }

    void f64_array(const Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write to '" + path_ + "' failed");
    }

  private:
    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write to '" + path_ + "' failed");
    }

    std::ofstream out_;
    std::string path_;
};

class BinReader {
  public:
    explicit BinReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open '" + path + "' for reading");
    }

    void expect_magic(const char (&tag)[9]) {
        char buf[8];
        raw(buf, 8);
        if (std::memcmp(buf, tag, 8) != 0)
            throw FormatError("'" + path_ + "': bad magic, expected " + std::string(tag, 8));
    }

    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }

    std::uint32_t u32() {
        unsigned char b[4];
        raw(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    double f64() {
        unsigned char b[8];
        raw(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(v);
    }

    Vec f64_array(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = f64();
        return v;
    }

  private:
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw FormatError("'" + path_ + "': truncated file");
    }

    std::ifstream in_;
    std::string path_;
};

}  // namespace sdrom
