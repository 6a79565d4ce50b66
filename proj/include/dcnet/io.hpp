#pragma once

// Byte-deterministic formatting and small file/stream helpers. All floats in
// text artifacts go through fmt17 so identical runs produce identical bytes.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dcnet/errors.hpp"

namespace dcnet {

// Shortest 17-significant-digit decimal; round-trips doubles exactly.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

inline std::string fmt_fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
    return std::string(buf);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw missing_artifact_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw checkpoint_error("cannot write file: " + path);
    out << content;
    if (!out) throw checkpoint_error("write failed: " + path);
}

// FNV-1a, used for config fingerprints in manifests.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& s) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(s)));
    return std::string(buf);
}

// CRC32 (IEEE), protects binary checkpoint payloads.
inline std::uint32_t crc32_bytes(const std::uint8_t* data, std::size_t n) {
    static const auto table = [] {
        std::vector<std::uint32_t> t(256);
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

// Little-endian binary buffer writer/reader for checkpoints.
class BinWriter {
public:
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    void vec(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

    void save(const std::string& path, const char* magic) const {
        std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw checkpoint_error("cannot write checkpoint: " + path);
        out.write(magic, static_cast<std::streamsize>(std::strlen(magic)));
        const std::uint32_t crc = crc32_bytes(buf_.data(), buf_.size());
        const std::uint64_t n = buf_.size();
        out.write(reinterpret_cast<const char*>(&n), 8);
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(n));
        out.write(reinterpret_cast<const char*>(&crc), 4);
        if (!out) throw checkpoint_error("checkpoint write failed: " + path);
    }

private:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<std::uint8_t> buf_;
};

class BinReader {
public:
    BinReader(std::vector<std::uint8_t> buf) : buf_(std::move(buf)) {}

    static BinReader load(const std::string& path, const char* magic) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw missing_artifact_error("cannot open checkpoint: " + path);
        const std::size_t mlen = std::strlen(magic);
        std::vector<char> head(mlen);
        in.read(head.data(), static_cast<std::streamsize>(mlen));
        if (!in || std::memcmp(head.data(), magic, mlen) != 0)
            throw checkpoint_error("checkpoint magic mismatch: " + path);
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), 8);
        if (!in) throw checkpoint_error("truncated checkpoint: " + path);
        std::vector<std::uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        std::uint32_t crc = 0;
        in.read(reinterpret_cast<char*>(&crc), 4);
        if (!in) throw checkpoint_error("truncated checkpoint: " + path);
        if (crc32_bytes(buf.data(), buf.size()) != crc)
            throw checkpoint_error("checkpoint integrity check failed: " + path);
        return BinReader(std::move(buf));
    }

    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        check(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<double> vec() {
        const std::uint64_t n = u64();
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    void check(std::uint64_t n) const {
        if (pos_ + n > buf_.size()) throw checkpoint_error("checkpoint payload truncated");
    }
    void raw(void* p, std::size_t n) {
        check(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

}  // namespace dcnet
