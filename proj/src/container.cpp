#include "compdiff/container.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>

#include <zlib.h>

#include "compdiff/errors.hpp"

namespace compdiff::container {

namespace {

void put_u32_le(std::uint32_t v, unsigned char* b) {
    b[0] = v & 0xff;
    b[1] = (v >> 8) & 0xff;
    b[2] = (v >> 16) & 0xff;
    b[3] = (v >> 24) & 0xff;
}

std::uint32_t get_u32_le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

struct PayloadWriter::Impl {
    std::FILE* f = nullptr;
    std::uint32_t crc = 0;
    std::string path;
    bool finished = false;
    std::vector<float> conv;
};

PayloadWriter::PayloadWriter(const std::string& path) : impl_(new Impl) {
    impl_->path = path;
    impl_->f = std::fopen(path.c_str(), "wb");
    if (!impl_->f) throw IoError("cannot open payload for writing: " + path);
    impl_->crc = crc32(0L, Z_NULL, 0);
}

PayloadWriter::~PayloadWriter() {
    if (impl_->f) std::fclose(impl_->f);
    delete impl_;
}

void PayloadWriter::append(const float* data, std::size_t n) {
    if (impl_->finished) throw IoError("payload writer already finished");
    impl_->crc = crc32(impl_->crc, reinterpret_cast<const Bytef*>(data),
                       static_cast<uInt>(n * sizeof(float)));
    if (std::fwrite(data, sizeof(float), n, impl_->f) != n)
        throw IoError("short write to payload: " + impl_->path);
}

void PayloadWriter::append(const double* data, std::size_t n) {
    impl_->conv.resize(n);
    for (std::size_t i = 0; i < n; ++i) impl_->conv[i] = static_cast<float>(data[i]);
    append(impl_->conv.data(), n);
}

std::uint32_t PayloadWriter::finish() {
    unsigned char tail[4];
    put_u32_le(impl_->crc, tail);
    if (std::fwrite(tail, 1, 4, impl_->f) != 4)
        throw IoError("short write to payload: " + impl_->path);
    std::fclose(impl_->f);
    impl_->f = nullptr;
    impl_->finished = true;
    return impl_->crc;
}

struct PayloadReader::Impl {
    std::FILE* f = nullptr;
    std::uint32_t crc = 0;
    std::string path;
    mutable std::vector<float> conv;
};

PayloadReader::PayloadReader(const std::string& path, std::size_t expect_elems)
    : impl_(nullptr) {
    struct FileGuard {
        std::FILE* f;
        ~FileGuard() {
            if (f) std::fclose(f);
        }
    } guard{std::fopen(path.c_str(), "rb")};
    if (!guard.f) throw IoError("cannot open payload: " + path);
    std::fseek(guard.f, 0, SEEK_END);
    const long size = std::ftell(guard.f);
    const std::size_t want = expect_elems * sizeof(float) + 4;
    if (static_cast<std::size_t>(size) != want)
        throw IoError("truncated payload: " + path + " (have " + std::to_string(size) +
                      " bytes, want " + std::to_string(want) + ")");
    // Stream the whole file once to verify the trailing CRC.
    std::fseek(guard.f, 0, SEEK_SET);
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    std::vector<unsigned char> buf(1 << 20);
    std::size_t remaining = expect_elems * sizeof(float);
    while (remaining > 0) {
        const std::size_t chunk = std::min(remaining, buf.size());
        if (std::fread(buf.data(), 1, chunk, guard.f) != chunk)
            throw IoError("short read from payload: " + path);
        crc = crc32(crc, buf.data(), static_cast<uInt>(chunk));
        remaining -= chunk;
    }
    unsigned char tail[4];
    if (std::fread(tail, 1, 4, guard.f) != 4) throw IoError("short read from payload: " + path);
    if (get_u32_le(tail) != crc) throw IoError("checksum mismatch in payload: " + path);

    impl_ = new Impl;
    impl_->path = path;
    impl_->crc = crc;
    impl_->f = guard.f;
    guard.f = nullptr;
}

PayloadReader::~PayloadReader() {
    if (impl_) {
        if (impl_->f) std::fclose(impl_->f);
        delete impl_;
    }
}

void PayloadReader::read(std::size_t elem_offset, std::size_t n, float* out) const {
    std::fseek(impl_->f, static_cast<long>(elem_offset * sizeof(float)), SEEK_SET);
    if (std::fread(out, sizeof(float), n, impl_->f) != n)
        throw IoError("short read from payload: " + impl_->path);
}

void PayloadReader::read(std::size_t elem_offset, std::size_t n, double* out) const {
    impl_->conv.resize(n);
    read(elem_offset, n, impl_->conv.data());
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(impl_->conv[i]);
}

std::uint32_t PayloadReader::crc() const { return impl_->crc; }

std::uint32_t write_payload(const std::string& path, const std::vector<float>& data) {
    PayloadWriter w(path);
    w.append(data.data(), data.size());
    return w.finish();
}

std::vector<float> read_payload(const std::string& path, std::size_t expect_elems) {
    PayloadReader r(path, expect_elems);
    std::vector<float> out(expect_elems);
    r.read(0, expect_elems, out.data());
    return out;
}

}  // namespace compdiff::container
