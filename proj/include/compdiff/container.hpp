#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace compdiff::container {

// Payload files hold little-endian float32 in C order with a trailing
// little-endian CRC32 of all preceding bytes.

class PayloadWriter {
public:
    explicit PayloadWriter(const std::string& path);
    ~PayloadWriter();
    void append(const float* data, std::size_t n);
    void append(const double* data, std::size_t n);  // converted to float32
    std::uint32_t finish();                          // writes the CRC, closes

private:
    struct Impl;
    Impl* impl_;
};

// Verifies length and CRC up front; then serves random-access element ranges.
class PayloadReader {
public:
    PayloadReader(const std::string& path, std::size_t expect_elems);
    ~PayloadReader();
    void read(std::size_t elem_offset, std::size_t n, float* out) const;
    void read(std::size_t elem_offset, std::size_t n, double* out) const;
    std::uint32_t crc() const;

private:
    struct Impl;
    Impl* impl_;
};

std::uint32_t write_payload(const std::string& path, const std::vector<float>& data);
std::vector<float> read_payload(const std::string& path, std::size_t expect_elems);

}  // namespace compdiff::container
