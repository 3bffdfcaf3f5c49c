#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "hattn/matrix.hpp"

namespace hattn {

// HMX1 layout, all integers little-endian:
//   offset 0   magic "HMX1"
//   offset 4   dtype u8 (1 = f32, 2 = f64)
//   offset 5   3 zero bytes
//   offset 8   rows u64
//   offset 16  cols u64
//   offset 24  rows*cols IEEE-754 values, row-major
// The file size must be exactly 24 + rows*cols*sizeof(value).
namespace hmx {

inline constexpr std::array<char, 4> magic{'H', 'M', 'X', '1'};
inline constexpr std::size_t header_size = 24;
inline constexpr std::uint8_t dtype_f32 = 1;
inline constexpr std::uint8_t dtype_f64 = 2;

namespace detail {

template <typename U>
void put_le(std::vector<unsigned char>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const unsigned char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

template <Real T>
using bits_t = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;

template <Real T>
constexpr std::uint8_t dtype_code() {
    return std::is_same_v<T, float> ? dtype_f32 : dtype_f64;
}

inline std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IOError("cannot open " + path.string() + " for reading");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IOError("read failed for " + path.string());
    return bytes;
}

struct Header {
    std::uint8_t dtype;
    std::uint64_t rows;
    std::uint64_t cols;
};

inline Header parse_header(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < header_size)
        throw FormatError("file shorter than the 24-byte HMX1 header");
    if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0)
        throw FormatError("bad magic, expected HMX1");
    Header h{bytes[4], get_le<std::uint64_t>(bytes.data() + 8), get_le<std::uint64_t>(bytes.data() + 16)};
    if (h.dtype != dtype_f32 && h.dtype != dtype_f64)
        throw FormatError("unknown dtype code " + std::to_string(h.dtype));
    if (bytes[5] != 0 || bytes[6] != 0 || bytes[7] != 0)
        throw FormatError("reserved header bytes must be zero");
    if (h.rows == 0 || h.cols == 0)
        throw FormatError("matrix shape must be positive");
    const std::uint64_t width = h.dtype == dtype_f32 ? 4 : 8;
    if (h.cols > (UINT64_MAX / width) / h.rows)
        throw FormatError("matrix shape overflows");
    const std::uint64_t expected = header_size + h.rows * h.cols * width;
    if (bytes.size() != expected)
        throw FormatError("payload size " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected));
    return h;
}

template <Real T>
Matrix<T> decode(const std::vector<unsigned char>& bytes, const Header& h) {
    std::vector<T> values(h.rows * h.cols);
    const unsigned char* p = bytes.data() + header_size;
    for (auto& v : values) {
        v = std::bit_cast<T>(get_le<bits_t<T>>(p));
        p += sizeof(T);
    }
    try {
        return Matrix<T>(h.rows, h.cols, std::move(values));
    } catch (const NonFiniteValue&) {
        throw FormatError("payload contains a non-finite value");
    }
}

} // namespace detail

// Precision stored in a file, read from its header only.
inline Precision peek_precision(const std::filesystem::path& path) {
    const auto bytes = detail::read_all(path);
    return detail::parse_header(bytes).dtype == dtype_f32 ? Precision::f32 : Precision::f64;
}

} // namespace hmx

template <Real T>
void save_matrix(const Matrix<T>& m, const std::filesystem::path& path) {
    std::vector<unsigned char> out;
    out.reserve(hmx::header_size + m.size() * sizeof(T));
    out.insert(out.end(), hmx::magic.begin(), hmx::magic.end());
    out.push_back(hmx::detail::dtype_code<T>());
    out.insert(out.end(), 3, 0);
    hmx::detail::put_le<std::uint64_t>(out, m.rows());
    hmx::detail::put_le<std::uint64_t>(out, m.cols());
    for (T x : m.values())
        hmx::detail::put_le(out, std::bit_cast<hmx::detail::bits_t<T>>(x));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IOError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f)
        throw IOError("write failed for " + path.string());
}

// Loads a matrix of precision T. A file holding the other precision is a
// FormatError; use hmx::peek_precision to dispatch first.
template <Real T>
Matrix<T> load_matrix(const std::filesystem::path& path) {
    const auto bytes = hmx::detail::read_all(path);
    const auto header = hmx::detail::parse_header(bytes);
    if (header.dtype != hmx::detail::dtype_code<T>())
        throw FormatError("file precision does not match the requested precision");
    return hmx::detail::decode<T>(bytes, header);
}

} // namespace hattn
