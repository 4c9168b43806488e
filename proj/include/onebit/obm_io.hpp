#pragma once

// OBM1 binary matrix files:
//   "OBM1" | u8 dtype (1 = f64, 2 = i8 of +/-1) | u64 rows | u64 cols | payload
// All integers and the payload are little-endian; the payload is row-major.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "signal_model.hpp"

namespace onebit {

enum class ObmDtype : std::uint8_t { f64 = 1, i8 = 2 };

inline constexpr std::array<char, 4> kObmMagic{'O', 'B', 'M', '1'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v)
{
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline std::uint64_t get_u64(std::istream& is)
{
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw FormatError("OBM1: truncated header");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

inline void put_f64(std::ostream& os, double x)
{
    put_u64(os, std::bit_cast<std::uint64_t>(x));
}

inline std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    return os;
}

inline void write_header(std::ostream& os, ObmDtype dtype, Eigen::Index rows, Eigen::Index cols)
{
    os.write(kObmMagic.data(), 4);
    const auto code = static_cast<char>(dtype);
    os.write(&code, 1);
    put_u64(os, static_cast<std::uint64_t>(rows));
    put_u64(os, static_cast<std::uint64_t>(cols));
}

} // namespace detail

inline void write_obm(const std::filesystem::path& path, const Eigen::MatrixXd& x)
{
    auto os = detail::open_out(path);
    detail::write_header(os, ObmDtype::f64, x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) detail::put_f64(os, x(i, j));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline void write_obm(const std::filesystem::path& path, const SignedMatrix& y)
{
    auto os = detail::open_out(path);
    detail::write_header(os, ObmDtype::i8, y.n_fast(), y.m_slow());
    for (Eigen::Index i = 0; i < y.n_fast(); ++i)
        for (Eigen::Index j = 0; j < y.m_slow(); ++j) {
            const char v = y(i, j) > 0 ? char{1} : char{-1};
            os.write(&v, 1);
        }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

/// Raw contents of an OBM1 file; i8 payloads are widened to double.
struct ObmMatrix {
    ObmDtype dtype;
    Eigen::MatrixXd values;
};

inline ObmMatrix read_obm(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingFile("cannot open: " + path.string());
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4) || magic != kObmMagic) throw FormatError("OBM1: bad magic");
    char code = 0;
    if (!is.read(&code, 1)) throw FormatError("OBM1: truncated header");
    const auto dtype = static_cast<ObmDtype>(static_cast<std::uint8_t>(code));
    if (dtype != ObmDtype::f64 && dtype != ObmDtype::i8) throw FormatError("OBM1: unknown dtype");
    const std::uint64_t rows = detail::get_u64(is);
    const std::uint64_t cols = detail::get_u64(is);
    if (rows == 0 || cols == 0 || rows > (1ull << 32) || cols > (1ull << 32))
        throw FormatError("OBM1: implausible dimensions");

    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (dtype == ObmDtype::f64) {
                x(i, j) = std::bit_cast<double>(detail::get_u64(is));
            } else {
                char v = 0;
                if (!is.read(&v, 1)) throw FormatError("OBM1: truncated payload");
                if (v != 1 && v != -1) throw FormatError("OBM1: i8 payload must be +/-1");
                x(i, j) = static_cast<double>(v);
            }
        }
    return {dtype, std::move(x)};
}

/// Reads a real (f64) matrix, optionally cropping to the leading rows x cols.
inline Eigen::MatrixXd read_obm_real(const std::filesystem::path& path,
                                     std::optional<Eigen::Index> rows = std::nullopt,
                                     std::optional<Eigen::Index> cols = std::nullopt)
{
    auto m = read_obm(path);
    if (m.dtype != ObmDtype::f64) throw FormatError("expected real matrix");
    const Eigen::Index r = rows.value_or(m.values.rows());
    const Eigen::Index c = cols.value_or(m.values.cols());
    if (r > m.values.rows() || c > m.values.cols())
        throw DimensionError("OBM1: requested crop exceeds stored matrix");
    return m.values.topLeftCorner(r, c);
}

inline SignedMatrix read_obm_signed(const std::filesystem::path& path)
{
    auto m = read_obm(path);
    if (m.dtype != ObmDtype::i8) throw FormatError("expected signed matrix");
    return SignedMatrix(std::move(m.values));
}

} // namespace onebit
