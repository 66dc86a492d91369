/**
 * @file csv.hpp
 * @brief Fixed-format CSV tables with a schema/digest header line.
 */
#pragma once

#include "homlab/error.hpp"

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace homlab {

/// 64-bit FNV-1a hash, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Formats a real in the fixed CSV style (%.12e).
inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

/// One CSV cell; integers print as integers, reals as %.12e.
class CsvCell {
public:
    template <class T, std::enable_if_t<std::is_integral_v<T> && !std::is_same_v<T, bool>, int> = 0>
    CsvCell(T v) : text_(std::to_string(v)) {}
    CsvCell(bool v) : text_(v ? "1" : "0") {}
    CsvCell(double v) : text_(format_real(v)) {}
    CsvCell(const char* s) : text_(s) {}
    CsvCell(std::string s) : text_(std::move(s)) {}
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

/**
 * Table with a frozen column list. First output line is
 * `# homlab schema=<kind>/v<version> config_digest=<digest>`.
 */
class CsvTable {
public:
    CsvTable() = default;
    CsvTable(std::string kind, std::vector<std::string> columns, int version = 1)
        : kind_(std::move(kind)), columns_(std::move(columns)), version_(version)
    {}

    void add(std::vector<CsvCell> row)
    {
        HOMLAB_THROW_IF(row.size() != columns_.size(), ShapeError,
                        "csv row has " + std::to_string(row.size()) + " cells, schema " + kind_ + " has " +
                            std::to_string(columns_.size()));
        std::vector<std::string> r;
        r.reserve(row.size());
        for (auto& c : row) r.push_back(c.text());
        rows_.push_back(std::move(r));
    }

    /// Free-form comment lines written after the header (e.g. estimate flags).
    void note(std::string line) { notes_.push_back(std::move(line)); }

    const std::string& kind() const { return kind_; }
    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }

    void write(std::ostream& os, const std::string& digest = "none") const
    {
        os << "# homlab schema=" << kind_ << "/v" << version_ << " config_digest=" << digest << '\n';
        for (const auto& n : notes_) os << "# " << n << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        }
    }

private:
    std::string kind_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::string> notes_;
    int version_ = 1;
};

} // namespace homlab
