#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "latentfuse/errors.hpp"
#include "latentfuse/timeseries.hpp"

namespace latentfuse {

/// Formats a double with 17 significant digits, enough to round-trip.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Writes a matrix as CSV with one header row naming the columns.
inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                             const std::vector<std::string>& columns) {
    if (static_cast<Eigen::Index>(columns.size()) != m.cols())
        throw InvalidInputError("write_matrix_csv: header width does not match matrix");
    std::ofstream out(path);
    if (!out)
        throw FormatError("cannot write '" + path + "'");
    for (std::size_t j = 0; j < columns.size(); ++j)
        out << (j ? "," : "") << columns[j];
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
    if (!out)
        throw FormatError("write failed for '" + path + "'");
}

/// Loaded CSV table: column names plus the numeric body.
struct CsvTable {
    std::vector<std::string> columns;
    Eigen::MatrixXd data;
};

/// Reads a CSV written by write_matrix_csv (header row, numeric body).
inline CsvTable read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open '" + path + "'");
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line))
        throw FormatError("empty file '" + path + "'", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    CsvTable table;
    table.columns = detail::split_csv_line(line);
    const std::size_t width = table.columns.size();
    std::vector<double> body;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != width)
            throw FormatError("expected " + std::to_string(width) + " fields, got " +
                                  std::to_string(fields.size()),
                              line_no);
        for (const std::string& f : fields)
            body.push_back(detail::parse_field(f, line_no));
        ++rows;
    }
    table.data.resize(rows, static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(width); ++j)
            table.data(i, j) = body[static_cast<std::size_t>(i * static_cast<Eigen::Index>(width) + j)];
    return table;
}

}  // namespace latentfuse
