#pragma once

// MatrixMarket matrices, fixed-format CSV and the FNV-1a hash used to tag
// artifacts.

#include "bilimor/system.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace bilimor {

/// 17 significant digits, scientific.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

enum class MmFormat { Auto, Array, Coordinate };

/// Auto picks coordinate when at most a quarter of the entries are nonzero.
/// `comment` lines are written as '%' lines after the banner.
inline void write_matrix_market(const std::string& path, const Mat& X, MmFormat format = MmFormat::Auto,
                                const std::string& comment = {}) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path + " for writing");
    const Index nnz = (X.array() != 0.0).count();
    if (format == MmFormat::Auto) format = 4 * nnz <= X.size() ? MmFormat::Coordinate : MmFormat::Array;
    if (format == MmFormat::Coordinate) {
        out << "%%MatrixMarket matrix coordinate real general\n";
        if (!comment.empty()) out << '%' << comment << '\n';
        out << X.rows() << ' ' << X.cols() << ' ' << nnz << '\n';
        for (Index j = 0; j < X.cols(); ++j)
            for (Index i = 0; i < X.rows(); ++i)
                if (X(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << format_double(X(i, j)) << '\n';
    } else {
        out << "%%MatrixMarket matrix array real general\n";
        if (!comment.empty()) out << '%' << comment << '\n';
        out << X.rows() << ' ' << X.cols() << '\n';
        for (Index j = 0; j < X.cols(); ++j)
            for (Index i = 0; i < X.rows(); ++i) out << format_double(X(i, j)) << '\n';
    }
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

inline Mat read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Io, path + ": empty file");
    std::istringstream banner(line);
    std::string tag, object, fmt, field, symmetry;
    banner >> tag >> object >> fmt >> field >> symmetry;
    auto lower = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    require(tag == "%%MatrixMarket" && lower(object) == "matrix", ErrorKind::Io, path + ": not a MatrixMarket matrix");
    fmt = lower(fmt);
    require(lower(field) == "real" || lower(field) == "integer", ErrorKind::Io, path + ": only real fields are supported");
    require(lower(symmetry) == "general", ErrorKind::Io, path + ": only general symmetry is supported");
    do {
        require(static_cast<bool>(std::getline(in, line)), ErrorKind::Io, path + ": missing size line");
    } while (line.empty() || line[0] == '%');
    std::istringstream size(line);
    Index rows = 0, cols = 0, nnz = 0;
    size >> rows >> cols;
    require(!size.fail() && rows >= 0 && cols >= 0, ErrorKind::Io, path + ": bad size line");
    Mat X = Mat::Zero(rows, cols);
    if (fmt == "coordinate") {
        size >> nnz;
        require(!size.fail(), ErrorKind::Io, path + ": bad size line");
        for (Index k = 0; k < nnz; ++k) {
            Index i = 0, j = 0;
            double v = 0.0;
            require(static_cast<bool>(in >> i >> j >> v), ErrorKind::Io, path + ": truncated entries");
            require(i >= 1 && i <= rows && j >= 1 && j <= cols, ErrorKind::Io, path + ": index out of range");
            X(i - 1, j - 1) += v;
        }
    } else {
        require(fmt == "array", ErrorKind::Io, path + ": unknown format " + fmt);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i)
                require(static_cast<bool>(in >> X(i, j)), ErrorKind::Io, path + ": truncated entries");
    }
    return X;
}

/// CSV writer: a leading comment line carrying version and config hash, then
/// the header and rows in fixed scientific format.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns, const std::string& config_hash)
        : out_(path), width_(columns.size()) {
        require(static_cast<bool>(out_), ErrorKind::Io, "cannot open " + path + " for writing");
        out_ << "# bilimor " << kVersion << " config " << config_hash << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        require(values.size() == width_, ErrorKind::Dimension, "CSV row width mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
        out_ << '\n';
    }

  private:
    std::ofstream out_;
    std::size_t width_;
};

/// Control samples from CSV: rows "t,u_1,...,u_m" (lines starting with '#' and a
/// non-numeric header are skipped), linearly interpolated.
inline ControlSignal read_control_csv(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            require(times.empty(), ErrorKind::Io, path + ": non-numeric row after data");
            continue;
        }
        require(vals.size() >= 2, ErrorKind::Io, path + ": control rows need t and at least one channel");
        require(rows.empty() || vals.size() == rows.front().size() + 1, ErrorKind::Io, path + ": ragged rows");
        times.push_back(vals.front());
        rows.emplace_back(vals.begin() + 1, vals.end());
    }
    require(!rows.empty(), ErrorKind::Io, path + ": no samples");
    Mat values(static_cast<Index>(rows.front().size()), static_cast<Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t i = 0; i < rows[j].size(); ++i) values(static_cast<Index>(i), static_cast<Index>(j)) = rows[j][i];
    return ControlSignal::from_samples(std::move(times), std::move(values));
}

} // namespace bilimor
