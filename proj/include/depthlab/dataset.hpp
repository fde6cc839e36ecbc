#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "depthlab/numerics.hpp"

namespace depthlab {

/// n observations of dimension p, one per row.
class Dataset {
public:
    explicit Dataset(Matrix rows) : x_(std::move(rows)) {
        if (x_.rows() < 1 || x_.cols() < 1) throw DataError("Dataset: need n >= 1 and p >= 1");
        if (!x_.allFinite()) throw DataError("Dataset: non-finite entries");
    }

    static Dataset from_values(const std::vector<double>& v) {
        Matrix m(static_cast<Eigen::Index>(v.size()), 1);
        for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
        return Dataset(std::move(m));
    }

    Eigen::Index n() const { return x_.rows(); }
    Eigen::Index p() const { return x_.cols(); }
    const Matrix& matrix() const { return x_; }
    Vector row(Eigen::Index i) const { return x_.row(i).transpose(); }

    std::vector<double> column(Eigen::Index j) const {
        std::vector<double> out(static_cast<std::size_t>(x_.rows()));
        for (Eigen::Index i = 0; i < x_.rows(); ++i) out[static_cast<std::size_t>(i)] = x_(i, j);
        return out;
    }

private:
    Matrix x_;
};

/// Regression sample: design x (n x p) and responses y (n x m).
struct RegressionData {
    RegressionData(Matrix design, Matrix response) : x(std::move(design)), y(std::move(response)) {
        if (x.rows() != y.rows()) throw DataError("RegressionData: row counts differ");
        if (x.rows() < 1 || x.cols() < 1 || y.cols() < 1)
            throw DataError("RegressionData: empty design or response");
        if (!x.allFinite() || !y.allFinite()) throw DataError("RegressionData: non-finite entries");
    }
    Eigen::Index n() const { return x.rows(); }
    Eigen::Index p() const { return x.cols(); }
    Eigen::Index m() const { return y.cols(); }

    Matrix x;
    Matrix y;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ';' || c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(' ');
        const auto e = f.find_last_not_of(' ');
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(s, &used);
    } catch (...) {
        return false;
    }
    return used == s.size();
}

}  // namespace detail

/// Numeric CSV, one row per observation. A non-numeric first line is taken as a header.
inline Matrix parse_csv_matrix(std::istream& in, const std::string& name = "input") {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (line[line.find_first_not_of(" \t")] == '#') continue;
        const auto fields = detail::split_fields(line);
        std::vector<double> row;
        bool numeric = true;
        for (const auto& f : fields) {
            double v;
            if (!detail::parse_double(f, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (rows.empty() && lineno == 1) continue;
            throw DataError(name + ": non-numeric value on line " + std::to_string(lineno));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(name + ": ragged row on line " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(name + ": no data rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

inline Matrix read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return parse_csv_matrix(in, path);
}

}  // namespace depthlab
