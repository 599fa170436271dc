#ifndef ADPREDICT_MATRIX_HPP
#define ADPREDICT_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "adpredict/error.hpp"

namespace adpredict {

/// Dense row-major matrix of doubles; one row per sample.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_) throw ArgumentError("Matrix::from_rows: ragged rows");
            std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Compressed sparse rows: the nonzero entries of a Matrix.
struct SparseRows {
    std::size_t cols = 0;
    std::vector<std::size_t> row_start{0};
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    static SparseRows from(const Matrix& m) {
        SparseRows s;
        s.cols = m.cols();
        s.row_start.reserve(m.rows() + 1);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const auto row = m.row(r);
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (row[j] != 0.0) {
                    s.index.push_back(static_cast<std::uint32_t>(j));
                    s.value.push_back(row[j]);
                }
            }
            s.row_start.push_back(s.index.size());
        }
        return s;
    }

    std::size_t rows() const { return row_start.size() - 1; }
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double log1p_exp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline void check_training_data(const Matrix& x, std::span<const int> y) {
    if (x.rows() == 0) throw DataError("training set is empty");
    if (x.rows() != y.size()) throw ArgumentError("feature rows and labels differ in length");
    if (!x.all_finite()) throw DataError("non-finite feature value");
    for (int v : y) {
        if (v != 0 && v != 1) throw ArgumentError("labels must be 0 or 1");
    }
}

}  // namespace adpredict

#endif  // ADPREDICT_MATRIX_HPP
