#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mmorient {

/// Row-major dense matrix of doubles. Vectors are stored as 1×n matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double value);
    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Stack of `count` equally shaped matrices, contiguous (e.g. N×L×d token features).
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t count, std::size_t rows, std::size_t cols, double fill = 0.0);

    std::size_t count() const { return count_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t r, std::size_t c) {
        return data_[(i * rows_ + r) * cols_ + c];
    }
    double operator()(std::size_t i, std::size_t r, std::size_t c) const {
        return data_[(i * rows_ + r) * cols_ + c];
    }

    Matrix slice(std::size_t i) const;
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool operator==(const Tensor3& other) const = default;

private:
    std::size_t count_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// True when shapes match and every element has the same bit pattern.
bool bitwise_equal(const Matrix& a, const Matrix& b);
bool bitwise_equal(const Tensor3& a, const Tensor3& b);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// Adds the 1×cols row vector `bias` to every row of `m`.
void add_row_vector(Matrix& m, const Matrix& bias);
/// Column sums as a 1×cols matrix.
Matrix column_sums(const Matrix& m);
/// In-place a += scale·b.
void axpy(double scale, const Matrix& b, Matrix& a);
/// Horizontal concatenation of equally tall blocks.
Matrix hconcat(std::initializer_list<const Matrix*> blocks);
/// Copy of columns [first, first+count).
Matrix columns(const Matrix& m, std::size_t first, std::size_t count);
/// Copy of the listed rows, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

bool all_finite(std::span<const double> values);

}  // namespace mmorient
