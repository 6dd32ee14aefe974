#include "mmorient/matrix.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mmorient/errors.hpp"

namespace mmorient {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer for Matrix");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) {
    for (auto& v : data_) v = value;
}

Tensor3::Tensor3(std::size_t count, std::size_t rows, std::size_t cols, double fill)
    : count_(count), rows_(rows), cols_(cols), data_(count * rows * cols, fill) {}

Matrix Tensor3::slice(std::size_t i) const {
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(i * rows_ * cols_);
    return Matrix(rows_, cols_,
                  std::vector<double>(first, first + static_cast<std::ptrdiff_t>(rows_ * cols_)));
}

namespace {
bool bitwise_equal_spans(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
}  // namespace

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.same_shape(b) && bitwise_equal_spans(a.values(), b.values());
}

bool bitwise_equal(const Tensor3& a, const Tensor3& b) {
    return a.count() == b.count() && a.rows() == b.rows() && a.cols() == b.cols() &&
           bitwise_equal_spans(a.values(), b.values());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            auto dst = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            out(i, j) = acc;
        }
    }
    return out;
}

void add_row_vector(Matrix& m, const Matrix& bias) {
    if (bias.rows() != 1 || bias.cols() != m.cols()) throw ShapeError("add_row_vector: bias shape");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) r[j] += bias(0, j);
    }
}

Matrix column_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j);
    }
    return out;
}

void axpy(double scale, const Matrix& b, Matrix& a) {
    if (!a.same_shape(b)) throw ShapeError("axpy: shape mismatch");
    auto dst = a.values();
    const auto src = b.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

Matrix hconcat(std::initializer_list<const Matrix*> blocks) {
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool first = true;
    for (const Matrix* b : blocks) {
        if (first) {
            rows = b->rows();
            first = false;
        } else if (b->rows() != rows) {
            throw ShapeError("hconcat: row counts differ");
        }
        cols += b->cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Matrix* b : blocks) {
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < b->cols(); ++j) out(i, offset + j) = (*b)(i, j);
        }
        offset += b->cols();
    }
    return out;
}

Matrix columns(const Matrix& m, std::size_t first, std::size_t count) {
    if (first + count > m.cols()) throw ShapeError("columns: range out of bounds");
    Matrix out(m.rows(), count);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, first + j);
    }
    return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m.rows()) throw ShapeError("gather_rows: index out of range");
        const auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

bool all_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace mmorient
