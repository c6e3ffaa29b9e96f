#pragma once
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "tensorbundle/errors.hpp"

namespace tbundle {

// Dense row-major array with a small runtime rank. Everything in this
// library is tiny (base dimension <= 4, bundle dimension <= a few hundred),
// so there is no sparsity and no expression machinery; index formulas are
// written as explicit loops at the call sites.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, const T& fill = T{})
        : shape_(std::move(shape)) {
        std::size_t total = 1;
        for (int s : shape_) {
            assert(s >= 0);
            total *= static_cast<std::size_t>(s);
        }
        data_.assign(total, fill);
        strides_.resize(shape_.size());
        std::size_t acc = 1;
        for (std::size_t k = shape_.size(); k-- > 0;) {
            strides_[k] = acc;
            acc *= static_cast<std::size_t>(shape_[k]);
        }
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    template <typename... Ix>
    T& operator()(Ix... ix) {
        return data_[flatten(ix...)];
    }
    template <typename... Ix>
    const T& operator()(Ix... ix) const {
        return data_[flatten(ix...)];
    }

    void fill(const T& v) { data_.assign(data_.size(), v); }

    // Max |entry|; only meaningful for arithmetic T.
    double max_abs() const {
        double m = 0.0;
        for (const T& v : data_) {
            double a = std::abs(static_cast<double>(v));
            if (a > m) m = a;
        }
        return m;
    }

private:
    template <typename... Ix>
    std::size_t flatten(Ix... ix) const {
        assert(sizeof...(Ix) == shape_.size());
        std::size_t flat = 0;
        std::size_t k = 0;
        // Fold over the pack, row-major.
        ((flat += static_cast<std::size_t>(ix) * strides_[k], assert(ix >= 0 && ix < shape_[k]), ++k), ...);
        return flat;
    }

    std::vector<int> shape_;
    std::vector<std::size_t> strides_;
    std::vector<T> data_;
};

using DTensor = Tensor<double>;

// Square matrix helpers used all over the geometry code (n <= ~300).
using Matrix = std::vector<std::vector<double>>;

inline Matrix make_matrix(int n, int m) {
    return Matrix(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m), 0.0));
}

// Cholesky factorization of a symmetric matrix; returns false if the matrix
// is not (numerically) positive definite.
inline bool cholesky(const Matrix& a, Matrix& l) {
    const int n = static_cast<int>(a.size());
    l = make_matrix(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i][j];
            for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
            if (i == j) {
                if (!(sum > 0.0)) return false;
                l[i][i] = std::sqrt(sum);
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    return true;
}

// Gauss-Jordan inverse with partial pivoting. Throws on singular input.
inline Matrix invert(Matrix a) {
    const int n = static_cast<int>(a.size());
    Matrix inv = make_matrix(n, n);
    for (int i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0) throw BadParameter("singular matrix in invert()");
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        const double d = a[col][col];
        for (int c = 0; c < n; ++c) {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double m = a[r][col];
            if (m == 0.0) continue;
            for (int c = 0; c < n; ++c) {
                a[r][c] -= m * a[col][c];
                inv[r][c] -= m * inv[col][c];
            }
        }
    }
    return inv;
}

inline std::vector<double> mat_vec(const Matrix& a, const std::vector<double>& x) {
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
    return y;
}

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
    const std::size_t n = a.size(), m = b[0].size(), k = b.size();
    Matrix c = make_matrix(static_cast<int>(n), static_cast<int>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[i][l];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) c[i][j] += av * b[l][j];
        }
    return c;
}

} // namespace tbundle
