#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "tensorbundle/errors.hpp"

namespace tbundle {

// Tensors of type (p,q): p upper (contravariant) slots, q lower (covariant)
// slots. A fiber component is addressed by the multi-index
// (i_1..i_p, j_1..j_q), flattened row-major with the upper block first:
//
//   flat(i_1..i_p, j_1..j_q) = ((((i_1*n + i_2)*n + ...)*n + j_1)*n + ...)*n + j_q
//
// all indices 0-based. Fiber basis index h-bar maps to n + flat(...) when a
// bundle-wide (horizontal + vertical) index is needed.
struct TensorType {
    int p = 1;
    int q = 1;

    int rank() const { return p + q; }

    std::int64_t fiber_dim(int n) const {
        std::int64_t d = 1;
        for (int k = 0; k < rank(); ++k) {
            d *= n;
            if (d > 65536) throw DimensionGuard("fiber dimension overflow");
        }
        return d;
    }

    bool operator==(const TensorType& o) const { return p == o.p && q == o.q; }
};

inline int flat_index(const std::vector<int>& idx, int n) {
    int f = 0;
    for (int k : idx) f = f * n + k;
    return f;
}

inline std::vector<int> unflat_index(int flat, int n, int rank) {
    std::vector<int> idx(static_cast<std::size_t>(rank), 0);
    for (int k = rank - 1; k >= 0; --k) {
        idx[static_cast<std::size_t>(k)] = flat % n;
        flat /= n;
    }
    return idx;
}

// Advance a multi-index odometer-style; returns false after the last one.
inline bool next_index(std::vector<int>& idx, int n) {
    for (std::size_t k = idx.size(); k-- > 0;) {
        if (++idx[k] < n) return true;
        idx[k] = 0;
    }
    return false;
}

// A point of the tensor bundle: base coordinates plus the fiber tensor,
// flattened per the convention above.
struct FiberPoint {
    std::vector<double> x;
    std::vector<double> t;
    TensorType type;

    int n() const { return static_cast<int>(x.size()); }
    int fiber_dim() const { return static_cast<int>(t.size()); }
    int bundle_dim() const { return n() + fiber_dim(); }

    void check() const {
        if (static_cast<std::int64_t>(t.size()) != type.fiber_dim(n()))
            throw ShapeMismatch("fiber component count does not match type (p,q) and dimension");
    }

    double t_at(const std::vector<int>& idx) const {
        return t[static_cast<std::size_t>(flat_index(idx, n()))];
    }
};

// Tangent vector of the bundle written in the adapted frame: `h` are the
// E_j components, `v` the E_jbar components.
struct AdaptedField {
    std::vector<double> h;
    std::vector<double> v;

    static AdaptedField zero(int n, int fiber) {
        return AdaptedField{std::vector<double>(static_cast<std::size_t>(n), 0.0),
                            std::vector<double>(static_cast<std::size_t>(fiber), 0.0)};
    }

    std::vector<double> flat() const {
        std::vector<double> out = h;
        out.insert(out.end(), v.begin(), v.end());
        return out;
    }
};

} // namespace tbundle
