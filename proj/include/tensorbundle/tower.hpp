#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "tensorbundle/errors.hpp"

namespace tbundle {

// Forward-mode derivative propagation on truncated multivariate Taylor
// series. A Tower holds the coefficients c_alpha = (d^alpha f)(x0) / alpha!
// for all multi-indices |alpha| <= order, so every arithmetic operation and
// primitive below is exact up to rounding; there is no truncation error in
// any derivative the tower can represent. Orders up to 4 and up to 4
// variables are all this library ever needs.
class TowerLayout {
public:
    int nvars = 0;
    int order = 0;
    // exps[k] = exponent vector of the k-th multi-index, graded order
    // (total degree ascending, lexicographic within a degree).
    std::vector<std::vector<int>> exps;
    std::vector<int> degree;
    std::vector<double> alpha_factorial; // prod_i (e_i!)
    // prod[i*count+j] = index of exps[i]+exps[j], or -1 when the sum exceeds order.
    std::vector<int> prod;
    // shift[v][k] = index of exps[k]+e_v, or -1.
    std::vector<std::vector<int>> shift;

    int count() const { return static_cast<int>(exps.size()); }

    int at(const std::vector<int>& e) const {
        auto it = pos_.find(e);
        return it == pos_.end() ? -1 : it->second;
    }

    static const TowerLayout& get(int nvars, int order) {
        static std::mutex mu;
        static std::map<std::pair<int, int>, std::unique_ptr<TowerLayout>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_pair(nvars, order);
        auto it = cache.find(key);
        if (it != cache.end()) return *it->second;
        auto lay = std::make_unique<TowerLayout>();
        lay->build(nvars, order);
        const TowerLayout& ref = *lay;
        cache.emplace(key, std::move(lay));
        return ref;
    }

private:
    std::map<std::vector<int>, int> pos_;

    void build(int nv, int ord) {
        nvars = nv;
        order = ord;
        std::vector<int> e(static_cast<std::size_t>(nv), 0);
        for (int deg = 0; deg <= ord; ++deg) enumerate(e, 0, deg);
        for (int k = 0; k < count(); ++k) pos_[exps[k]] = k;
        degree.resize(exps.size());
        alpha_factorial.resize(exps.size());
        for (int k = 0; k < count(); ++k) {
            int d = 0;
            double f = 1.0;
            for (int v = 0; v < nv; ++v) {
                d += exps[k][v];
                for (int m = 2; m <= exps[k][v]; ++m) f *= m;
            }
            degree[k] = d;
            alpha_factorial[k] = f;
        }
        prod.assign(static_cast<std::size_t>(count()) * count(), -1);
        std::vector<int> sum(static_cast<std::size_t>(nv));
        for (int i = 0; i < count(); ++i)
            for (int j = 0; j < count(); ++j) {
                if (degree[i] + degree[j] > ord) continue;
                for (int v = 0; v < nv; ++v) sum[v] = exps[i][v] + exps[j][v];
                prod[static_cast<std::size_t>(i) * count() + j] = pos_.at(sum);
            }
        shift.assign(static_cast<std::size_t>(nv), std::vector<int>(exps.size(), -1));
        for (int v = 0; v < nv; ++v)
            for (int k = 0; k < count(); ++k) {
                if (degree[k] + 1 > ord) continue;
                sum = exps[k];
                ++sum[v];
                shift[v][k] = pos_.at(sum);
            }
    }

    void enumerate(std::vector<int>& e, int v, int remaining) {
        if (v == nvars - 1 || nvars == 0) {
            if (nvars > 0) e[v] = remaining;
            exps.push_back(e);
            return;
        }
        for (int take = remaining; take >= 0; --take) {
            e[v] = take;
            enumerate(e, v + 1, remaining - take);
        }
        e[v] = 0;
    }
};

class Tower {
public:
    Tower() : lay_(&TowerLayout::get(0, 0)), c_(1, 0.0) {}

    Tower(int nvars, int order, double value = 0.0)
        : lay_(&TowerLayout::get(nvars, order)), c_(static_cast<std::size_t>(lay_->count()), 0.0) {
        c_[0] = value;
    }

    static Tower constant(int nvars, int order, double value) { return Tower(nvars, order, value); }

    static Tower variable(int nvars, int order, int v, double value) {
        Tower t(nvars, order, value);
        if (order >= 1) t.c_[static_cast<std::size_t>(t.lay_->shift[v][0])] = 1.0;
        return t;
    }

    int nvars() const { return lay_->nvars; }
    int order() const { return lay_->order; }
    double value() const { return c_[0]; }

    bool is_zero() const {
        for (double v : c_)
            if (v != 0.0) return false;
        return true;
    }

    // d^alpha f at the expansion point, alpha given as an exponent vector.
    double deriv(const std::vector<int>& alpha) const {
        int k = lay_->at(alpha);
        if (k < 0) throw ShapeMismatch("derivative order exceeds tower order");
        return c_[static_cast<std::size_t>(k)] * lay_->alpha_factorial[k];
    }

    double partial(int i) const {
        std::vector<int> a(static_cast<std::size_t>(lay_->nvars), 0);
        a[i] = 1;
        return deriv(a);
    }
    double partial(int i, int j) const {
        std::vector<int> a(static_cast<std::size_t>(lay_->nvars), 0);
        ++a[i];
        ++a[j];
        return deriv(a);
    }
    double partial(int i, int j, int k) const {
        std::vector<int> a(static_cast<std::size_t>(lay_->nvars), 0);
        ++a[i];
        ++a[j];
        ++a[k];
        return deriv(a);
    }

    // Tower of df/dx_v, one order lower. Used to chain derivatives through
    // derived quantities (metric -> connection -> curvature).
    Tower partial_tower(int v) const {
        if (lay_->order < 1) throw ShapeMismatch("partial_tower on order-0 tower");
        Tower r(lay_->nvars, lay_->order - 1);
        const TowerLayout& rl = *r.lay_;
        for (int k = 0; k < rl.count(); ++k) {
            std::vector<int> e = rl.exps[k];
            ++e[v];
            int src = lay_->at(e);
            r.c_[static_cast<std::size_t>(k)] =
                c_[static_cast<std::size_t>(src)] * (e[v]);
        }
        return r;
    }

    // Truncate to a lower order (drop high coefficients).
    Tower truncated(int order) const {
        Tower r(lay_->nvars, order);
        const TowerLayout& rl = *r.lay_;
        for (int k = 0; k < rl.count(); ++k)
            r.c_[static_cast<std::size_t>(k)] = c_[static_cast<std::size_t>(lay_->at(rl.exps[k]))];
        return r;
    }

    friend Tower operator+(const Tower& a, const Tower& b) {
        Tower r = a;
        for (std::size_t k = 0; k < r.c_.size(); ++k) r.c_[k] += b.c_[k];
        return r;
    }
    friend Tower operator-(const Tower& a, const Tower& b) {
        Tower r = a;
        for (std::size_t k = 0; k < r.c_.size(); ++k) r.c_[k] -= b.c_[k];
        return r;
    }
    friend Tower operator-(const Tower& a) {
        Tower r = a;
        for (double& v : r.c_) v = -v;
        return r;
    }
    friend Tower operator+(const Tower& a, double s) {
        Tower r = a;
        r.c_[0] += s;
        return r;
    }
    friend Tower operator+(double s, const Tower& a) { return a + s; }
    friend Tower operator-(const Tower& a, double s) { return a + (-s); }
    friend Tower operator-(double s, const Tower& a) { return -a + s; }
    friend Tower operator*(const Tower& a, double s) {
        Tower r = a;
        for (double& v : r.c_) v *= s;
        return r;
    }
    friend Tower operator*(double s, const Tower& a) { return a * s; }
    friend Tower operator/(const Tower& a, double s) { return a * (1.0 / s); }

    friend Tower operator*(const Tower& a, const Tower& b) {
        const TowerLayout& L = *a.lay_;
        Tower r(L.nvars, L.order);
        const int cnt = L.count();
        for (int i = 0; i < cnt; ++i) {
            const double ai = a.c_[static_cast<std::size_t>(i)];
            if (ai == 0.0) continue;
            const int* row = L.prod.data() + static_cast<std::size_t>(i) * cnt;
            for (int j = 0; j < cnt; ++j) {
                const int k = row[j];
                if (k < 0) continue;
                r.c_[static_cast<std::size_t>(k)] += ai * b.c_[static_cast<std::size_t>(j)];
            }
        }
        return r;
    }

    friend Tower operator/(const Tower& a, const Tower& b) {
        if (b.c_[0] == 0.0) throw DomainError("division by zero");
        // Solve c * b = a coefficient-by-coefficient in graded order.
        const TowerLayout& L = *a.lay_;
        Tower r(L.nvars, L.order);
        const int cnt = L.count();
        for (int k = 0; k < cnt; ++k) {
            double acc = a.c_[static_cast<std::size_t>(k)];
            // All decompositions k = i + j with j != 0 use already-final c_i
            // because graded order makes deg(i) < deg(k) whenever deg(j) > 0.
            for (int i = 0; i < cnt; ++i) {
                if (L.degree[i] >= L.degree[k] && i != k) continue;
                for (int j = 1; j < cnt; ++j) {
                    if (L.prod[static_cast<std::size_t>(i) * cnt + j] != k) continue;
                    acc -= r.c_[static_cast<std::size_t>(i)] * b.c_[static_cast<std::size_t>(j)];
                }
            }
            r.c_[static_cast<std::size_t>(k)] = acc / b.c_[0];
        }
        return r;
    }

    friend Tower operator/(double s, const Tower& b) {
        return Tower::constant(b.lay_->nvars, b.lay_->order, s) / b;
    }

    // phi composed with this tower; univ[k] = phi^{(k)}(value())/k!.
    Tower compose(const std::vector<double>& univ) const {
        const TowerLayout& L = *lay_;
        Tower w = *this;
        w.c_[0] = 0.0; // w = f - f(x0); nilpotent to order+1
        Tower r = Tower::constant(L.nvars, L.order, univ[static_cast<std::size_t>(L.order)]);
        for (int k = L.order - 1; k >= 0; --k) r = r * w + univ[static_cast<std::size_t>(k)];
        return r;
    }

    friend Tower sin(const Tower& a) { return a.trig(true); }
    friend Tower cos(const Tower& a) { return a.trig(false); }

    friend Tower exp(const Tower& a) {
        const double e0 = std::exp(a.c_[0]);
        std::vector<double> u(static_cast<std::size_t>(a.lay_->order) + 1);
        double fact = 1.0;
        for (int k = 0; k <= a.lay_->order; ++k) {
            if (k > 0) fact *= k;
            u[static_cast<std::size_t>(k)] = e0 / fact;
        }
        return a.compose(u);
    }

    friend Tower log(const Tower& a) {
        const double x0 = a.c_[0];
        if (!(x0 > 0.0)) throw DomainError("log of non-positive value");
        std::vector<double> u(static_cast<std::size_t>(a.lay_->order) + 1);
        u[0] = std::log(x0);
        // d^k log = (-1)^{k-1} (k-1)! / x0^k, divided by k!.
        double p = x0;
        for (int k = 1; k <= a.lay_->order; ++k) {
            u[static_cast<std::size_t>(k)] = ((k % 2) ? 1.0 : -1.0) / (k * p);
            p *= x0;
        }
        return a.compose(u);
    }

    friend Tower sqrt(const Tower& a) {
        const double x0 = a.c_[0];
        if (x0 < 0.0) throw DomainError("sqrt of negative value");
        if (x0 == 0.0) throw DomainError("sqrt not differentiable at zero");
        std::vector<double> u(static_cast<std::size_t>(a.lay_->order) + 1);
        // d^k sqrt / k! = C(1/2, k) x0^{1/2-k}
        double coef = std::sqrt(x0);
        u[0] = coef;
        for (int k = 1; k <= a.lay_->order; ++k) {
            coef *= (0.5 - (k - 1)) / (k * x0);
            u[static_cast<std::size_t>(k)] = coef;
        }
        return a.compose(u);
    }

    // Integer power by binary exponentiation; m < 0 uses the reciprocal.
    friend Tower pow_int(const Tower& a, int m) {
        if (m < 0) return 1.0 / pow_int(a, -m);
        Tower r = Tower::constant(a.lay_->nvars, a.lay_->order, 1.0);
        Tower base = a;
        int e = m;
        while (e > 0) {
            if (e & 1) r = r * base;
            base = base * base;
            e >>= 1;
        }
        return r;
    }

private:
    Tower trig(bool is_sin) const {
        const double s0 = std::sin(c_[0]);
        const double c0 = std::cos(c_[0]);
        std::vector<double> u(static_cast<std::size_t>(lay_->order) + 1);
        double fact = 1.0;
        for (int k = 0; k <= lay_->order; ++k) {
            if (k > 0) fact *= k;
            // cycle sin -> cos -> -sin -> -cos
            double d;
            switch (k % 4) {
                case 0: d = is_sin ? s0 : c0; break;
                case 1: d = is_sin ? c0 : -s0; break;
                case 2: d = is_sin ? -s0 : -c0; break;
                default: d = is_sin ? -c0 : s0; break;
            }
            u[static_cast<std::size_t>(k)] = d / fact;
        }
        return compose(u);
    }

    const TowerLayout* lay_;
    std::vector<double> c_;
};

// double analog so generic code can run on plain scalars with the same name.
inline double pow_int(double a, int m) {
    double r = std::pow(a, m);
    return r;
}

} // namespace tbundle
