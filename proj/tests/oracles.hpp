#pragma once

// Independent reference implementations used only by tests.

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/engine.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using mf2dfdr::Index;
using mf2dfdr::Matrix;
using mf2dfdr::StatTensor;
using mf2dfdr::Vector;

struct ScanResult {
    bool found = false;
    double t1 = mf2dfdr::kInfiniteCutoff, t2 = mf2dfdr::kInfiniteCutoff;
    std::vector<Index> rejected;
};

// Exhaustive double loop over the grid with a naive count of every pair at
// every point. fwer = true uses the Σ F̄ constraint.
inline ScanResult brute_force_scan(const StatTensor& t, const std::vector<double>& t1s, const std::vector<double>& t2s,
                                   double q, bool fwer, double pi0 = 1.0) {
    ScanResult best;
    std::int64_t best_r = -1;
    double best_v = 0.0;
    for (double a : t1s) {
        for (double c : t2s) {
            std::int64_t dom = 0, r = 0;
            for (Index b = 0; b < t.rows(); ++b)
                for (Index j = 0; j < t.m(); ++j) {
                    const auto s = t.at(b, j);
                    if (s.t_m >= a && s.t_c >= c) {
                        ++dom;
                        if (b == 0 && !t.degenerate(j)) ++r;
                    }
                }
            const double v = fwer ? mf2dfdr::engine::fwer_value(dom, t.rows())
                                  : mf2dfdr::engine::fdp_value(dom, t.rows(), r, pi0);
            if (!(v <= q)) continue;
            bool take = r > best_r;
            if (r == best_r) {
                if (v != best_v)
                    take = v < best_v;
                else
                    take = a < best.t1 || (a == best.t1 && c < best.t2);
            }
            if (take) {
                best_r = r;
                best_v = v;
                best.t1 = a;
                best.t2 = c;
                best.found = true;
            }
        }
    }
    if (!best.found || best_r == 0) return {};
    for (Index j = 0; j < t.m(); ++j) {
        const auto s = t.at(0, j);
        if (!t.degenerate(j) && s.t_m >= best.t1 && s.t_c >= best.t2) best.rejected.push_back(j);
    }
    return best;
}

// HSIC as the V-statistic double sums: (1/n^2)ΣK L + (1/n^4)ΣK ΣL - (2/n^3)Σ_i (Σ_j K_ij)(Σ_k L_ik),
// scaled by n to match the (1/n) Tr(KHLH) convention.
inline double hsic_double_sum(const Matrix& x, const Matrix& y, double sigma_x, double sigma_y) {
    const Index n = x.rows();
    auto kernel = [](const Matrix& a, double s) {
        Matrix k(a.rows(), a.rows());
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.rows(); ++j) k(i, j) = std::exp(-(a.row(i) - a.row(j)).squaredNorm() / (2 * s * s));
        return k;
    };
    const Matrix k = kernel(x, sigma_x), l = kernel(y, sigma_y);
    double t1 = 0, sk = 0, sl = 0, t3 = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            t1 += k(i, j) * l(i, j);
            sk += k(i, j);
            sl += l(i, j);
        }
    for (Index i = 0; i < n; ++i) {
        double ki = 0, li = 0;
        for (Index j = 0; j < n; ++j) {
            ki += k(i, j);
            li += l(i, j);
        }
        t3 += ki * li;
    }
    const double nd = static_cast<double>(n);
    const double v = t1 / (nd * nd) + sk * sl / (nd * nd * nd * nd) - 2.0 * t3 / (nd * nd * nd);
    return nd * v;
}

// Natural cubic spline interpolant through (knots, values) via the
// tridiagonal second-derivative system with M_0 = M_{K-1} = 0.
inline double natural_spline_interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double at) {
    const std::size_t k = xs.size();
    std::vector<double> h(k - 1), m(k, 0.0);
    for (std::size_t i = 0; i + 1 < k; ++i) h[i] = xs[i + 1] - xs[i];
    if (k > 2) {
        const std::size_t n = k - 2;
        std::vector<double> a(n), b(n), c(n), d(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = h[i];
            b[i] = 2 * (h[i] + h[i + 1]);
            c[i] = h[i + 1];
            d[i] = 6 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        m[n] = d[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m[i + 1] = (d[i] - c[i] * m[i + 2]) / b[i];
    }
    std::size_t s = 0;
    while (s + 2 < k && at > xs[s + 1]) ++s;
    const double t = at - xs[s], u = xs[s + 1] - at, hs = h[s];
    if (at < xs[0] || at > xs[k - 1]) {
        // Linear beyond the boundary knots.
        const bool left = at < xs[0];
        const std::size_t i = left ? 0 : k - 2;
        const double slope = (ys[i + 1] - ys[i]) / h[i] + (left ? -h[i] * m[i + 1] / 6.0 : h[i] * m[i] / 6.0);
        return left ? ys[0] + slope * (at - xs[0]) : ys[k - 1] + slope * (at - xs[k - 1]);
    }
    return m[s] * u * u * u / (6 * hs) + m[s + 1] * t * t * t / (6 * hs) + (ys[s] / hs - m[s] * hs / 6) * u +
           (ys[s + 1] / hs - m[s + 1] * hs / 6) * t;
}

// Random tensor with values drawn from a small lattice so that ties occur.
inline StatTensor random_tensor(std::mt19937_64& rng, Index m, Index b, int levels = 12) {
    std::uniform_int_distribution<int> lv(0, levels);
    std::bernoulli_distribution signal(0.3);
    Matrix tm(b + 1, m), tc(b + 1, m);
    for (Index j = 0; j < m; ++j) {
        const bool s = signal(rng);
        for (Index r = 0; r <= b; ++r) {
            const int boost = (s && r == 0) ? levels / 2 : 0;
            tm(r, j) = 0.5 * (lv(rng) + boost);
            tc(r, j) = 0.25 * (lv(rng) + boost);
        }
    }
    return StatTensor::from_arrays(tm, tc);
}

}  // namespace oracle
