#pragma once

// Test-only oracles. Everything here is written independently of the
// library kernels it checks: plain double loops, direct formulas, no
// shared code paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "pil/rng.hpp"

namespace oracle {

// logits = x w, straight dot products.
inline std::vector<double> naive_forward(const std::vector<double>& x,
                                         const std::vector<double>& w, std::size_t d,
                                         std::size_t k) {
    std::vector<double> z(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t a = 0; a < d; ++a) z[c] += x[a] * w[a * k + c];
    return z;
}

inline std::vector<double> naive_softmax(const std::vector<double>& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    std::vector<double> p(z.size());
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

inline double naive_ce_loss(const std::vector<double>& x, const std::vector<double>& w,
                            std::size_t d, std::size_t k, std::size_t label) {
    const auto p = naive_softmax(naive_forward(x, w, d, k));
    return -std::log(p[label] + 1e-12);
}

inline double naive_kl_uniform_loss(const std::vector<double>& x, const std::vector<double>& w,
                                    std::size_t d, std::size_t k) {
    const auto p = naive_softmax(naive_forward(x, w, d, k));
    double acc = 0;
    for (std::size_t c = 0; c < k; ++c)
        acc += p[c] * std::log((p[c] + 1e-12) * static_cast<double>(k));
    return acc;
}

// Central finite differences of f over the coordinates of x.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f(x);
        x[i] = keep - h;
        const double fm = f(x);
        x[i] = keep;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Largest relative error between two gradient vectors, with an absolute
// floor so near-zero coordinates do not blow the ratio up.
inline double max_rel_err(const std::vector<double>& got, const std::vector<double>& want,
                          double abs_floor = 1e-8) {
    double worst = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double scale = std::max(std::abs(want[i]), abs_floor);
        worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
    }
    return worst;
}

inline std::vector<double> random_vector(pil::Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

template <typename T>
std::vector<double> widen(const std::vector<T>& v) {
    return std::vector<double>(v.begin(), v.end());
}

template <typename T>
std::vector<T> narrow(const std::vector<double>& v) {
    return std::vector<T>(v.begin(), v.end());
}

}  // namespace oracle
