#pragma once

#include <cmath>
#include <cstddef>

namespace pil {

// Single-sample kernels for the bias-free linear classifier, templated on
// the scalar type: the training path instantiates float, gradient tests and
// oracles instantiate double. All buffers are caller-owned; w is d x k
// row-major.

inline constexpr double kLogFloor = 1e-12;

template <typename T>
void linear_forward(const T* x, const T* w, std::size_t d, std::size_t k, T* logits) {
    for (std::size_t c = 0; c < k; ++c) logits[c] = T(0);
    for (std::size_t a = 0; a < d; ++a) {
        const T xa = x[a];
        const T* wrow = w + a * k;
        for (std::size_t c = 0; c < k; ++c) logits[c] += xa * wrow[c];
    }
}

// In-place stable softmax (max subtraction).
template <typename T>
void softmax_inplace(T* z, std::size_t k) {
    T m = z[0];
    for (std::size_t c = 1; c < k; ++c) m = z[c] > m ? z[c] : m;
    T sum = T(0);
    for (std::size_t c = 0; c < k; ++c) {
        z[c] = std::exp(z[c] - m);
        sum += z[c];
    }
    for (std::size_t c = 0; c < k; ++c) z[c] /= sum;
}

template <typename T>
T cross_entropy(const T* probs, std::size_t k, std::size_t label) {
    (void)k;
    return -std::log(probs[label] + T(kLogFloor));
}

// KL(p || uniform) = sum p_i log(k p_i) = log k - H(p).
template <typename T>
T kl_to_uniform(const T* probs, std::size_t k) {
    T acc = T(0);
    for (std::size_t c = 0; c < k; ++c)
        acc += probs[c] * std::log((probs[c] + T(kLogFloor)) * T(k));
    return acc;
}

// d(CE o softmax)/dz = p - onehot(label); gw = x^T (p - y).
template <typename T>
void grad_w_ce(const T* x, std::size_t label, const T* w, std::size_t d, std::size_t k, T* gw,
               T* scratch_logits) {
    linear_forward(x, w, d, k, scratch_logits);
    softmax_inplace(scratch_logits, k);
    scratch_logits[label] -= T(1);
    for (std::size_t a = 0; a < d; ++a) {
        const T xa = x[a];
        T* grow = gw + a * k;
        for (std::size_t c = 0; c < k; ++c) grow[c] = xa * scratch_logits[c];
    }
}

// gx = w (p - onehot(label)).
template <typename T>
void grad_x_ce(const T* x, std::size_t label, const T* w, std::size_t d, std::size_t k, T* gx,
               T* scratch_logits) {
    linear_forward(x, w, d, k, scratch_logits);
    softmax_inplace(scratch_logits, k);
    scratch_logits[label] -= T(1);
    for (std::size_t a = 0; a < d; ++a) {
        const T* wrow = w + a * k;
        T acc = T(0);
        for (std::size_t c = 0; c < k; ++c) acc += wrow[c] * scratch_logits[c];
        gx[a] = acc;
    }
}

// KL-through-softmax input gradient: with t = log(k p) and KL = sum p t,
// dKL/dz = p .* (t - KL); gx = w (p .* (t - KL)).
template <typename T>
void grad_x_kl(const T* x, const T* w, std::size_t d, std::size_t k, T* gx, T* scratch_logits) {
    linear_forward(x, w, d, k, scratch_logits);
    softmax_inplace(scratch_logits, k);
    T kl = T(0);
    for (std::size_t c = 0; c < k; ++c) {
        const T t = std::log((scratch_logits[c] + T(kLogFloor)) * T(k));
        kl += scratch_logits[c] * t;
    }
    // Reuse the scratch buffer for gz = p .* (t - KL).
    for (std::size_t c = 0; c < k; ++c) {
        const T t = std::log((scratch_logits[c] + T(kLogFloor)) * T(k));
        scratch_logits[c] = scratch_logits[c] * (t - kl);
    }
    for (std::size_t a = 0; a < d; ++a) {
        const T* wrow = w + a * k;
        T acc = T(0);
        for (std::size_t c = 0; c < k; ++c) acc += wrow[c] * scratch_logits[c];
        gx[a] = acc;
    }
}

}  // namespace pil
