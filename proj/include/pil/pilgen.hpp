#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pil/dataset.hpp"
#include "pil/linear.hpp"
#include "pil/linear_math.hpp"

namespace pil {

struct PilConfig {
    float epsilon = 8.0f / 255.0f;   // L-inf budget
    float step = 8.0f / 2550.0f;     // signed-update magnitude
    float lambda = 0.9f;             // CE weight; KL weight is 1 - lambda
    std::size_t steps = 30;          // N
    std::uint64_t init_seed = 0;
    bool pretrain_surrogate = true;  // off: caller supplies a random-init w

    void validate() const;
};

// Entries i.i.d. uniform in [-epsilon, epsilon]; one seeded stream fills
// rows in order, so results do not depend on the consumer's parallelism.
PerturbationSet init_perturbations(std::size_t n, std::size_t d, float epsilon,
                                   std::uint64_t seed);

// L_total = lambda * CE(f(delta), y) + (1-lambda) * KL(f(x-delta) || uniform).
// Templated: float in production, double in the finite-difference oracle.
template <typename T>
T total_loss(const T* delta, const T* x, std::size_t label, const T* w, std::size_t d,
             std::size_t k, T lambda, T* scratch_d, T* scratch_k) {
    T ce = T(0);
    if (lambda > T(0)) {
        linear_forward(delta, w, d, k, scratch_k);
        softmax_inplace(scratch_k, k);
        ce = cross_entropy(scratch_k, k, label);
    }
    T kl = T(0);
    if (lambda < T(1)) {
        for (std::size_t a = 0; a < d; ++a) scratch_d[a] = x[a] - delta[a];
        linear_forward(scratch_d, w, d, k, scratch_k);
        softmax_inplace(scratch_k, k);
        kl = kl_to_uniform(scratch_k, k);
    }
    return lambda * ce + (T(1) - lambda) * kl;
}

// Analytic gradient of total_loss w.r.t. delta. The KL branch carries the
// negated inner derivative of (x - delta).
template <typename T>
void total_loss_grad(const T* delta, const T* x, std::size_t label, const T* w, std::size_t d,
                     std::size_t k, T lambda, T* grad, T* scratch_d, T* scratch_k) {
    for (std::size_t a = 0; a < d; ++a) grad[a] = T(0);
    if (lambda > T(0)) {
        grad_x_ce(delta, label, w, d, k, grad, scratch_k);
        for (std::size_t a = 0; a < d; ++a) grad[a] *= lambda;
    }
    if (lambda < T(1)) {
        T* u = scratch_d;
        for (std::size_t a = 0; a < d; ++a) u[a] = x[a] - delta[a];
        std::vector<T> gkl(d);
        grad_x_kl(u, w, d, k, gkl.data(), scratch_k);
        const T wkl = T(1) - lambda;
        for (std::size_t a = 0; a < d; ++a) grad[a] -= wkl * gkl[a];
    }
}

// Float wrappers over single rows (the oracle-facing surface).
float total_loss(const std::vector<float>& delta, const std::vector<float>& x, std::size_t label,
                 const LinearWeights& w, float lambda);
std::vector<float> total_loss_grad(const std::vector<float>& delta, const std::vector<float>& x,
                                   std::size_t label, const LinearWeights& w, float lambda);

struct OptimizeResult {
    std::vector<float> delta;
    std::vector<float> loss_trace;  // loss before each step, then the final loss
};

// Exactly cfg.steps signed-gradient steps, each followed by an entrywise
// clip to [-epsilon, epsilon]; sign(0) is 0.
OptimizeResult optimize_perturbation(const std::vector<float>& x, std::size_t label,
                                     const LinearWeights& w, const PilConfig& cfg,
                                     const std::vector<float>& delta0);

struct GenerationReport {
    std::size_t n = 0, d = 0, k = 0;
    float epsilon = 0, lambda = 0;
    std::size_t steps = 0;
    double wall_seconds = 0;
    double mean_final_loss = 0;
    double shortcut_probe_acc = 0;  // fresh linear fit on (-delta, y)

    std::string to_json() const;
};

struct GenerationResult {
    PerturbationSet perts;
    LabeledDataset unlearnable;  // apply_perturbations(ds, delta, Subtract, clamp on)
    GenerationReport report;
};

// Per-sample optimization, parallel across samples; output is independent
// of the worker count. The serial variant is the reference the tests and
// the benchmark compare against.
GenerationResult generate_unlearnable(const LabeledDataset& ds, const LinearWeights& w,
                                      const PilConfig& cfg);
GenerationResult generate_unlearnable_serial(const LabeledDataset& ds, const LinearWeights& w,
                                             const PilConfig& cfg);

// Hyperparameters of the report's shortcut probe (a fresh linear model fit
// on (-delta, y)).
SgdHyper shortcut_probe_hyper(std::uint64_t seed);

}  // namespace pil
