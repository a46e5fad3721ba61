#include "pil/pilgen.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "pil/rng.hpp"

namespace pil {

void PilConfig::validate() const {
    if (epsilon <= 0) throw argument_error("pil: epsilon must be > 0");
    if (step <= 0) throw argument_error("pil: step must be > 0");
    if (lambda < 0 || lambda > 1) throw argument_error("pil: lambda outside [0,1]");
    if (steps < 1) throw argument_error("pil: steps must be >= 1");
}

PerturbationSet init_perturbations(std::size_t n, std::size_t d, float epsilon,
                                   std::uint64_t seed) {
    if (epsilon <= 0) throw argument_error("init_perturbations: epsilon must be > 0");
    if (n < 1 || d < 1) throw argument_error("init_perturbations: empty dimensions");
    PerturbationSet ps;
    ps.epsilon = epsilon;
    ps.seed = seed;
    ps.deltas = MatF(n, d);
    Rng rng(seed);
    for (auto& v : ps.deltas.data)
        v = static_cast<float>(rng.uniform(-double(epsilon), double(epsilon)));
    return ps;
}

float total_loss(const std::vector<float>& delta, const std::vector<float>& x, std::size_t label,
                 const LinearWeights& w, float lambda) {
    if (delta.size() != w.d() || x.size() != w.d())
        throw shape_error("total_loss: vector dim != d");
    if (lambda < 0.0f || lambda > 1.0f) throw argument_error("total_loss: lambda outside [0,1]");
    std::vector<float> sd(w.d()), sk(w.k());
    return total_loss(delta.data(), x.data(), label, w.w.data.data(), w.d(), w.k(), lambda,
                      sd.data(), sk.data());
}

std::vector<float> total_loss_grad(const std::vector<float>& delta, const std::vector<float>& x,
                                   std::size_t label, const LinearWeights& w, float lambda) {
    if (delta.size() != w.d() || x.size() != w.d())
        throw shape_error("total_loss_grad: vector dim != d");
    std::vector<float> g(w.d()), sd(w.d()), sk(w.k());
    total_loss_grad(delta.data(), x.data(), label, w.w.data.data(), w.d(), w.k(), lambda,
                    g.data(), sd.data(), sk.data());
    return g;
}

namespace {

// One sample's full optimization loop; shared by the serial and parallel
// drivers so both produce identical bytes.
void optimize_row(const float* x, std::size_t label, const LinearWeights& w,
                  const PilConfig& cfg, float* delta, float* loss_trace, float* sd, float* sk,
                  float* grad) {
    const std::size_t d = w.d(), k = w.k();
    const float eps = cfg.epsilon, alpha = cfg.step, lambda = cfg.lambda;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (loss_trace)
            loss_trace[step] =
                total_loss(delta, x, label, w.w.data.data(), d, k, lambda, sd, sk);
        total_loss_grad(delta, x, label, w.w.data.data(), d, k, lambda, grad, sd, sk);
        for (std::size_t a = 0; a < d; ++a) {
            const float g = grad[a];
            const float sgn = (g > 0.0f) ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
            float v = delta[a] - alpha * sgn;
            if (v > eps) v = eps;
            if (v < -eps) v = -eps;
            delta[a] = v;
        }
    }
    if (loss_trace)
        loss_trace[cfg.steps] =
            total_loss(delta, x, label, w.w.data.data(), d, k, lambda, sd, sk);
}

GenerationResult generate_impl(const LabeledDataset& ds, const LinearWeights& w,
                               const PilConfig& cfg, bool parallel) {
    cfg.validate();
    if (ds.d() != w.d()) throw shape_error("generate: dataset dim != weights d");
    if (ds.k != w.k()) throw shape_error("generate: dataset k != weights k");

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = ds.n(), d = ds.d();

    PerturbationSet ps = init_perturbations(n, d, cfg.epsilon, cfg.init_seed);
    std::vector<float> final_loss(n);

#pragma omp parallel if (parallel)
    {
        std::vector<float> sd(d), sk(w.k()), grad(d), trace(cfg.steps + 1);
#pragma omp for schedule(dynamic, 16)
        for (std::size_t i = 0; i < n; ++i) {
            optimize_row(ds.pixels.row(i), ds.labels[i], w, cfg, ps.deltas.row(i), trace.data(),
                         sd.data(), sk.data(), grad.data());
            final_loss[i] = trace[cfg.steps];
        }
    }

    GenerationResult res;
    res.unlearnable = apply_perturbations(ds, ps, Sign::Subtract, /*clamp=*/true);
    res.perts = std::move(ps);

    double mean_loss = 0;
    for (float v : final_loss) mean_loss += v;
    mean_loss /= static_cast<double>(n);
    if (!std::isfinite(mean_loss))
        throw numeric_error("generate: non-finite loss after optimization");

    // Shortcut probe: a fresh linear model fit on (-delta, y).
    LabeledDataset neg;
    neg.pixels = MatF(n, d);
    for (std::size_t i = 0; i < n * d; ++i) neg.pixels.data[i] = -res.perts.deltas.data[i];
    neg.labels = ds.labels;
    neg.k = ds.k;
    neg.shape = ds.shape;
    const SgdHyper probe_hyper = shortcut_probe_hyper(derive_seed(cfg.init_seed, "shortcut-probe"));
    // Probe inputs are perturbations, not [0,1] pixels; train_sgd does not
    // re-validate ranges, which is what this diagnostic needs.
    TrainResult probe = train_sgd(neg, probe_hyper);

    const auto t1 = std::chrono::steady_clock::now();
    res.report.n = n;
    res.report.d = d;
    res.report.k = ds.k;
    res.report.epsilon = cfg.epsilon;
    res.report.lambda = cfg.lambda;
    res.report.steps = cfg.steps;
    res.report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    res.report.mean_final_loss = mean_loss;
    res.report.shortcut_probe_acc = accuracy(probe.weights, neg);
    return res;
}

}  // namespace

OptimizeResult optimize_perturbation(const std::vector<float>& x, std::size_t label,
                                     const LinearWeights& w, const PilConfig& cfg,
                                     const std::vector<float>& delta0) {
    cfg.validate();
    if (x.size() != w.d() || delta0.size() != w.d())
        throw shape_error("optimize_perturbation: vector dim != d");
    for (float v : delta0)
        if (std::fabs(v) > cfg.epsilon)
            throw argument_error("optimize_perturbation: delta0 violates the budget");

    OptimizeResult res;
    res.delta = delta0;
    res.loss_trace.resize(cfg.steps + 1);
    std::vector<float> sd(w.d()), sk(w.k()), grad(w.d());
    optimize_row(x.data(), label, w, cfg, res.delta.data(), res.loss_trace.data(), sd.data(),
                 sk.data(), grad.data());
    for (float v : res.loss_trace)
        if (!std::isfinite(v)) throw numeric_error("optimize_perturbation: non-finite loss");
    return res;
}

GenerationResult generate_unlearnable(const LabeledDataset& ds, const LinearWeights& w,
                                      const PilConfig& cfg) {
    return generate_impl(ds, w, cfg, /*parallel=*/true);
}

GenerationResult generate_unlearnable_serial(const LabeledDataset& ds, const LinearWeights& w,
                                             const PilConfig& cfg) {
    return generate_impl(ds, w, cfg, /*parallel=*/false);
}

SgdHyper shortcut_probe_hyper(std::uint64_t seed) {
    SgdHyper h;
    h.epochs = 30;
    h.learning_rate = 0.1;
    h.momentum = 0.9;
    h.weight_decay = 0.0;
    h.batch_size = 128;
    h.schedule = LrSchedule::Cosine;
    h.seed = seed;
    return h;
}

std::string GenerationReport::to_json() const {
    std::ostringstream os;
    os.precision(10);
    os << "{\"n\":" << n << ",\"d\":" << d << ",\"k\":" << k << ",\"epsilon\":" << epsilon
       << ",\"lambda\":" << lambda << ",\"steps\":" << steps
       << ",\"wall_seconds\":" << wall_seconds << ",\"mean_final_loss\":" << mean_final_loss
       << ",\"shortcut_probe_acc\":" << shortcut_probe_acc << "}";
    return os.str();
}

}  // namespace pil
