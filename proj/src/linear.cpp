#include "pil/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pil/linear_math.hpp"
#include "pil/rng.hpp"

namespace pil {

void LinearWeights::validate() const {
    for (float v : w.data)
        if (!std::isfinite(v)) throw numeric_error("weights contain a non-finite entry");
}

double scheduled_lr(const SgdHyper& h, std::size_t epoch) {
    if (h.schedule == LrSchedule::Constant) return h.learning_rate;
    const double t = static_cast<double>(epoch) / static_cast<double>(h.epochs);
    return h.learning_rate * 0.5 * (1.0 + std::cos(3.141592653589793 * t));
}

std::vector<float> forward(const std::vector<float>& x, const LinearWeights& w) {
    if (x.size() != w.d())
        throw shape_error("forward: x dim " + std::to_string(x.size()) + " != d " +
                          std::to_string(w.d()));
    std::vector<float> logits(w.k());
    linear_forward(x.data(), w.w.data.data(), w.d(), w.k(), logits.data());
    return logits;
}

MatF forward(const MatF& x, const LinearWeights& w) {
    if (x.cols != w.d()) throw shape_error("forward: column count != d");
    MatF out(x.rows, w.k());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < x.rows; ++i)
        linear_forward(x.row(i), w.w.data.data(), w.d(), w.k(), out.row(i));
    return out;
}

std::vector<float> softmax(const std::vector<float>& logits) {
    for (float v : logits)
        if (!std::isfinite(v)) throw numeric_error("softmax: non-finite logit");
    std::vector<float> p = logits;
    softmax_inplace(p.data(), p.size());
    return p;
}

float cross_entropy(const std::vector<float>& probs, std::size_t label) {
    if (label >= probs.size())
        throw argument_error("cross_entropy: label " + std::to_string(label) +
                             " out of range for k " + std::to_string(probs.size()));
    return pil::cross_entropy(probs.data(), probs.size(), label);
}

float kl_to_uniform(const std::vector<float>& probs) {
    for (float v : probs)
        if (!std::isfinite(v)) throw numeric_error("kl_to_uniform: non-finite probability");
    return pil::kl_to_uniform(probs.data(), probs.size());
}

MatF grad_w_ce(const MatF& x, const std::vector<std::uint8_t>& labels, const LinearWeights& w) {
    if (x.cols != w.d()) throw shape_error("grad_w_ce: column count != d");
    if (x.rows != labels.size()) throw shape_error("grad_w_ce: labels size != rows");
    const std::size_t d = w.d(), k = w.k(), n = x.rows;

    // Error matrix first, then G = x^T E / n with a fixed per-row reduction
    // order so the result is independent of the worker count.
    MatF err(n, k);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        linear_forward(x.row(i), w.w.data.data(), d, k, err.row(i));
        softmax_inplace(err.row(i), k);
        err.at(i, labels[i]) -= 1.0f;
    }

    MatF g(d, k, 0.0f);
    const float inv = 1.0f / static_cast<float>(n);
#pragma omp parallel for schedule(static)
    for (std::size_t a = 0; a < d; ++a) {
        float* grow = g.row(a);
        for (std::size_t i = 0; i < n; ++i) {
            const float xa = x.at(i, a);
            const float* erow = err.row(i);
            for (std::size_t c = 0; c < k; ++c) grow[c] += xa * erow[c];
        }
        for (std::size_t c = 0; c < k; ++c) grow[c] *= inv;
    }
    return g;
}

std::vector<float> grad_x_loss(const std::vector<float>& x, std::size_t label,
                               const LinearWeights& w, LossKind kind) {
    if (x.size() != w.d()) throw shape_error("grad_x_loss: x dim != d");
    std::vector<float> g(w.d());
    std::vector<float> scratch(w.k());
    if (kind == LossKind::Ce) {
        if (label >= w.k()) throw argument_error("grad_x_loss: label out of range");
        grad_x_ce(x.data(), label, w.w.data.data(), w.d(), w.k(), g.data(), scratch.data());
    } else {
        grad_x_kl(x.data(), w.w.data.data(), w.d(), w.k(), g.data(), scratch.data());
    }
    return g;
}

TrainResult train_sgd(const LabeledDataset& ds, const SgdHyper& hyper) {
    if (ds.n() == 0) throw argument_error("train_sgd: empty dataset");
    if (hyper.learning_rate <= 0) throw argument_error("train_sgd: learning_rate must be > 0");
    if (hyper.batch_size < 1) throw argument_error("train_sgd: batch_size must be >= 1");

    const std::size_t n = ds.n(), d = ds.d(), k = ds.k;
    Rng init_rng(hyper.seed);
    LinearWeights weights;
    weights.w = MatF(d, k);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& v : weights.w.data) v = static_cast<float>(init_rng.uniform(-s, s));

    MatF velocity(d, k, 0.0f);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(hyper.seed, "epoch-shuffle"));

    TrainResult res;
    res.epoch_loss.reserve(hyper.epochs);

    MatF xb(std::min(hyper.batch_size, n), d);
    std::vector<std::uint8_t> yb(xb.rows);

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        const float lr = static_cast<float>(scheduled_lr(hyper, epoch));
        double loss_sum = 0.0;

        for (std::size_t start = 0; start < n; start += hyper.batch_size) {
            const std::size_t m = std::min(hyper.batch_size, n - start);
            xb.rows = m;
            yb.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t src = order[start + i];
                std::copy(ds.pixels.row(src), ds.pixels.row(src) + d, xb.row(i));
                yb[i] = ds.labels[src];
            }

            // Batch loss rides along with the error matrix.
            MatF err(m, k);
            std::vector<float> ce(m);
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < m; ++i) {
                linear_forward(xb.row(i), weights.w.data.data(), d, k, err.row(i));
                softmax_inplace(err.row(i), k);
                ce[i] = pil::cross_entropy(err.row(i), k, yb[i]);
                err.at(i, yb[i]) -= 1.0f;
            }
            for (std::size_t i = 0; i < m; ++i) loss_sum += ce[i];

            const float inv = 1.0f / static_cast<float>(m);
            const float mom = static_cast<float>(hyper.momentum);
            const float wd = static_cast<float>(hyper.weight_decay);
#pragma omp parallel for schedule(static)
            for (std::size_t a = 0; a < d; ++a) {
                float* vrow = velocity.row(a);
                float* wrow = weights.w.row(a);
                for (std::size_t c = 0; c < k; ++c) {
                    float g = 0.0f;
                    for (std::size_t i = 0; i < m; ++i) g += xb.at(i, a) * err.at(i, c);
                    g = g * inv + wd * wrow[c];
                    vrow[c] = mom * vrow[c] + g;
                    wrow[c] -= lr * vrow[c];
                }
            }
        }

        const double epoch_loss = loss_sum / static_cast<double>(n);
        if (!std::isfinite(epoch_loss))
            throw numeric_error("train_sgd: non-finite loss at epoch " + std::to_string(epoch));
        res.epoch_loss.push_back(epoch_loss);
    }

    res.weights = std::move(weights);
    return res;
}

double accuracy(const LinearWeights& w, const LabeledDataset& ds) {
    if (ds.d() != w.d()) throw shape_error("accuracy: dataset dim != weights d");
    const std::size_t n = ds.n(), d = ds.d(), k = ds.k;
    std::size_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> logits(k);
        linear_forward(ds.pixels.row(i), w.w.data.data(), d, k, logits.data());
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (logits[c] > logits[best]) best = c;  // ties keep the lowest index
        if (best == ds.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace pil
