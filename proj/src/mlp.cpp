#include "pil/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pil/linear_math.hpp"

namespace pil {

namespace {

template <typename T>
struct BatchWork {
    Matrix<T> z1;   // n x h, pre-activation
    Matrix<T> hid;  // n x h, relu(z1)
    Matrix<T> err;  // n x k, softmax - onehot
};

// Forward pass; returns per-row CE sum and fills the work buffers.
// All loops are parallel over rows or output entries with fixed inner
// order, so results do not depend on the worker count.
template <typename T>
double forward_batch(const MlpNet<T>& m, const Matrix<T>& x,
                     const std::vector<std::uint8_t>* labels, BatchWork<T>& wk) {
    const std::size_t n = x.rows, d = m.d, h = m.h, k = m.k;
    wk.z1 = Matrix<T>(n, h);
    wk.hid = Matrix<T>(n, h);
    wk.err = Matrix<T>(n, k);
    std::vector<double> ce(n, 0.0);

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const T* xi = x.row(i);
        T* z1 = wk.z1.row(i);
        T* hid = wk.hid.row(i);
        for (std::size_t j = 0; j < h; ++j) z1[j] = m.b1[j];
        for (std::size_t a = 0; a < d; ++a) {
            const T xa = xi[a];
            const T* wrow = m.w1.data() + a * h;
            for (std::size_t j = 0; j < h; ++j) z1[j] += xa * wrow[j];
        }
        for (std::size_t j = 0; j < h; ++j) hid[j] = z1[j] > T(0) ? z1[j] : T(0);

        T* e = wk.err.row(i);
        for (std::size_t c = 0; c < k; ++c) e[c] = m.b2[c];
        for (std::size_t j = 0; j < h; ++j) {
            const T hj = hid[j];
            const T* wrow = m.w2.data() + j * k;
            for (std::size_t c = 0; c < k; ++c) e[c] += hj * wrow[c];
        }
        softmax_inplace(e, k);
        if (labels) {
            ce[i] = -std::log(static_cast<double>(e[(*labels)[i]]) + kLogFloor);
            e[(*labels)[i]] -= T(1);
        }
    }
    double sum = 0.0;
    for (double v : ce) sum += v;
    return sum;
}

// Parameter gradients of the mean CE over the batch, written into flat
// buffers laid out as [w1, b1, w2, b2].
template <typename T>
void backward_batch(const MlpNet<T>& m, const Matrix<T>& x, BatchWork<T>& wk, T* gw1, T* gb1,
                    T* gw2, T* gb2) {
    const std::size_t n = x.rows, d = m.d, h = m.h, k = m.k;
    const T inv = T(1) / static_cast<T>(n);

    // gw2 = hid^T err / n
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < h; ++j) {
        T* grow = gw2 + j * k;
        for (std::size_t c = 0; c < k; ++c) grow[c] = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T hj = wk.hid.at(i, j);
            if (hj == T(0)) continue;
            const T* erow = wk.err.row(i);
            for (std::size_t c = 0; c < k; ++c) grow[c] += hj * erow[c];
        }
        for (std::size_t c = 0; c < k; ++c) grow[c] *= inv;
    }
    for (std::size_t c = 0; c < k; ++c) {
        T acc = T(0);
        for (std::size_t i = 0; i < n; ++i) acc += wk.err.at(i, c);
        gb2[c] = acc * inv;
    }

    // Hidden error D = (err w2^T) .* relu'(z1), stored over wk.hid.
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const T* erow = wk.err.row(i);
        T* drow = wk.hid.row(i);
        const T* z1 = wk.z1.row(i);
        for (std::size_t j = 0; j < h; ++j) {
            if (z1[j] > T(0)) {
                const T* wrow = m.w2.data() + j * k;
                T acc = T(0);
                for (std::size_t c = 0; c < k; ++c) acc += erow[c] * wrow[c];
                drow[j] = acc;
            } else {
                drow[j] = T(0);
            }
        }
    }

    // gw1 = x^T D / n
#pragma omp parallel for schedule(static)
    for (std::size_t a = 0; a < d; ++a) {
        T* grow = gw1 + a * h;
        for (std::size_t j = 0; j < h; ++j) grow[j] = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T xa = x.at(i, a);
            if (xa == T(0)) continue;
            const T* drow = wk.hid.row(i);
            for (std::size_t j = 0; j < h; ++j) grow[j] += xa * drow[j];
        }
        for (std::size_t j = 0; j < h; ++j) grow[j] *= inv;
    }
    for (std::size_t j = 0; j < h; ++j) {
        T acc = T(0);
        for (std::size_t i = 0; i < n; ++i) acc += wk.hid.at(i, j);
        gb1[j] = acc * inv;
    }
}

template <typename T>
LossGrad<T> loss_grad_impl(const MlpNet<T>& m, const Matrix<T>& x,
                           const std::vector<std::uint8_t>& labels) {
    if (x.cols != m.d) throw shape_error("mlp_loss_grad: input dim != d");
    if (x.rows != labels.size()) throw shape_error("mlp_loss_grad: labels size != rows");
    if (x.rows == 0) throw argument_error("mlp_loss_grad: empty batch");
    BatchWork<T> wk;
    const double ce_sum = forward_batch(m, x, &labels, wk);
    LossGrad<T> out;
    out.loss = static_cast<T>(ce_sum / static_cast<double>(x.rows));
    out.grad.resize(m.param_count());
    T* gw1 = out.grad.data();
    T* gb1 = gw1 + m.d * m.h;
    T* gw2 = gb1 + m.h;
    T* gb2 = gw2 + m.h * m.k;
    backward_batch(m, x, wk, gw1, gb1, gw2, gb2);
    return out;
}

template <typename T>
MatD to_double_matrix(const Matrix<T>& x) {
    MatD out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = static_cast<double>(x.data[i]);
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

MlpNet<double> to_double(const MlpModel& m) {
    MlpNet<double> out;
    out.d = m.d;
    out.h = m.h;
    out.k = m.k;
    out.w1.assign(m.w1.begin(), m.w1.end());
    out.b1.assign(m.b1.begin(), m.b1.end());
    out.w2.assign(m.w2.begin(), m.w2.end());
    out.b2.assign(m.b2.begin(), m.b2.end());
    return out;
}

LossGrad<float> mlp_loss_grad(const MlpModel& m, const MatF& x,
                              const std::vector<std::uint8_t>& labels) {
    return loss_grad_impl(m, x, labels);
}

LossGrad<double> mlp_loss_grad(const MlpNet<double>& m, const MatD& x,
                               const std::vector<std::uint8_t>& labels) {
    return loss_grad_impl(m, x, labels);
}

MlpTrainResult train_mlp(const LabeledDataset& ds, const TrainHyper& hyper) {
    if (ds.n() == 0) throw argument_error("train_mlp: empty dataset");
    if (hyper.learning_rate <= 0) throw argument_error("train_mlp: learning_rate must be > 0");

    const std::size_t n = ds.n(), d = ds.d(), k = ds.k, h = hyper.hidden;
    MlpModel model = MlpModel::init(d, h, k, hyper.seed);

    std::vector<float> velocity(model.param_count(), 0.0f);
    std::vector<float> grad(model.param_count());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(hyper.seed, "epoch-shuffle"));

    SgdHyper sched;
    sched.epochs = hyper.epochs;
    sched.learning_rate = hyper.learning_rate;
    sched.schedule = hyper.schedule;

    MlpTrainResult res;
    MatF xb(std::min(hyper.batch_size, n), d);
    std::vector<std::uint8_t> yb;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        const float lr = static_cast<float>(scheduled_lr(sched, epoch));
        const float mom = static_cast<float>(hyper.momentum);
        const float wd = static_cast<float>(hyper.weight_decay);
        double loss_sum = 0.0;
        std::size_t hits = 0;

        for (std::size_t start = 0; start < n; start += hyper.batch_size) {
            const std::size_t m = std::min(hyper.batch_size, n - start);
            xb.rows = m;
            yb.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t src = order[start + i];
                std::copy(ds.pixels.row(src), ds.pixels.row(src) + d, xb.row(i));
                yb[i] = ds.labels[src];
            }

            BatchWork<float> wk;
            loss_sum += forward_batch(model, xb, &yb, wk);
            // err rows hold softmax - onehot; argmax of softmax survives the
            // subtraction except at the label entry, so count hits from the
            // stored rows before backprop.
            for (std::size_t i = 0; i < m; ++i) {
                const float* e = wk.err.row(i);
                std::size_t best = 0;
                float bestv = e[0] + (yb[i] == 0 ? 1.0f : 0.0f);
                for (std::size_t c = 1; c < k; ++c) {
                    const float v = e[c] + (yb[i] == c ? 1.0f : 0.0f);
                    if (v > bestv) {
                        bestv = v;
                        best = c;
                    }
                }
                if (best == yb[i]) ++hits;
            }

            float* gw1 = grad.data();
            float* gb1 = gw1 + d * h;
            float* gw2 = gb1 + h;
            float* gb2 = gw2 + h * k;
            backward_batch(model, xb, wk, gw1, gb1, gw2, gb2);

            float* params[4] = {model.w1.data(), model.b1.data(), model.w2.data(),
                                model.b2.data()};
            const std::size_t sizes[4] = {d * h, h, h * k, k};
            std::size_t off = 0;
            for (int part = 0; part < 4; ++part) {
                float* p = params[part];
                float* g = grad.data() + off;
                float* v = velocity.data() + off;
                const std::size_t len = sizes[part];
                const bool decay = (part == 0 || part == 2);  // no decay on biases
#pragma omp parallel for schedule(static)
                for (std::size_t i = 0; i < len; ++i) {
                    float gi = g[i] + (decay ? wd * p[i] : 0.0f);
                    v[i] = mom * v[i] + gi;
                    p[i] -= lr * v[i];
                }
                off += len;
            }
        }

        const double epoch_loss = loss_sum / static_cast<double>(n);
        if (!std::isfinite(epoch_loss))
            throw numeric_error("train_mlp: non-finite loss at epoch " + std::to_string(epoch));
        res.epoch_loss.push_back(epoch_loss);
        res.epoch_train_acc.push_back(static_cast<double>(hits) / static_cast<double>(n));
    }

    res.model = std::move(model);
    return res;
}

MatF mlp_forward(const MlpModel& m, const MatF& x) {
    if (x.cols != m.d) throw shape_error("mlp_forward: input dim != d");
    BatchWork<float> wk;
    forward_batch(m, x, nullptr, wk);
    return std::move(wk.err);  // softmax outputs; monotone in the logits
}

double mlp_accuracy(const MlpModel& m, const LabeledDataset& ds) {
    const MatF probs = mlp_forward(m, ds.pixels);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const float* p = probs.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < ds.k; ++c)
            if (p[c] > p[best]) best = c;
        if (best == ds.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.n());
}

MatF fgsm_attack(const MlpModel& m, const MatF& x, const std::vector<std::uint8_t>& labels,
                 float step) {
    if (x.cols != m.d) throw shape_error("fgsm_attack: input dim != d");
    if (x.rows != labels.size()) throw shape_error("fgsm_attack: labels size != rows");
    if (step < 0) throw argument_error("fgsm_attack: step must be >= 0");

    BatchWork<float> wk;
    forward_batch(m, x, &labels, wk);

    MatF adv(x.rows, x.cols);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < x.rows; ++i) {
        const std::size_t h = m.h, k = m.k, d = m.d;
        const float* erow = wk.err.row(i);
        const float* z1 = wk.z1.row(i);
        // Hidden error for this row, then input gradient through w1.
        std::vector<float> drow(h);
        for (std::size_t j = 0; j < h; ++j) {
            if (z1[j] > 0.0f) {
                const float* wrow = m.w2.data() + j * k;
                float acc = 0.0f;
                for (std::size_t c = 0; c < k; ++c) acc += erow[c] * wrow[c];
                drow[j] = acc;
            } else {
                drow[j] = 0.0f;
            }
        }
        const float* xi = x.row(i);
        float* out = adv.row(i);
        for (std::size_t a = 0; a < d; ++a) {
            const float* wrow = m.w1.data() + a * h;
            float g = 0.0f;
            for (std::size_t j = 0; j < h; ++j) g += wrow[j] * drow[j];
            const float sgn = (g > 0.0f) ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
            float v = xi[a] + step * sgn;
            if (v < 0.0f) v = 0.0f;
            if (v > 1.0f) v = 1.0f;
            out[a] = v;
        }
    }
    return adv;
}

std::vector<FgsmRow> fgsm_accuracy_curve(const MlpModel& m, const LabeledDataset& test,
                                         const std::vector<double>& steps) {
    if (steps.empty()) throw argument_error("fgsm_accuracy_curve: empty step list");
    if (steps.front() != 0.0)
        throw argument_error("fgsm_accuracy_curve: steps must start at 0");
    for (std::size_t i = 1; i < steps.size(); ++i)
        if (steps[i] <= steps[i - 1])
            throw argument_error("fgsm_accuracy_curve: steps must be sorted ascending");

    std::vector<FgsmRow> rows;
    const double base = mlp_accuracy(m, test);
    for (double s : steps) {
        double acc = base;
        if (s > 0.0) {
            LabeledDataset attacked = test;
            attacked.pixels = fgsm_attack(m, test.pixels, test.labels, static_cast<float>(s));
            acc = mlp_accuracy(m, attacked);
        }
        rows.push_back({s, acc, base - acc});
    }
    return rows;
}

double grad_cosine_clean_vs_perturbed(const MlpModel& m, const LabeledDataset& clean_batch,
                                      const LabeledDataset& pert_batch) {
    if (clean_batch.n() == 0 || pert_batch.n() == 0)
        throw argument_error("grad_cosine: empty batch");
    const auto gc = mlp_loss_grad(m, clean_batch.pixels, clean_batch.labels);
    const auto gu = mlp_loss_grad(m, pert_batch.pixels, pert_batch.labels);
    double nc = 0, nu = 0, dp = 0;
    for (std::size_t i = 0; i < gc.grad.size(); ++i) {
        nc += double(gc.grad[i]) * gc.grad[i];
        nu += double(gu.grad[i]) * gu.grad[i];
        dp += double(gc.grad[i]) * gu.grad[i];
    }
    if (nc == 0.0 || nu == 0.0)
        throw numeric_error("grad_cosine: zero-norm gradient, cosine undefined");
    return dp / (std::sqrt(nc) * std::sqrt(nu));
}

std::vector<IntraClassRow> intra_class_grad_similarity(const MlpModel& m, const LabeledDataset& ds,
                                                       std::size_t per_class_sample_cap,
                                                       std::uint64_t seed) {
    if (per_class_sample_cap < 2)
        throw argument_error("intra_class_grad_similarity: cap must be >= 2");

    std::vector<IntraClassRow> rows;
    Rng rng(seed);
    for (int c = 0; c < ds.k; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.n(); ++i)
            if (ds.labels[i] == c) idx.push_back(i);
        if (idx.size() < 2) {
            rows.push_back({c, std::numeric_limits<double>::quiet_NaN(), idx.size(), true});
            continue;
        }
        rng.shuffle(idx);
        if (idx.size() > per_class_sample_cap) idx.resize(per_class_sample_cap);

        // Normalized per-sample gradients, then mean pairwise dot.
        const std::size_t s = idx.size();
        std::vector<std::vector<float>> grads(s);
#pragma omp parallel for schedule(dynamic)
        for (std::size_t i = 0; i < s; ++i) {
            MatF x(1, ds.d());
            std::copy(ds.pixels.row(idx[i]), ds.pixels.row(idx[i]) + ds.d(), x.row(0));
            std::vector<std::uint8_t> y{ds.labels[idx[i]]};
            auto lg = mlp_loss_grad(m, x, y);
            double norm = 0;
            for (float v : lg.grad) norm += double(v) * v;
            norm = std::sqrt(norm);
            if (norm > 0)
                for (auto& v : lg.grad) v = static_cast<float>(v / norm);
            grads[i] = std::move(lg.grad);
        }

        double sum = 0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = i + 1; j < s; ++j) {
                double dp = 0;
                const auto& a = grads[i];
                const auto& b = grads[j];
                for (std::size_t t = 0; t < a.size(); ++t) dp += double(a[t]) * b[t];
                sum += dp;
                ++pairs;
            }
        rows.push_back({c, sum / static_cast<double>(pairs), s, false});
    }
    return rows;
}

std::vector<Theorem1Record> theorem1_check(const MlpModel& model, const LabeledDataset& clean,
                                           const LabeledDataset& pert, double alpha, double eta,
                                           std::size_t steps) {
    if (alpha < 0.0 || alpha > 1.0) throw argument_error("theorem1_check: alpha outside [0,1]");
    if (eta <= 0.0) throw argument_error("theorem1_check: eta must be > 0");

    // Runs in double: the second-order remainder this harness measures sits
    // far below float32 resolution at small eta.
    MlpNet<double> m = to_double(model);
    const MatD xc = to_double_matrix(clean.pixels);
    const MatD xu = to_double_matrix(pert.pixels);

    std::vector<Theorem1Record> records;
    for (std::size_t t = 0; t < steps; ++t) {
        const auto lc = mlp_loss_grad(m, xc, clean.labels);
        const auto lu = mlp_loss_grad(m, xu, pert.labels);
        const double dot_cu = dot(lc.grad, lu.grad);
        const double norm_c = dot(lc.grad, lc.grad);

        std::vector<double> params = m.flatten();
        for (std::size_t i = 0; i < params.size(); ++i)
            params[i] -= eta * (alpha * lu.grad[i] + (1.0 - alpha) * lc.grad[i]);
        std::size_t off = 0;
        auto unpack = [&](std::vector<double>& dst) {
            std::copy(params.begin() + off, params.begin() + off + dst.size(), dst.begin());
            off += dst.size();
        };
        unpack(m.w1);
        unpack(m.b1);
        unpack(m.w2);
        unpack(m.b2);

        const auto lc_after = mlp_loss_grad(m, xc, clean.labels);
        Theorem1Record rec;
        rec.step = t;
        rec.measured_delta_lc = lc_after.loss - lc.loss;
        rec.dot_gc_gu = dot_cu;
        rec.norm_gc_sq = norm_c;
        rec.alpha = alpha;
        rec.eta = eta;
        rec.predicted_delta_lc = -eta * (alpha * dot_cu + (1.0 - alpha) * norm_c);
        records.push_back(rec);
    }
    return records;
}

}  // namespace pil
