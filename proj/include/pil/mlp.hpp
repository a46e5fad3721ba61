#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pil/common.hpp"
#include "pil/dataset.hpp"
#include "pil/linear.hpp"
#include "pil/rng.hpp"

namespace pil {

// One-hidden-layer ReLU network, the desk-scale victim. Templated on the
// scalar so the finite-difference oracle and the first-order harness can
// run the same code in double.
template <typename T>
struct MlpNet {
    std::size_t d = 0, h = 0, k = 0;
    std::vector<T> w1;  // d x h
    std::vector<T> b1;  // h
    std::vector<T> w2;  // h x k
    std::vector<T> b2;  // k

    std::size_t param_count() const { return d * h + h + h * k + k; }

    static MlpNet init(std::size_t d, std::size_t h, std::size_t k, std::uint64_t seed) {
        MlpNet m;
        m.d = d;
        m.h = h;
        m.k = k;
        m.w1.resize(d * h);
        m.b1.assign(h, T(0));
        m.w2.resize(h * k);
        m.b2.assign(k, T(0));
        Rng rng(seed);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& v : m.w1) v = static_cast<T>(rng.uniform(-s1, s1));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
        for (auto& v : m.w2) v = static_cast<T>(rng.uniform(-s2, s2));
        return m;
    }

    // Flattened parameter order: w1, b1, w2, b2. Gradient probes and the
    // container format rely on this order.
    std::vector<T> flatten() const {
        std::vector<T> out;
        out.reserve(param_count());
        out.insert(out.end(), w1.begin(), w1.end());
        out.insert(out.end(), b1.begin(), b1.end());
        out.insert(out.end(), w2.begin(), w2.end());
        out.insert(out.end(), b2.begin(), b2.end());
        return out;
    }
};

using MlpModel = MlpNet<float>;

MlpNet<double> to_double(const MlpModel& m);

struct TrainHyper {
    std::size_t epochs = 70;
    double learning_rate = 0.02;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t batch_size = 64;
    LrSchedule schedule = LrSchedule::Cosine;
    std::uint64_t seed = 0;
    std::size_t hidden = 384;
};

struct MlpTrainResult {
    MlpModel model;
    std::vector<double> epoch_loss;
    std::vector<double> epoch_train_acc;
};

MlpTrainResult train_mlp(const LabeledDataset& ds, const TrainHyper& hyper);

// Batch logits.
MatF mlp_forward(const MlpModel& m, const MatF& x);

double mlp_accuracy(const MlpModel& m, const LabeledDataset& ds);

// Mean CE over the rows plus the full parameter gradient (flattened order),
// computed with fixed reduction orders. Double version used by theorem1.
template <typename T>
struct LossGrad {
    T loss;
    std::vector<T> grad;
};
LossGrad<float> mlp_loss_grad(const MlpModel& m, const MatF& x,
                              const std::vector<std::uint8_t>& labels);
LossGrad<double> mlp_loss_grad(const MlpNet<double>& m, const MatD& x,
                               const std::vector<std::uint8_t>& labels);

// x_adv = clamp01(x + step * sign(grad_x CE)); sign(0) = 0.
MatF fgsm_attack(const MlpModel& m, const MatF& x, const std::vector<std::uint8_t>& labels,
                 float step);

struct FgsmRow {
    double step;
    double accuracy;
    double drop;  // accuracy(0) - accuracy(step)
};

// Steps must be sorted ascending and start at 0.
std::vector<FgsmRow> fgsm_accuracy_curve(const MlpModel& m, const LabeledDataset& test,
                                         const std::vector<double>& steps);

// Cosine of the batch-averaged parameter gradients of two batches.
// Throws numeric_error when either gradient has zero norm.
double grad_cosine_clean_vs_perturbed(const MlpModel& m, const LabeledDataset& clean_batch,
                                      const LabeledDataset& pert_batch);

struct IntraClassRow {
    int class_index;
    double mean_cosine;  // NaN when skipped
    std::size_t samples_used;
    bool skipped;  // class had < 2 samples
};

// Average pairwise cosine of per-sample parameter gradients within each
// class, over up to `per_class_sample_cap` seeded samples.
std::vector<IntraClassRow> intra_class_grad_similarity(const MlpModel& m, const LabeledDataset& ds,
                                                       std::size_t per_class_sample_cap,
                                                       std::uint64_t seed);

struct Theorem1Record {
    std::size_t step;
    double measured_delta_lc;
    double predicted_delta_lc;  // -eta * (alpha*dot + (1-alpha)*norm_sq)
    double dot_gc_gu;
    double norm_gc_sq;
    double alpha;
    double eta;
};

// Full-batch first-order check of the partial-perturbation loss identity.
// Runs in double internally so the second-order remainder is measurable.
std::vector<Theorem1Record> theorem1_check(const MlpModel& model, const LabeledDataset& clean,
                                           const LabeledDataset& pert, double alpha, double eta,
                                           std::size_t steps);

}  // namespace pil
