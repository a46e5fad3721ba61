#pragma once

#include <cstdint>
#include <vector>

#include "pil/common.hpp"
#include "pil/dataset.hpp"

namespace pil {

// Bias-free linear classifier: logits = x w, w in R^{d x k}.
struct LinearWeights {
    MatF w;  // d x k
    std::size_t d() const { return w.rows; }
    std::size_t k() const { return w.cols; }
    void validate() const;  // all entries finite
};

enum class LrSchedule { Constant, Cosine };

struct SgdHyper {
    std::size_t epochs = 30;
    double learning_rate = 0.003;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t batch_size = 128;
    LrSchedule schedule = LrSchedule::Cosine;
    std::uint64_t seed = 0;
};

// Per-epoch learning rate under the given schedule.
double scheduled_lr(const SgdHyper& h, std::size_t epoch);

// logits = x w for a single row.
std::vector<float> forward(const std::vector<float>& x, const LinearWeights& w);

// Batch forward, one output row per input row.
MatF forward(const MatF& x, const LinearWeights& w);

// Stable softmax of one logit vector. Throws numeric_error on non-finite input.
std::vector<float> softmax(const std::vector<float>& logits);

float cross_entropy(const std::vector<float>& probs, std::size_t label);
float kl_to_uniform(const std::vector<float>& probs);

// Mean cross-entropy gradient w.r.t. w over the batch (single row allowed).
MatF grad_w_ce(const MatF& x, const std::vector<std::uint8_t>& labels, const LinearWeights& w);

enum class LossKind { Ce, KlUniform };

// Input-space gradient of the chosen loss at x. `label` is ignored for
// KlUniform (the target is the uniform distribution).
std::vector<float> grad_x_loss(const std::vector<float>& x, std::size_t label,
                               const LinearWeights& w, LossKind kind);

struct TrainResult {
    LinearWeights weights;
    std::vector<double> epoch_loss;  // mean CE per epoch
};

// Minibatch SGD with momentum, weight decay and the configured schedule.
// Deterministic per seed, including under OpenMP (fixed reduction orders).
TrainResult train_sgd(const LabeledDataset& ds, const SgdHyper& hyper);

// Fraction of rows with argmax(x w) == label; ties break to the lowest index.
double accuracy(const LinearWeights& w, const LabeledDataset& ds);

}  // namespace pil
