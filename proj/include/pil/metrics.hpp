#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pil/dataset.hpp"
#include "pil/linear.hpp"
#include "pil/mlp.hpp"
#include "pil/pilgen.hpp"

namespace pil {

struct PsnrResult {
    std::vector<double> per_image_db;  // +inf for identical images
    double mean_db = 0;                // over finite entries only
    std::size_t n_infinite = 0;
};

// 10*log10(1/MSE) per image on the [0,1] scale (MAX = 1, which coincides
// with the 255-scale value exactly).
PsnrResult psnr(const LabeledDataset& reference, const LabeledDataset& candidate);

struct SsimParams {
    int window = 11;
    double k1 = 0.01;
    double k2 = 0.03;
    double sigma = 1.5;
    double dynamic_range = 1.0;
};

struct SsimResult {
    std::vector<double> per_image;
    double mean = 0;
};

// Single-scale SSIM with a Gaussian window over the valid region, computed
// per channel and averaged.
SsimResult ssim(const LabeledDataset& reference, const LabeledDataset& candidate,
                const SsimParams& params = {});

enum class ProbeKind { Linear, Mlp };

struct ProbeSeeds {
    std::uint64_t train_seed = 0;
    std::uint64_t shuffle_seed = 1;
};

struct ProbeReport {
    double clean_train_acc = 0;
    double shuffled_train_acc = 0;
    double shuffled_test_acc = 0;
    ProbeKind probe_kind = ProbeKind::Linear;
    ProbeSeeds seeds;

    std::string to_json() const;
};

struct ProbeHyper {
    SgdHyper linear;     // used when probe_kind == Linear
    TrainHyper mlp;      // used when probe_kind == Mlp
};

ProbeHyper default_probe_hyper(std::uint64_t seed);

// Trains the probe on `unlearnable`, then evaluates on (a) clean train
// images, (b) the shuffled unlearnable train set, and (c) a shuffled test
// set built from held-out clean images plus training perturbations.
ProbeReport shortcut_probe(const LabeledDataset& unlearnable, const LabeledDataset& clean_train,
                           const LabeledDataset& clean_heldout, const PerturbationSet& perts,
                           ProbeKind kind, const ProbeSeeds& seeds, const ProbeHyper& hyper,
                           Sign sign = Sign::Subtract);

// Simplified synthetic-perturbation baseline: one Gaussian direction per
// class; a sample's perturbation is its class vector plus small noise,
// scaled and clipped to the budget.
class SpBaseline {
  public:
    SpBaseline(int k, std::size_t d, double noise_scale, std::uint64_t seed);

    PerturbationSet make(const std::vector<std::uint8_t>& labels, float epsilon,
                         std::uint64_t sample_seed) const;

    int k() const { return k_; }
    std::size_t d() const { return d_; }

  private:
    int k_;
    std::size_t d_;
    double noise_scale_;
    MatF class_directions_;  // k x d
};

struct LambdaRow {
    double lambda;
    double victim_clean_test_acc;
};

// For each lambda: regenerate perturbations against a shared pretrained
// surrogate and retrain the desk victim; one row per lambda.
std::vector<LambdaRow> lambda_sweep(const LabeledDataset& train, const LabeledDataset& test,
                                    const SgdHyper& surrogate_hyper, const PilConfig& cfg_template,
                                    const std::vector<double>& lambdas,
                                    const TrainHyper& victim_hyper);

}  // namespace pil
