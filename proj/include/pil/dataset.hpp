#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pil/common.hpp"

namespace pil {

struct ImageShape {
    std::uint16_t channels = 0;
    std::uint16_t height = 0;
    std::uint16_t width = 0;

    std::size_t dim() const {
        return static_cast<std::size_t>(channels) * height * width;
    }
    bool operator==(const ImageShape&) const = default;
};

// Flattened image batch in [0,1] with integer class labels.
struct LabeledDataset {
    MatF pixels;                       // n x d, entries in [0,1]
    std::vector<std::uint8_t> labels;  // length n, each < k
    ImageShape shape;
    std::uint16_t k = 0;

    std::size_t n() const { return pixels.rows; }
    std::size_t d() const { return pixels.cols; }

    // Throws if any invariant is broken.
    void validate() const;
};

// Per-sample perturbations under an L-inf budget. max|delta| <= epsilon
// holds exactly for every set produced or accepted by this project.
struct PerturbationSet {
    MatF deltas;  // n x d
    float epsilon = 0.0f;
    std::uint64_t seed = 0;

    std::size_t n() const { return deltas.rows; }
    std::size_t d() const { return deltas.cols; }

    float max_abs() const;
    void validate() const;
};

enum class Sign { Subtract, Add };
enum class SelectionMode { Prefix, Random, PerClass };

struct MixSpec {
    double perturb_fraction = 0.0;  // fraction of rows replaced by the perturbed set
    std::uint64_t selection_seed = 0;
    SelectionMode selection_mode = SelectionMode::Random;
};

// Gaussian blobs around axis-aligned class means, clamped to [0,1].
// Deterministic per seed; samples appear in class-block order.
LabeledDataset generate_synthetic(int k, std::size_t n_per_class, std::size_t d,
                                  double class_separation, double noise_scale,
                                  std::uint64_t seed);

// Structured synthetic benchmark: sparse per-class sign patterns plus
// cross-class pattern noise plus isotropic noise. The cross-class term puts
// within-class variation in the discriminative subspace, so a linear model
// is genuinely uncertain sample-to-sample (the regime the diagnostics need).
struct PatternBlobSpec {
    int k = 10;
    std::size_t d = 256;
    int support = 8;             // nonzero coordinates per class pattern
    double amplitude = 0.24;     // L2 length of the class pattern
    double cross_noise = 0.055;  // per-class gain of the shared pattern noise
    double iso_noise = 0.045;    // per-coordinate Gaussian noise
    std::uint64_t pattern_seed = 0;
};

LabeledDataset generate_pattern_blobs(const PatternBlobSpec& spec, std::size_t n_per_class,
                                      std::uint64_t sample_seed, ImageShape shape = {});

// unlearnable row = x - delta (Subtract) or x + delta (Add); labels unchanged.
LabeledDataset apply_perturbations(const LabeledDataset& clean, const PerturbationSet& perts,
                                   Sign sign, bool clamp);

// Pairs image i with perturbation j under a seeded permutation; the output
// label is the perturbation's source label. The convenience overload reads
// source labels from `images` itself (the shuffled-train case).
LabeledDataset shuffle_pairings(const LabeledDataset& images, const PerturbationSet& perts,
                                const std::vector<std::uint8_t>& pert_labels, Sign sign,
                                std::uint64_t seed, bool clamp = true);
LabeledDataset shuffle_pairings(const LabeledDataset& images, const PerturbationSet& perts,
                                Sign sign, std::uint64_t seed, bool clamp = true);

struct MixResult {
    LabeledDataset dataset;
    std::vector<std::uint8_t> mask;  // 1 where the row came from `unlearnable`
};

// Exactly round(fraction*n) rows taken from `unlearnable`, rest from `clean`.
MixResult mix(const LabeledDataset& clean, const LabeledDataset& unlearnable, const MixSpec& spec);

// Resamples `ds` rows with replacement to `n_out` rows (seeded); used by the
// clean-only control arm of partial-perturbation evaluation.
LabeledDataset resample_with_replacement(const LabeledDataset& ds, std::size_t n_out,
                                         std::uint64_t seed);

// Row subset in the given index order.
LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<std::size_t>& idx);

}  // namespace pil
