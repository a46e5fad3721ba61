#include "pil/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pil/rng.hpp"

namespace pil {

namespace {

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

void require_same_rows(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw shape_error(std::string(what) + ": row count mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
}

}  // namespace

void LabeledDataset::validate() const {
    if (labels.size() != n())
        throw shape_error("dataset: labels.len " + std::to_string(labels.size()) +
                          " != n " + std::to_string(n()));
    if (shape.dim() != d())
        throw shape_error("dataset: shape dim " + std::to_string(shape.dim()) + " != d " +
                          std::to_string(d()));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= k)
            throw argument_error("dataset: label " + std::to_string(int(labels[i])) +
                                 " out of range at row " + std::to_string(i));
    for (float v : pixels.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw argument_error("dataset: pixel outside [0,1]");
}

float PerturbationSet::max_abs() const {
    float m = 0.0f;
    for (float v : deltas.data) {
        const float a = std::fabs(v);
        if (a > m) m = a;
    }
    return m;
}

void PerturbationSet::validate() const {
    if (max_abs() > epsilon)
        throw integrity_error("perturbations: max|delta| " + std::to_string(max_abs()) +
                              " exceeds epsilon " + std::to_string(epsilon));
}

LabeledDataset generate_synthetic(int k, std::size_t n_per_class, std::size_t d,
                                  double class_separation, double noise_scale,
                                  std::uint64_t seed) {
    if (k < 2) throw argument_error("generate_synthetic: k must be >= 2");
    if (d < 1 || n_per_class < 1) throw argument_error("generate_synthetic: empty dimensions");
    if (noise_scale < 0) throw argument_error("generate_synthetic: negative noise_scale");

    Rng rng(seed);
    const double off = std::min(class_separation / 2.0, 0.5);

    // Class means: 0.5 everywhere, one coordinate pushed by +/-off. Classes
    // beyond 2d fall back to a random unit direction.
    MatF means(static_cast<std::size_t>(k), d, 0.5f);
    for (int c = 0; c < k; ++c) {
        if (static_cast<std::size_t>(c) < 2 * d) {
            const std::size_t j = static_cast<std::size_t>(c) / 2;
            const double s = (c % 2 == 0) ? 1.0 : -1.0;
            means.at(c, j) += static_cast<float>(off * s);
        } else {
            std::vector<double> dir(d);
            double norm = 0;
            for (auto& v : dir) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (std::size_t j = 0; j < d; ++j)
                means.at(c, j) += static_cast<float>(off * dir[j] / norm);
        }
    }
    for (auto& v : means.data) v = clamp01(v);

    LabeledDataset ds;
    ds.pixels = MatF(static_cast<std::size_t>(k) * n_per_class, d);
    ds.labels.resize(ds.pixels.rows);
    ds.k = static_cast<std::uint16_t>(k);
    ds.shape = ImageShape{1, 1, static_cast<std::uint16_t>(d)};

    std::size_t row = 0;
    for (int c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            float* out = ds.pixels.row(row);
            const float* mu = means.row(c);
            for (std::size_t j = 0; j < d; ++j)
                out[j] = clamp01(mu[j] + static_cast<float>(noise_scale * rng.normal()));
            ds.labels[row] = static_cast<std::uint8_t>(c);
        }
    }
    return ds;
}

LabeledDataset generate_pattern_blobs(const PatternBlobSpec& spec, std::size_t n_per_class,
                                      std::uint64_t sample_seed, ImageShape shape) {
    if (spec.k < 2) throw argument_error("generate_pattern_blobs: k must be >= 2");
    if (static_cast<std::size_t>(spec.k) * spec.support > spec.d)
        throw argument_error("generate_pattern_blobs: k*support exceeds d");
    if (shape.dim() == 0)
        shape = ImageShape{1, 1, static_cast<std::uint16_t>(spec.d)};
    if (shape.dim() != spec.d)
        throw argument_error("generate_pattern_blobs: shape does not match d");

    const std::size_t d = spec.d;
    const int k = spec.k;

    // Sparse unit-L2 class patterns on disjoint coordinate blocks.
    Rng prng(spec.pattern_seed);
    std::vector<std::size_t> coords(d);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    prng.shuffle(coords);
    MatF patterns(static_cast<std::size_t>(k), d, 0.0f);
    const float unit = 1.0f / std::sqrt(static_cast<float>(spec.support));
    std::size_t pos = 0;
    for (int c = 0; c < k; ++c)
        for (int s = 0; s < spec.support; ++s, ++pos)
            patterns.at(c, coords[pos]) = (prng.next_u64() & 1) ? unit : -unit;

    Rng rng(sample_seed);
    const std::size_t n = static_cast<std::size_t>(k) * n_per_class;
    LabeledDataset ds;
    ds.pixels = MatF(n, d);
    ds.labels.resize(n);
    ds.k = static_cast<std::uint16_t>(k);
    ds.shape = shape;

    std::vector<double> gains(static_cast<std::size_t>(k));
    std::size_t row = 0;
    for (int c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            for (auto& g : gains) g = spec.cross_noise * rng.normal();
            float* out = ds.pixels.row(row);
            for (std::size_t j = 0; j < d; ++j)
                out[j] = 0.5f + static_cast<float>(spec.amplitude) * patterns.at(c, j);
            for (int cc = 0; cc < k; ++cc) {
                const float g = static_cast<float>(gains[cc]);
                const float* p = patterns.row(cc);
                for (std::size_t j = 0; j < d; ++j) out[j] += g * p[j];
            }
            for (std::size_t j = 0; j < d; ++j)
                out[j] = clamp01(out[j] + static_cast<float>(spec.iso_noise * rng.normal()));
            ds.labels[row] = static_cast<std::uint8_t>(c);
        }
    }
    return ds;
}

LabeledDataset apply_perturbations(const LabeledDataset& clean, const PerturbationSet& perts,
                                   Sign sign, bool clamp) {
    require_same_rows(clean.n(), perts.n(), "apply_perturbations");
    if (clean.d() != perts.d())
        throw shape_error("apply_perturbations: dimension mismatch");

    LabeledDataset out = clean;
    const float s = (sign == Sign::Subtract) ? -1.0f : 1.0f;
    const std::size_t total = clean.n() * clean.d();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < total; ++i) {
        float v = clean.pixels.data[i] + s * perts.deltas.data[i];
        out.pixels.data[i] = clamp ? clamp01(v) : v;
    }
    return out;
}

LabeledDataset shuffle_pairings(const LabeledDataset& images, const PerturbationSet& perts,
                                const std::vector<std::uint8_t>& pert_labels, Sign sign,
                                std::uint64_t seed, bool clamp) {
    require_same_rows(images.n(), perts.n(), "shuffle_pairings");
    if (images.d() != perts.d()) throw shape_error("shuffle_pairings: dimension mismatch");
    if (pert_labels.size() != perts.n())
        throw shape_error("shuffle_pairings: pert_labels size mismatch");

    std::vector<std::size_t> perm(images.n());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(perm);

    LabeledDataset out = images;
    const float s = (sign == Sign::Subtract) ? -1.0f : 1.0f;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < images.n(); ++i) {
        const std::size_t j = perm[i];
        const float* x = images.pixels.row(i);
        const float* dlt = perts.deltas.row(j);
        float* o = out.pixels.row(i);
        for (std::size_t a = 0; a < images.d(); ++a) {
            float v = x[a] + s * dlt[a];
            o[a] = clamp ? clamp01(v) : v;
        }
        out.labels[i] = pert_labels[j];
    }
    return out;
}

LabeledDataset shuffle_pairings(const LabeledDataset& images, const PerturbationSet& perts,
                                Sign sign, std::uint64_t seed, bool clamp) {
    return shuffle_pairings(images, perts, images.labels, sign, seed, clamp);
}

MixResult mix(const LabeledDataset& clean, const LabeledDataset& unlearnable,
              const MixSpec& spec) {
    if (clean.n() != unlearnable.n() || clean.d() != unlearnable.d() ||
        clean.k != unlearnable.k)
        throw shape_error("mix: datasets disagree in n/d/k");
    if (clean.labels != unlearnable.labels)
        throw consistency_error("mix: label mismatch between clean and unlearnable");
    if (spec.perturb_fraction < 0.0 || spec.perturb_fraction > 1.0)
        throw argument_error("mix: perturb_fraction outside [0,1]");

    const std::size_t n = clean.n();
    const auto m = static_cast<std::size_t>(
        std::llround(spec.perturb_fraction * static_cast<double>(n)));

    std::vector<std::size_t> chosen;
    chosen.reserve(m);
    switch (spec.selection_mode) {
        case SelectionMode::Prefix:
            for (std::size_t i = 0; i < m; ++i) chosen.push_back(i);
            break;
        case SelectionMode::Random: {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            Rng rng(spec.selection_seed);
            rng.shuffle(idx);
            chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
            break;
        }
        case SelectionMode::PerClass: {
            // Fill whole classes in seeded class order, then part of the
            // next class, hitting exactly m rows. Covers the one-class study.
            std::vector<int> order(clean.k);
            std::iota(order.begin(), order.end(), 0);
            Rng rng(spec.selection_seed);
            rng.shuffle(order);
            for (int c : order) {
                for (std::size_t i = 0; i < n && chosen.size() < m; ++i)
                    if (clean.labels[i] == c) chosen.push_back(i);
                if (chosen.size() >= m) break;
            }
            break;
        }
    }

    MixResult res;
    res.dataset = clean;
    res.mask.assign(n, 0);
    for (std::size_t i : chosen) {
        res.mask[i] = 1;
        std::copy(unlearnable.pixels.row(i), unlearnable.pixels.row(i) + clean.d(),
                  res.dataset.pixels.row(i));
    }
    return res;
}

LabeledDataset resample_with_replacement(const LabeledDataset& ds, std::size_t n_out,
                                         std::uint64_t seed) {
    if (ds.n() == 0) throw argument_error("resample: empty dataset");
    Rng rng(seed);
    std::vector<std::size_t> idx(n_out);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(ds.n()));
    return take_rows(ds, idx);
}

LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
    LabeledDataset out;
    out.pixels = MatF(idx.size(), ds.d());
    out.labels.resize(idx.size());
    out.shape = ds.shape;
    out.k = ds.k;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= ds.n()) throw argument_error("take_rows: index out of range");
        std::copy(ds.pixels.row(idx[i]), ds.pixels.row(idx[i]) + ds.d(), out.pixels.row(i));
        out.labels[i] = ds.labels[idx[i]];
    }
    return out;
}

}  // namespace pil
