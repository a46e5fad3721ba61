#include "pil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pil/rng.hpp"

namespace pil {

namespace {

void require_same_geometry(const LabeledDataset& a, const LabeledDataset& b, const char* what) {
    if (a.n() != b.n() || a.d() != b.d() || !(a.shape == b.shape))
        throw shape_error(std::string(what) + ": datasets disagree in shape");
}

}  // namespace

PsnrResult psnr(const LabeledDataset& reference, const LabeledDataset& candidate) {
    require_same_geometry(reference, candidate, "psnr");
    const std::size_t n = reference.n(), d = reference.d();

    PsnrResult res;
    res.per_image_db.resize(n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const float* a = reference.pixels.row(i);
        const float* b = candidate.pixels.row(i);
        double mse = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = double(a[j]) - double(b[j]);
            mse += diff * diff;
        }
        mse /= static_cast<double>(d);
        res.per_image_db[i] = (mse == 0.0) ? std::numeric_limits<double>::infinity()
                                           : 10.0 * std::log10(1.0 / mse);
    }

    double sum = 0;
    std::size_t finite = 0;
    for (double v : res.per_image_db) {
        if (std::isinf(v)) {
            ++res.n_infinite;
        } else {
            sum += v;
            ++finite;
        }
    }
    res.mean_db = finite ? sum / static_cast<double>(finite) : 0.0;
    return res;
}

SsimResult ssim(const LabeledDataset& reference, const LabeledDataset& candidate,
                const SsimParams& params) {
    require_same_geometry(reference, candidate, "ssim");
    const int win = params.window;
    const int H = reference.shape.height, W = reference.shape.width;
    const int C = reference.shape.channels;
    if (win > H || win > W)
        throw argument_error("ssim: window " + std::to_string(win) + " larger than image " +
                             std::to_string(H) + "x" + std::to_string(W));

    // Normalized Gaussian window.
    std::vector<double> g(static_cast<std::size_t>(win) * win);
    const double half = (win - 1) / 2.0;
    double gsum = 0;
    for (int u = 0; u < win; ++u)
        for (int v = 0; v < win; ++v) {
            const double du = u - half, dv = v - half;
            const double val = std::exp(-(du * du + dv * dv) / (2.0 * params.sigma * params.sigma));
            g[static_cast<std::size_t>(u) * win + v] = val;
            gsum += val;
        }
    for (auto& v : g) v /= gsum;

    const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
    const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);

    const std::size_t n = reference.n();
    SsimResult res;
    res.per_image.resize(n);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) {
        double channel_sum = 0;
        for (int ch = 0; ch < C; ++ch) {
            const float* x = reference.pixels.row(i) + static_cast<std::size_t>(ch) * H * W;
            const float* y = candidate.pixels.row(i) + static_cast<std::size_t>(ch) * H * W;
            double map_sum = 0;
            int positions = 0;
            for (int r = 0; r + win <= H; ++r) {
                for (int c = 0; c + win <= W; ++c) {
                    double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                    for (int u = 0; u < win; ++u) {
                        const float* xrow = x + static_cast<std::size_t>(r + u) * W + c;
                        const float* yrow = y + static_cast<std::size_t>(r + u) * W + c;
                        const double* grow = g.data() + static_cast<std::size_t>(u) * win;
                        for (int v = 0; v < win; ++v) {
                            const double wgt = grow[v];
                            const double xv = xrow[v], yv = yrow[v];
                            mx += wgt * xv;
                            my += wgt * yv;
                            xx += wgt * xv * xv;
                            yy += wgt * yv * yv;
                            xy += wgt * xv * yv;
                        }
                    }
                    const double vx = xx - mx * mx;
                    const double vy = yy - my * my;
                    const double cov = xy - mx * my;
                    const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
                    const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
                    map_sum += num / den;
                    ++positions;
                }
            }
            channel_sum += map_sum / positions;
        }
        res.per_image[i] = channel_sum / C;
    }

    double sum = 0;
    for (double v : res.per_image) sum += v;
    res.mean = n ? sum / static_cast<double>(n) : 0.0;
    return res;
}

ProbeHyper default_probe_hyper(std::uint64_t seed) {
    ProbeHyper h;
    h.linear.epochs = 30;
    h.linear.learning_rate = 0.1;
    h.linear.momentum = 0.9;
    h.linear.batch_size = 128;
    h.linear.schedule = LrSchedule::Cosine;
    h.linear.seed = seed;
    h.mlp.epochs = 40;
    h.mlp.learning_rate = 0.02;
    h.mlp.momentum = 0.9;
    h.mlp.batch_size = 128;
    h.mlp.hidden = 256;
    h.mlp.schedule = LrSchedule::Cosine;
    h.mlp.seed = seed;
    return h;
}

ProbeReport shortcut_probe(const LabeledDataset& unlearnable, const LabeledDataset& clean_train,
                           const LabeledDataset& clean_heldout, const PerturbationSet& perts,
                           ProbeKind kind, const ProbeSeeds& seeds, const ProbeHyper& hyper,
                           Sign sign) {
    if (unlearnable.n() != clean_train.n() || unlearnable.d() != clean_train.d())
        throw shape_error("shortcut_probe: unlearnable/clean_train shape mismatch");
    if (perts.n() != clean_train.n()) throw shape_error("shortcut_probe: perturbation rows != n");
    if (clean_heldout.d() != clean_train.d())
        throw shape_error("shortcut_probe: held-out dim mismatch");
    if (clean_heldout.n() > perts.n())
        throw shape_error("shortcut_probe: held-out set larger than the perturbation pool");

    // (b) shuffled unlearnable train set.
    const LabeledDataset shuffled_train =
        shuffle_pairings(clean_train, perts, sign, seeds.shuffle_seed);

    // (c) shuffled test set: held-out images + a seeded draw of training
    // perturbations, labeled by the perturbation's source sample.
    std::vector<std::size_t> pick(perts.n());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    Rng rng(derive_seed(seeds.shuffle_seed, "heldout-pick"));
    rng.shuffle(pick);
    pick.resize(clean_heldout.n());

    LabeledDataset shuffled_test = clean_heldout;
    const float s = (sign == Sign::Subtract) ? -1.0f : 1.0f;
    for (std::size_t i = 0; i < shuffled_test.n(); ++i) {
        const std::size_t j = pick[i];
        float* out = shuffled_test.pixels.row(i);
        const float* dlt = perts.deltas.row(j);
        for (std::size_t a = 0; a < shuffled_test.d(); ++a) {
            float v = out[a] + s * dlt[a];
            out[a] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        }
        shuffled_test.labels[i] = clean_train.labels[j];
    }

    ProbeReport rep;
    rep.probe_kind = kind;
    rep.seeds = seeds;
    if (kind == ProbeKind::Linear) {
        SgdHyper h = hyper.linear;
        h.seed = seeds.train_seed;
        const TrainResult tr = train_sgd(unlearnable, h);
        rep.clean_train_acc = accuracy(tr.weights, clean_train);
        rep.shuffled_train_acc = accuracy(tr.weights, shuffled_train);
        rep.shuffled_test_acc = accuracy(tr.weights, shuffled_test);
    } else {
        TrainHyper h = hyper.mlp;
        h.seed = seeds.train_seed;
        const MlpTrainResult tr = train_mlp(unlearnable, h);
        rep.clean_train_acc = mlp_accuracy(tr.model, clean_train);
        rep.shuffled_train_acc = mlp_accuracy(tr.model, shuffled_train);
        rep.shuffled_test_acc = mlp_accuracy(tr.model, shuffled_test);
    }
    return rep;
}

std::string ProbeReport::to_json() const {
    std::ostringstream os;
    os.precision(10);
    os << "{\"clean_train_acc\":" << clean_train_acc
       << ",\"shuffled_train_acc\":" << shuffled_train_acc
       << ",\"shuffled_test_acc\":" << shuffled_test_acc << ",\"probe_kind\":\""
       << (probe_kind == ProbeKind::Linear ? "linear" : "mlp") << "\",\"train_seed\":"
       << seeds.train_seed << ",\"shuffle_seed\":" << seeds.shuffle_seed << "}";
    return os.str();
}

SpBaseline::SpBaseline(int k, std::size_t d, double noise_scale, std::uint64_t seed)
    : k_(k), d_(d), noise_scale_(noise_scale) {
    if (k < 2) throw argument_error("sp_baseline: k must be >= 2");
    if (d < 1) throw argument_error("sp_baseline: d must be >= 1");
    class_directions_ = MatF(static_cast<std::size_t>(k), d);
    Rng rng(seed);
    for (auto& v : class_directions_.data) v = static_cast<float>(rng.normal());
}

PerturbationSet SpBaseline::make(const std::vector<std::uint8_t>& labels, float epsilon,
                                 std::uint64_t sample_seed) const {
    if (epsilon <= 0) throw argument_error("sp_baseline: epsilon must be > 0");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= k_)
            throw argument_error("sp_baseline: label out of range at row " + std::to_string(i));

    PerturbationSet ps;
    ps.epsilon = epsilon;
    ps.seed = sample_seed;
    ps.deltas = MatF(labels.size(), d_);
    Rng rng(sample_seed);
    std::vector<float> raw(d_);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const float* dir = class_directions_.row(labels[i]);
        float max_abs = 0.0f;
        for (std::size_t a = 0; a < d_; ++a) {
            raw[a] = dir[a] + static_cast<float>(noise_scale_ * rng.normal());
            const float m = std::fabs(raw[a]);
            if (m > max_abs) max_abs = m;
        }
        float* out = ps.deltas.row(i);
        if (max_abs == 0.0f) {
            std::fill(out, out + d_, 0.0f);
            continue;
        }
        const float scale = epsilon / max_abs;
        for (std::size_t a = 0; a < d_; ++a) {
            float v = raw[a] * scale;  // clip makes the budget exact under fp rounding
            if (v > epsilon) v = epsilon;
            if (v < -epsilon) v = -epsilon;
            out[a] = v;
        }
    }
    return ps;
}

std::vector<LambdaRow> lambda_sweep(const LabeledDataset& train, const LabeledDataset& test,
                                    const SgdHyper& surrogate_hyper, const PilConfig& cfg_template,
                                    const std::vector<double>& lambdas,
                                    const TrainHyper& victim_hyper) {
    for (double l : lambdas)
        if (l < 0.0 || l > 1.0) throw argument_error("lambda_sweep: lambda outside [0,1]");

    // The surrogate does not depend on lambda; train it once.
    LinearWeights w;
    if (cfg_template.pretrain_surrogate) {
        w = train_sgd(train, surrogate_hyper).weights;
    } else {
        Rng rng(surrogate_hyper.seed);
        w.w = MatF(train.d(), train.k);
        const double s = 1.0 / std::sqrt(static_cast<double>(train.d()));
        for (auto& v : w.w.data) v = static_cast<float>(rng.uniform(-s, s));
    }

    std::vector<LambdaRow> rows;
    for (double l : lambdas) {
        PilConfig cfg = cfg_template;
        cfg.lambda = static_cast<float>(l);
        const GenerationResult gen = generate_unlearnable(train, w, cfg);
        const MlpTrainResult victim = train_mlp(gen.unlearnable, victim_hyper);
        rows.push_back({l, mlp_accuracy(victim.model, test)});
    }
    return rows;
}

}  // namespace pil
