#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pil/dataset.hpp"
#include "pil/linear.hpp"
#include "pil/linear_math.hpp"

using namespace pil;

namespace {

LinearWeights random_weights(std::size_t d, std::size_t k, std::uint64_t seed, double scale = 1.0) {
    LinearWeights w;
    w.w = MatF(d, k);
    Rng rng(seed);
    for (auto& v : w.w.data) v = static_cast<float>(rng.uniform(-scale, scale));
    return w;
}

}  // namespace

TEST_CASE("forward extracts weight rows on basis vectors") {
    auto w = random_weights(5, 3, 1);
    for (std::size_t j = 0; j < 5; ++j) {
        std::vector<float> e(5, 0.0f);
        e[j] = 1.0f;
        auto logits = forward(e, w);
        for (std::size_t c = 0; c < 3; ++c) CHECK(logits[c] == doctest::Approx(w.w.at(j, c)));
    }
    auto zero = forward(std::vector<float>(5, 0.0f), w);
    for (float v : zero) CHECK(v == 0.0f);
}

TEST_CASE("forward matches brute-force dot products") {
    Rng rng(7);
    auto w = random_weights(3, 2, 2);
    std::vector<float> x = {0.3f, -1.2f, 0.8f};
    auto logits = forward(x, w);
    auto want = oracle::naive_forward(oracle::widen(x), oracle::widen(w.w.data), 3, 2);
    for (std::size_t c = 0; c < 2; ++c) CHECK(logits[c] == doctest::Approx(want[c]).epsilon(1e-6));
    CHECK_THROWS_AS(forward(std::vector<float>(4, 0.0f), w), shape_error);
}

TEST_CASE("softmax closed forms") {
    auto p = softmax({0.0f, std::log(3.0f)});
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-6));

    auto u = softmax({1.4f, 1.4f, 1.4f, 1.4f});
    for (float v : u) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));

    // Shift invariance.
    auto a = softmax({0.1f, -0.4f, 2.0f});
    auto b = softmax({0.1f + 5.0f, -0.4f + 5.0f, 2.0f + 5.0f});
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));

    CHECK_THROWS_AS(softmax({1.0f, std::numeric_limits<float>::infinity()}), numeric_error);
}

TEST_CASE("softmax sums to one on random logits") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        std::vector<float> z(2 + t % 7);
        for (auto& v : z) v = static_cast<float>(rng.uniform(-20, 20));
        auto p = softmax(z);
        double s = 0;
        for (float v : p) {
            CHECK(v >= 0.0f);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("cross entropy closed forms") {
    CHECK(cross_entropy({0.5f, 0.5f}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-5));
    CHECK(cross_entropy({0.25f, 0.75f}, 1) == doctest::Approx(-std::log(0.75)).epsilon(1e-5));
    CHECK(cross_entropy({0.0f, 1.0f}, 1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK_THROWS_AS(cross_entropy({0.5f, 0.5f}, 2), argument_error);
}

TEST_CASE("kl to uniform closed forms and bounds") {
    CHECK(kl_to_uniform({0.25f, 0.25f, 0.25f, 0.25f}) == doctest::Approx(0.0).epsilon(1e-6));
    std::vector<float> onehot(10, 0.0f);
    onehot[3] = 1.0f;
    CHECK(kl_to_uniform(onehot) == doctest::Approx(std::log(10.0)).epsilon(1e-4));

    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = 2 + t % 6;
        std::vector<float> z(k);
        for (auto& v : z) v = static_cast<float>(rng.uniform(-6, 6));
        auto p = softmax(z);
        const double kl = kl_to_uniform(p);
        CHECK(kl >= -1e-6);
        CHECK(kl <= std::log(double(k)) + 1e-6);
        // Identity: KL(p||u) = log k - H(p).
        double ent = 0;
        for (float v : p) ent -= double(v) * std::log(double(v) + 1e-12);
        CHECK(kl == doctest::Approx(std::log(double(k)) - ent).epsilon(1e-6));
    }
}

TEST_CASE("grad_w_ce: zero cases") {
    auto w = random_weights(4, 3, 5);
    MatF x(1, 4, 0.0f);
    auto g = grad_w_ce(x, {1}, w);
    for (float v : g.data) CHECK(v == 0.0f);
}

TEST_CASE("grad_w_ce matches finite differences in double") {
    Rng rng(13);
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + t % 9, k = 2 + t % 4;
        auto x = oracle::random_vector(rng, d, -1, 1);
        auto w = oracle::random_vector(rng, d * k, -1, 1);
        const std::size_t label = t % k;

        // Analytic (double instantiation of the production kernel).
        std::vector<double> gw(d * k), scratch(k);
        grad_w_ce(x.data(), label, w.data(), d, k, gw.data(), scratch.data());

        auto fd = oracle::central_diff(
            [&](const std::vector<double>& ww) { return oracle::naive_ce_loss(x, ww, d, k, label); },
            w);
        CHECK(oracle::max_rel_err(gw, fd) < 1e-5);
    }
}

TEST_CASE("grad_x_loss matches finite differences in double") {
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + t % 9, k = 2 + t % 4;
        auto x = oracle::random_vector(rng, d, -1, 1);
        auto w = oracle::random_vector(rng, d * k, -1, 1);
        const std::size_t label = t % k;

        std::vector<double> gx(d), scratch(k);
        grad_x_ce(x.data(), label, w.data(), d, k, gx.data(), scratch.data());
        auto fd_ce = oracle::central_diff(
            [&](const std::vector<double>& xx) { return oracle::naive_ce_loss(xx, w, d, k, label); },
            x);
        CHECK(oracle::max_rel_err(gx, fd_ce) < 1e-5);

        grad_x_kl(x.data(), w.data(), d, k, gx.data(), scratch.data());
        auto fd_kl = oracle::central_diff(
            [&](const std::vector<double>& xx) { return oracle::naive_kl_uniform_loss(xx, w, d, k); },
            x);
        CHECK(oracle::max_rel_err(gx, fd_kl) < 1e-5);
    }
}

TEST_CASE("grad_x_loss: KL gradient vanishes at the uniform point") {
    // w = 0 makes every softmax uniform.
    LinearWeights w;
    w.w = MatF(6, 4, 0.0f);
    auto g = grad_x_loss(std::vector<float>(6, 0.3f), 0, w, LossKind::KlUniform);
    for (float v : g) CHECK(std::fabs(v) < 1e-7);
}

TEST_CASE("grad_x_loss: ce closed form on a 2x2 instance") {
    // w = identity, x = (x0, x1): p = softmax(x); dCE/dx = p - onehot(y).
    LinearWeights w;
    w.w = MatF(2, 2, 0.0f);
    w.w.at(0, 0) = 1.0f;
    w.w.at(1, 1) = 1.0f;
    std::vector<float> x = {0.2f, -0.7f};
    auto g = grad_x_loss(x, 0, w, LossKind::Ce);
    auto p = softmax(forward(x, w));
    CHECK(g[0] == doctest::Approx(p[0] - 1.0).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(p[1]).epsilon(1e-6));
}

TEST_CASE("train_sgd: separable blobs reach 99% within 30 epochs") {
    auto ds = generate_synthetic(2, 100, 2, 1.0, 0.05, 7);

    // Independent separability oracle: the midpoint hyperplane between the
    // class means classifies every sample.
    std::vector<double> mean0(2, 0), mean1(2, 0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            if (ds.labels[i] == 0) mean0[j] += ds.pixels.at(i, j);
            else mean1[j] += ds.pixels.at(i, j);
        }
        (ds.labels[i] == 0 ? n0 : n1)++;
    }
    for (std::size_t j = 0; j < 2; ++j) {
        mean0[j] /= double(n0);
        mean1[j] /= double(n1);
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 2; ++j)
            s += (mean0[j] - mean1[j]) * (ds.pixels.at(i, j) - 0.5 * (mean0[j] + mean1[j]));
        CHECK((s > 0) == (ds.labels[i] == 0));
    }

    SgdHyper h;
    h.epochs = 30;
    h.learning_rate = 0.1;
    h.seed = 3;
    auto res = train_sgd(ds, h);
    CHECK(accuracy(res.weights, ds) >= 0.99);
    CHECK(res.epoch_loss.size() == 30);
}

TEST_CASE("train_sgd is bit-reproducible for a fixed seed") {
    auto ds = generate_synthetic(3, 40, 8, 0.5, 0.1, 21);
    SgdHyper h;
    h.epochs = 5;
    h.learning_rate = 0.05;
    h.seed = 99;
    auto a = train_sgd(ds, h);
    auto b = train_sgd(ds, h);
    CHECK(a.weights.w.data == b.weights.w.data);
    CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("train_sgd reduces to exact full-batch gradient descent") {
    auto ds = generate_synthetic(2, 5, 3, 0.6, 0.1, 5);  // 10 samples
    SgdHyper h;
    h.epochs = 4;
    h.learning_rate = 0.2;
    h.momentum = 0.0;
    h.weight_decay = 0.0;
    h.batch_size = ds.n();
    h.schedule = LrSchedule::Constant;
    h.seed = 12;
    auto got = train_sgd(ds, h);

    // Hand-rolled full-batch loop with the same init.
    Rng rng(12);
    const std::size_t d = 3, k = 2;
    std::vector<double> w(d * k);
    const double s = 1.0 / std::sqrt(3.0);
    for (auto& v : w) v = rng.uniform(-s, s);
    for (int epoch = 0; epoch < 4; ++epoch) {
        std::vector<double> g(d * k, 0.0);
        for (std::size_t i = 0; i < ds.n(); ++i) {
            std::vector<double> x(3);
            for (std::size_t j = 0; j < 3; ++j) x[j] = ds.pixels.at(i, j);
            auto p = oracle::naive_softmax(oracle::naive_forward(x, w, d, k));
            p[ds.labels[i]] -= 1.0;
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t c = 0; c < k; ++c) g[a * k + c] += x[a] * p[c];
        }
        for (auto& v : g) v /= double(ds.n());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 0.2 * g[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i)
        CHECK(got.weights.w.data[i] == doctest::Approx(w[i]).epsilon(5e-4));
}

TEST_CASE("train_sgd error paths") {
    LabeledDataset empty;
    empty.k = 2;
    empty.shape = ImageShape{1, 1, 4};
    empty.pixels = MatF(0, 4);
    SgdHyper h;
    CHECK_THROWS_AS(train_sgd(empty, h), argument_error);

    auto ds = generate_synthetic(2, 20, 4, 0.5, 0.05, 9);
    h.learning_rate = 1e35;  // guaranteed overflow
    h.epochs = 3;
    CHECK_THROWS_WITH_AS(train_sgd(ds, h), doctest::Contains("epoch"), numeric_error);
}

TEST_CASE("accuracy tie-break and edge cases") {
    auto ds = generate_synthetic(3, 10, 4, 0.5, 0.1, 31);
    LinearWeights zero;
    zero.w = MatF(4, 3, 0.0f);
    double class0 = 0;
    for (auto l : ds.labels) class0 += (l == 0) ? 1 : 0;
    CHECK(accuracy(zero, ds) == doctest::Approx(class0 / double(ds.n())));

    LabeledDataset one;
    one.pixels = MatF(1, 2);
    one.pixels.at(0, 0) = 1.0f;
    one.pixels.at(0, 1) = 0.0f;
    one.labels = {1};
    one.k = 2;
    one.shape = ImageShape{1, 1, 2};
    LinearWeights w;
    w.w = MatF(2, 2, 0.0f);
    w.w.at(0, 1) = 1.0f;  // logit(1) = 1 > logit(0) = 0
    CHECK(accuracy(w, one) == 1.0);
}

TEST_CASE("cosine schedule hits the endpoints") {
    SgdHyper h;
    h.epochs = 10;
    h.learning_rate = 0.4;
    h.schedule = LrSchedule::Cosine;
    CHECK(scheduled_lr(h, 0) == doctest::Approx(0.4));
    CHECK(scheduled_lr(h, 5) == doctest::Approx(0.2));
    CHECK(scheduled_lr(h, 9) > 0.0);
    h.schedule = LrSchedule::Constant;
    CHECK(scheduled_lr(h, 7) == doctest::Approx(0.4));
}
