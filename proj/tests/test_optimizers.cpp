#include "doctest.h"

#include <cmath>
#include <map>

#include "lowbit/optimizers.hpp"

using namespace lowbit;

namespace {

// Plain Adam written out independently of the EMA machinery.
struct ReferenceAdam {
    double lr, beta1, beta2, eps;
    std::vector<double> m, v;
    int t = 0;

    void step(std::vector<double>& w, const std::vector<double>& g) {
        ++t;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1 * m[i] + (1 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
            const double m_hat = m[i] / (1 - std::pow(beta1, t));
            const double v_hat = v[i] / (1 - std::pow(beta2, t));
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
};

OptimizerSpec full_precision(OptimizerFamily family = OptimizerFamily::Adam) {
    OptimizerSpec spec;
    spec.family = family;
    spec.lr = 0.01;
    return spec;
}

} // namespace

TEST_CASE("first step from zero state") {
    Rng rng(0);
    auto spec = full_precision();
    auto slot = make_slot({0.5}, spec);
    adam_step(slot, std::vector<double>{1.0}, spec, rng);
    CHECK(slot.weights[0] == doctest::Approx(0.5 - spec.lr / (1.0 + spec.epsilon)).epsilon(1e-15));
    CHECK(slot.step == 1);
}

TEST_CASE("Adam and AdamW agree without weight decay") {
    Rng rng_a(1);
    Rng rng_b(1);
    auto adam = full_precision(OptimizerFamily::Adam);
    auto adamw = full_precision(OptimizerFamily::AdamW);
    auto a = make_slot({0.1, -0.2, 0.3}, adam);
    auto b = make_slot({0.1, -0.2, 0.3}, adamw);
    Rng grads(5);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> g = {grads.normal(), grads.normal(), grads.normal()};
        adam_step(a, g, adam, rng_a);
        adam_step(b, g, adamw, rng_b);
    }
    CHECK(a.weights == b.weights);
}

TEST_CASE("AdamW applies decoupled decay to the pre-update weights") {
    Rng rng(0);
    auto spec = full_precision(OptimizerFamily::AdamW);
    spec.weight_decay = 0.1;
    auto slot = make_slot({2.0}, spec);
    adam_step(slot, std::vector<double>{1.0}, spec, rng);
    CHECK(slot.weights[0] == doctest::Approx(2.0 - spec.lr / (1.0 + spec.epsilon) - spec.lr * 0.1 * 2.0));

    // Adam folds the penalty into the gradient instead: g = 1 + 0.1 * 2.
    auto adam = full_precision(OptimizerFamily::Adam);
    adam.weight_decay = 0.1;
    auto coupled = make_slot({2.0}, adam);
    adam_step(coupled, std::vector<double>{1.0}, adam, rng);
    CHECK(coupled.weights[0] == doctest::Approx(2.0 - adam.lr * 1.2 / (1.2 + adam.epsilon)));
}

TEST_CASE("full-precision Adam matches the textbook recursion") {
    Rng rng(0);
    Rng data(17);
    auto spec = full_precision();
    spec.beta1 = 0.85;
    spec.beta2 = 0.995;
    std::vector<double> init(16);
    for (auto& w : init) {
        w = data.normal();
    }
    auto slot = make_slot(init, spec);
    ReferenceAdam reference{spec.lr, spec.beta1, spec.beta2, spec.epsilon,
                            std::vector<double>(16, 0.0), std::vector<double>(16, 0.0)};
    std::vector<double> w = init;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> g(16);
        for (auto& x : g) {
            x = data.normal() * 3.0;
        }
        adam_step(slot, g, spec, rng);
        reference.step(w, g);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(std::abs(slot.weights[i] - w[i]) <= 1e-12 * std::abs(w[i]));
    }
}

TEST_CASE("AdaBelief two-step trace") {
    Rng rng(0);
    auto spec = full_precision(OptimizerFamily::AdaBelief);
    spec.beta1 = 0.9;
    spec.beta2 = 0.999;
    spec.epsilon = 1e-8;
    auto slot = make_slot({1.0}, spec);
    adam_step(slot, std::vector<double>{0.5}, spec, rng);
    adam_step(slot, std::vector<double>{-1.0}, spec, rng);

    // m1 = 0.05, s1 = 0.001 * 0.45^2 + 1e-8
    // m2 = 0.9 * 0.05 - 0.1 = -0.055, s2 = 0.999 * s1 + 0.001 * 0.945^2 + 1e-8
    const double m1 = 0.05;
    const double s1 = 0.001 * 0.45 * 0.45 + 1e-8;
    const double w1 = 1.0 - 0.01 * (m1 / 0.1) / (std::sqrt(s1 / 0.001) + 1e-8);
    const double m2 = -0.055;
    const double s2 = 0.999 * s1 + 0.001 * 0.945 * 0.945 + 1e-8;
    const double m2_hat = m2 / (1.0 - 0.81);
    const double s2_hat = s2 / (1.0 - 0.999 * 0.999);
    const double w2 = w1 - 0.01 * m2_hat / (std::sqrt(s2_hat) + 1e-8);
    CHECK(slot.weights[0] == doctest::Approx(w2).epsilon(1e-12));
}

TEST_CASE("8-bit states stay close to full precision") {
    auto fp = full_precision();
    auto q8 = fp;
    q8.signed_state = BlockQuantization::make(SchemeKind::DynamicExponentSigned, 8, RoundingMode::Stochastic);
    q8.unsigned_state = BlockQuantization::make(SchemeKind::DynamicExponentUnsigned, 8, RoundingMode::Nearest);
    auto q2 = fp;
    q2.signed_state = BlockQuantization::make(SchemeKind::LinearSigned, 2, RoundingMode::Nearest);
    q2.unsigned_state = BlockQuantization::make(SchemeKind::LinearUnsigned, 2, RoundingMode::Nearest);

    std::vector<double> init(256);
    Rng data(23);
    for (auto& w : init) {
        w = data.normal();
    }
    auto a = make_slot(init, fp);
    auto b = make_slot(init, q8);
    auto c = make_slot(init, q2);
    Rng ra(1), rb(1), rc(1);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> g(init.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = a.weights[i] + 0.3 * data.normal();
        }
        adam_step(a, g, fp, ra);
        adam_step(b, g, q8, rb);
        adam_step(c, g, q2, rc);
    }
    double dev8 = 0.0;
    double dev2 = 0.0;
    for (std::size_t i = 0; i < init.size(); ++i) {
        dev8 = std::max(dev8, std::abs(a.weights[i] - b.weights[i]));
        dev2 = std::max(dev2, std::abs(a.weights[i] - c.weights[i]));
    }
    // Each step moves a weight by about lr; the 8-bit path drifts by a small fraction of ten steps.
    MESSAGE("8-bit deviation " << dev8 << ", 2-bit deviation " << dev2);
    CHECK(dev8 <= 0.1 * 10 * fp.lr);
    CHECK(dev8 < dev2);
}

TEST_CASE("optimizer input validation") {
    Rng rng(0);
    auto spec = full_precision();
    auto slot = make_slot({0.0, 0.0}, spec);
    CHECK_THROWS_AS(adam_step(slot, std::vector<double>{1.0}, spec, rng), std::invalid_argument);
    CHECK_THROWS_AS(adam_step(slot, std::vector<double>{1.0, INFINITY}, spec, rng), std::invalid_argument);
    CHECK(slot.step == 0);

    auto wrong = spec;
    wrong.signed_state = BlockQuantization::make(SchemeKind::LinearUnsigned, 4, RoundingMode::Nearest);
    CHECK_THROWS_AS(validate(wrong), std::invalid_argument);
    wrong = spec;
    wrong.unsigned_state = BlockQuantization::make(SchemeKind::DynamicExponentSigned, 4, RoundingMode::Nearest);
    CHECK_THROWS_AS(validate(wrong), std::invalid_argument);
    wrong = spec;
    wrong.epsilon = 0.0;
    CHECK_THROWS_AS(validate(wrong), std::invalid_argument);
    wrong = spec;
    wrong.beta1 = 1.0;
    CHECK_THROWS_AS(validate(wrong), std::invalid_argument);
}

TEST_CASE("beta_prime") {
    CHECK(std::abs(beta_prime(0.9, 5, 4) - 0.820) <= 0.005);
    CHECK(std::abs(beta_prime(0.9, 8, 2) - 0.116) <= 0.005);
    for (int b = 2; b <= 8; ++b) {
        CHECK(beta_prime(0.9, b, b) == doctest::Approx(0.9));
    }
    // Table-driven form agrees with the constants form when fed the same radii.
    RadiusStats from{0, 0.034, 0, {}};
    RadiusStats to{0, 0.067, 0, {}};
    CHECK(beta_prime(0.9, from, to) == doctest::Approx(beta_prime(0.9, 5, 4)));
    CHECK_THROWS_AS(beta_prime(1.0, 5, 4), std::invalid_argument);
}

TEST_CASE("beta_prime monotonicity") {
    for (int from = 2; from <= 8; ++from) {
        for (int to = 2; to <= 8; ++to) {
            double previous = 0.0;
            for (int i = 1; i < 100; ++i) {
                const double value = beta_prime(i / 100.0, from, to);
                CHECK(value > previous);
                previous = value;
            }
        }
        for (double beta : {0.5, 0.9, 0.99}) {
            for (int to = 8; to > 2; --to) {
                CHECK(beta_prime(beta, from, to - 1) <= beta_prime(beta, from, to));
            }
        }
    }
}

TEST_CASE("gradient variance bound") {
    CHECK(gradient_variance_bound(0.0, 0.3, 2.0) == 0.0);
    CHECK(gradient_variance_bound(0.5, 0.1, 1.0) == doctest::Approx(0.01));

    // Monte Carlo: the requantization noise of a stochastic EMA state stays under the bound.
    Rng rng(8);
    const auto table = build_de_levels(3, true);
    const double r_max = radius_stats(table).r_max;
    for (double beta : {0.3, 0.8, 0.95}) {
        for (double x : {-0.6, -0.2, 0.05, 0.5, 0.9}) {
            const double scale = 1.7;
            const double xhat = x * scale;
            double sum = 0.0;
            double sum_sq = 0.0;
            constexpr int kDraws = 10000;
            for (int i = 0; i < kDraws; ++i) {
                const double xt = dequantize(quantize_stochastic(xhat, scale, table, rng.uniform()), scale, table);
                const double noise = beta / (1.0 - beta) * (xt - xhat);
                sum += noise;
                sum_sq += noise * noise;
            }
            const double mean = sum / kDraws;
            const double variance = sum_sq / kDraws - mean * mean;
            CHECK(variance <= gradient_variance_bound(beta, r_max, scale) * 1.05);
        }
    }
}

TEST_CASE("adaptive learning-rate variance") {
    CHECK(adaptive_lr_variance(0.625, 1.0, 0.25, 1.0) == doctest::Approx(0.25));
    CHECK(adaptive_lr_variance(0.25, 1.0, 0.25, 1.0) == 0.0);
    CHECK(adaptive_lr_variance(1.0, 1.0, 0.25, 1.0) == 0.0);
    CHECK_THROWS_AS(adaptive_lr_variance(0.1, 1.0, 0.0, 0.2), std::domain_error);
    CHECK_THROWS_AS(adaptive_lr_variance(0.5, 1.0, 0.1, 0.2), std::invalid_argument);

    // Shrinking the lower level at a fixed gap inflates the variance without bound.
    const double gap = 0.05;
    double previous = 0.0;
    for (double y_lo = 0.5; y_lo > 1e-6; y_lo *= 0.5) {
        const double value = adaptive_lr_variance(y_lo + gap / 2, 1.0, y_lo, y_lo + gap);
        CHECK(value > previous);
        previous = value;
    }
    CHECK(previous > 1e3);

    // Monte Carlo over the two rounding outcomes.
    Rng rng(12);
    const double y_lo = 0.25;
    const double y_hi = 1.0;
    const double x = 0.625;
    constexpr int kDraws = 100000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < kDraws; ++i) {
        const double p_lo = (y_hi - x) / (y_hi - y_lo);
        const double y = rng.uniform() < p_lo ? y_lo : y_hi;
        const double lr = 1.0 / std::sqrt(y);
        sum += lr;
        sum_sq += lr * lr;
    }
    const double mean = sum / kDraws;
    CHECK(sum_sq / kDraws - mean * mean == doctest::Approx(0.25).epsilon(0.01));
}

TEST_CASE("presets") {
    OptimizerSpec base;
    base.beta2 = 0.98;
    base.lr = 3e-4;
    const std::map<Preset, std::pair<double, int>> expected = {
        {Preset::Solo42Finetune, {0.8, 4}},
        {Preset::Solo42Scratch, {0.3, 4}},
        {Preset::Solo2Finetune, {0.5, 2}},
        {Preset::Solo2Scratch, {0.1, 2}},
    };
    for (auto [preset, tuple] : expected) {
        const auto spec = apply_preset(preset, base);
        CHECK(spec.beta1 == tuple.first);
        CHECK(spec.beta2 == 0.98);
        CHECK(spec.lr == 3e-4);
        REQUIRE(spec.signed_state);
        REQUIRE(spec.unsigned_state);
        CHECK(spec.signed_state->scheme == SchemeKind::DynamicExponentSigned);
        CHECK(spec.signed_state->bits == tuple.second);
        CHECK(spec.signed_state->mode == RoundingMode::Stochastic);
        CHECK(spec.signed_state->block_size == 128);
        CHECK(spec.unsigned_state->scheme == SchemeKind::LogUnsigned);
        CHECK(spec.unsigned_state->bits == 2);
        CHECK(spec.unsigned_state->mode == RoundingMode::LogDither);
        CHECK(spec.unsigned_state->block_size == 128);
        CHECK(spec.unsigned_state->p_quantile == 0.1);

        const auto twice = apply_preset(preset, spec);
        CHECK(twice.beta1 == spec.beta1);
        CHECK(*twice.signed_state == *spec.signed_state);
        CHECK(*twice.unsigned_state == *spec.unsigned_state);
        CHECK(preset_from_string(to_string(preset)) == preset);
    }
    CHECK_THROWS_AS(preset_from_string("solo_3_bit"), std::invalid_argument);
}
