#include "lowbit/repro.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include "lowbit/ema.hpp"
#include "lowbit/harness.hpp"
#include "lowbit/levels.hpp"
#include "lowbit/optimizers.hpp"
#include "lowbit/packed_state.hpp"
#include "lowbit/quantizer.hpp"
#include "lowbit/toy_models.hpp"

namespace lowbit {

namespace {

std::string fmt(double value, int digits = 4) {
    char buffer[48];
    std::snprintf(buffer, sizeof buffer, "%.*g", digits, value);
    return buffer;
}

// Collects named checks; the first failure becomes the summary.
class Checks {
public:
    void close(const std::string& what, double value, double expected, double tolerance) {
        const double deviation = std::abs(value - expected);
        Json row;
        row["check"] = what;
        row["value"] = value;
        row["expected"] = expected;
        row["tolerance"] = tolerance;
        add(std::move(row), deviation <= tolerance,
            what + " = " + fmt(value, 6) + ", expected " + fmt(expected, 6) + " +/- " + fmt(tolerance, 3));
        m_worst = std::max(m_worst, deviation);
    }

    void at_most(const std::string& what, double value, double limit) {
        Json row;
        row["check"] = what;
        row["value"] = value;
        row["limit"] = limit;
        add(std::move(row), value <= limit, what + " = " + fmt(value, 6) + " exceeds " + fmt(limit, 6));
    }

    void expect(const std::string& what, bool ok) {
        Json row;
        row["check"] = what;
        add(std::move(row), ok, what);
    }

    bool passed() const { return m_failed == 0; }
    double worst_deviation() const { return m_worst; }

    std::string summary(const std::string& extra = {}) const {
        std::string out = std::to_string(m_total - m_failed) + "/" + std::to_string(m_total) + " checks";
        if (!extra.empty()) {
            out += "; " + extra;
        }
        if (m_failed > 0) {
            out += "; first failure: " + m_first_failure;
        }
        return out;
    }

    Json rows() const { return m_rows; }

private:
    void add(Json row, bool ok, const std::string& failure) {
        row["pass"] = ok;
        m_rows.push_back(std::move(row));
        ++m_total;
        if (!ok) {
            if (m_failed == 0) {
                m_first_failure = failure;
            }
            ++m_failed;
        }
    }

    Json m_rows = Json::array();
    int m_total = 0;
    int m_failed = 0;
    double m_worst = 0.0;
    std::string m_first_failure;
};

CriterionResult finish(CriterionResult result, const Checks& checks, const std::string& extra = {}) {
    result.checks_passed = checks.passed();
    result.detail = checks.summary(extra);
    result.data["checks"] = checks.rows();
    return result;
}

std::string label(SchemeKind scheme, int bits) { return std::string(to_string(scheme)) + " " + std::to_string(bits) + "-bit"; }

// Distinct levels bracketing v, used to compute exact two-point moments.
std::pair<double, double> bracket(const LevelTable& table, double v) {
    std::vector<double> sorted = table.levels;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), v);
    if (hi == sorted.end()) {
        return {sorted.back(), sorted.back()};
    }
    if (hi == sorted.begin()) {
        return {sorted.front(), sorted.front()};
    }
    return {*(hi - 1), *hi};
}

// ---------------------------------------------------------------------------

CriterionResult radii_table() {
    CriterionResult result{1, "radii table", false, 0, 1.0, {}, Json::object()};
    Checks checks;
    const std::map<int, double> linear_unsigned = {{2, 0.167}, {3, 0.071}, {4, 0.033}, {8, 0.002}};
    const std::map<int, double> linear_signed = {{2, 0.500}, {3, 0.167}, {4, 0.071}, {8, 0.004}};
    for (bool is_signed : {false, true}) {
        for (auto [bits, r] : is_signed ? linear_signed : linear_unsigned) {
            const auto stats = radius_stats(build_linear_levels(bits, is_signed));
            const std::string name = label(is_signed ? SchemeKind::LinearSigned : SchemeKind::LinearUnsigned, bits);
            checks.close(name + " r_min", stats.r_min, r, 0.001);
            checks.close(name + " r_median", stats.r_median, r, 0.001);
            checks.close(name + " r_max", stats.r_max, r, 0.001);
        }
    }

    struct Triple {
        double r_min, r_median, r_max;
    };
    const std::map<int, Triple> de_unsigned = {
        {2, {0.113, 0.163, 0.225}}, {3, {0.016, 0.067, 0.113}}, {4, {0.002, 0.034, 0.056}}, {8, {0.000, 0.002, 0.004}}};
    for (auto [bits, r] : de_unsigned) {
        const auto stats = radius_stats(build_de_levels(bits, false));
        const std::string name = label(SchemeKind::DynamicExponentUnsigned, bits);
        checks.close(name + " r_min", stats.r_min, r.r_min, 0.005);
        checks.close(name + " r_median", stats.r_median, r.r_median, 0.005);
        checks.close(name + " r_max", stats.r_max, r.r_max, 0.005);
    }
    const std::map<int, double> de_signed_min = {{2, 0.225}, {3, 0.028}, {4, 0.003}, {8, 0.000}};
    const std::map<int, double> de_signed_median = {{2, 0.275}, {3, 0.135}, {4, 0.067}, {5, 0.034},
                                                    {6, 0.017}, {7, 0.008}, {8, 0.004}};
    const std::map<int, double> de_signed_max = {{2, 0.275}, {3, 0.225}, {4, 0.113}, {5, 0.056},
                                                 {6, 0.028}, {7, 0.014}, {8, 0.007}};
    for (int bits = 2; bits <= 8; ++bits) {
        const auto stats = radius_stats(build_de_levels(bits, true));
        const std::string name = label(SchemeKind::DynamicExponentSigned, bits);
        if (de_signed_min.contains(bits)) {
            checks.close(name + " r_min", stats.r_min, de_signed_min.at(bits), 0.005);
        }
        checks.close(name + " r_median", stats.r_median, de_signed_median.at(bits), 0.005);
        checks.close(name + " r_max", stats.r_max, de_signed_max.at(bits), 0.005);
    }
    return finish(result, checks, "worst deviation " + fmt(checks.worst_deviation(), 3));
}

CriterionResult beta_prime_table() {
    CriterionResult result{2, "beta-prime table", false, 0, 1.0, {}, Json::object()};
    Checks checks;
    // Rows b' = 4, 3, 2; columns b = 8, 7, 6, 5; beta = 0.9.
    const std::map<int, std::map<int, double>> expected = {
        {4, {{8, 0.350}, {7, 0.518}, {6, 0.695}, {5, 0.820}}},
        {3, {{8, 0.211}, {7, 0.348}, {6, 0.531}, {5, 0.694}}},
        {2, {{8, 0.116}, {7, 0.207}, {6, 0.357}, {5, 0.527}}},
    };
    for (const auto& [to, row] : expected) {
        for (auto [from, value] : row) {
            checks.close("beta' b=" + std::to_string(from) + " b'=" + std::to_string(to), beta_prime(0.9, from, to),
                         value, 0.005);
        }
    }
    return finish(result, checks, "worst deviation " + fmt(checks.worst_deviation(), 3));
}

CriterionResult swamping_thresholds() {
    CriterionResult result{3, "swamping thresholds", false, 0, 10.0, {}, Json::object()};
    Checks checks;
    const std::map<int, double> linear = {{8, 0.999}, {4, 0.967}, {3, 0.929}, {2, 0.833}};
    const std::map<int, double> de = {{8, 0.998}, {4, 0.966}, {3, 0.933}, {2, 0.837}};
    for (auto [bits, value] : linear) {
        const auto stats = radius_stats(build_linear_levels(bits, false));
        checks.close("threshold " + label(SchemeKind::LinearUnsigned, bits),
                     swamping_beta_threshold(stats, false, RadiusChoice::Min), value, 0.002);
    }
    for (auto [bits, value] : de) {
        const auto stats = radius_stats(build_de_levels(bits, false));
        checks.close("median threshold " + label(SchemeKind::DynamicExponentUnsigned, bits),
                     swamping_beta_threshold(stats, false, RadiusChoice::Median), value, 0.002);
    }

    // Exhaustive grid: one block with an anchor at delta = 1 fed 1 (so delta
    // stays fixed) plus every level crossed with 1000 signals spanning
    // [0, 1] or [-1, 1]. Momentum sits just above the all-level threshold;
    // where threshold + 0.005 would reach 1, the margin halves the headroom.
    Rng rng(0);
    std::size_t total_codes = 0;
    std::size_t changed = 0;
    for (auto scheme : {SchemeKind::LinearUnsigned, SchemeKind::LinearSigned, SchemeKind::DynamicExponentUnsigned,
                        SchemeKind::DynamicExponentSigned}) {
        for (int bits : {2, 3, 4, 8}) {
            const auto table = build_levels(scheme, bits);
            const bool signed_scheme = is_signed(scheme);
            const double threshold = swamping_beta_threshold(radius_stats(table), signed_scheme, RadiusChoice::Min);
            const double beta = threshold + std::min(0.005, 0.5 * (1.0 - threshold));
            std::vector<double> values{1.0};
            std::vector<double> signals{1.0};
            for (double y : table.levels) {
                for (int i = 0; i < 1000; ++i) {
                    values.push_back(y);
                    const double z = i / 999.0;
                    signals.push_back(signed_scheme ? 2.0 * z - 1.0 : z);
                }
            }
            const auto config =
                EmaConfig::quantized(beta, BlockQuantization::make(scheme, bits, RoundingMode::Nearest, values.size()));
            auto state = ema_init(values, config, rng);
            const auto before = std::get<BlockQuantizedTensor>(state.storage);
            ema_step(state, signals, config, rng);
            const auto& after = std::get<BlockQuantizedTensor>(state.storage);
            const auto codes_before = unpack(before.packed);
            const auto codes_after = unpack(after.packed);
            std::size_t moved = 0;
            for (std::size_t i = 0; i < codes_before.size(); ++i) {
                moved += codes_before[i] != codes_after[i] ? 1 : 0;
            }
            total_codes += codes_before.size();
            changed += moved;
            checks.expect("grid " + label(scheme, bits) + " at beta " + fmt(beta, 6) + ": " + std::to_string(moved) +
                              " code changes, scale " + (before.scales == after.scales ? "fixed" : "moved"),
                          moved == 0 && before.scales == after.scales);
        }
    }
    result.data["grid_codes"] = total_codes;
    result.data["grid_code_changes"] = changed;
    return finish(result, checks,
                  std::to_string(changed) + " code changes over " + std::to_string(total_codes) + " grid entries");
}

CriterionResult uniform_signals() {
    CriterionResult result{4, "uniform-signal EMA", false, 0, 5.0, {}, Json::object()};
    Checks checks;
    constexpr std::size_t n = 1000;
    constexpr double beta = 0.999;
    constexpr std::size_t iters = 100;
    constexpr std::uint64_t seed = 1;
    const auto log2 = single_block(BlockQuantization::make(SchemeKind::LogUnsigned, 2, RoundingMode::LogDither), n);
    const auto linear2 =
        single_block(BlockQuantization::make(SchemeKind::LinearUnsigned, 2, RoundingMode::Nearest), n);

    const auto log_report = uniform_signal_experiment(n, beta, log2, iters, seed);
    const auto linear_report = uniform_signal_experiment(n, beta, linear2, iters, seed);
    const auto fp_report = uniform_signal_experiment(n, beta, std::nullopt, iters, seed);
    const double log_mean = log_report.metrics["final_mean"].get<double>();
    const double linear_mean = linear_report.metrics["final_mean"].get<double>();
    const double linear_start = linear_report.metrics["initial_quantized_mean"].get<double>();
    const double fp_mean = fp_report.metrics["final_mean"].get<double>();
    checks.close("log 2-bit dither final mean", log_mean, 0.5, 0.05);
    checks.close("nearest linear 2-bit final mean vs its quantized start", linear_mean, linear_start, 0.02);
    checks.close("full-precision final mean", fp_mean, 0.5, 0.05);
    result.data["config"] = log_report.config;
    result.data["seed"] = seed;
    return finish(result, checks,
                  "log " + fmt(log_mean) + ", linear " + fmt(linear_mean) + " (start " + fmt(linear_start) +
                      "), full precision " + fmt(fp_mean));
}

CriterionResult decay_alignment() {
    CriterionResult result{5, "zero-signal decay", false, 0, 5.0, {}, Json::object()};
    Checks checks;
    std::string means;
    for (auto [c, s] : {std::pair{1, 3}, std::pair{2, 3}, std::pair{5, 2}}) {
        const auto decay = decay_experiment(c, s, 10000, 7);
        checks.close("mean hitting time c=" + std::to_string(c) + " s=" + std::to_string(s), decay.mean,
                     decay.expected, 0.05 * decay.expected);
        means += (means.empty() ? "" : ", ") + fmt(decay.mean) + " vs " + fmt(decay.expected);
    }
    return finish(result, checks, means);
}

CriterionResult unbiasedness() {
    CriterionResult result{6, "rounding unbiasedness", false, 0, 30.0, {}, Json::object()};
    Checks checks;
    constexpr int kDraws = 100000;
    const double root_n = std::sqrt(static_cast<double>(kDraws));
    Rng rng(2024);
    for (auto scheme : {SchemeKind::LinearUnsigned, SchemeKind::LinearSigned, SchemeKind::DynamicExponentUnsigned,
                        SchemeKind::DynamicExponentSigned}) {
        for (int bits : {2, 4, 8}) {
            const auto table = build_levels(scheme, bits);
            const auto [lo, hi] = std::minmax_element(table.levels.begin(), table.levels.end());
            for (int point = 0; point < 3; ++point) {
                const double scale = rng.uniform(0.5, 4.0);
                const double v = rng.uniform(*lo, *hi);
                const auto [y_lo, y_hi] = bracket(table, v);
                const double sigma = std::sqrt(std::max(0.0, (y_hi - v) * (v - y_lo))) * scale;
                double sum = 0.0;
                for (int i = 0; i < kDraws; ++i) {
                    sum += dequantize(quantize_stochastic(v * scale, scale, table, rng.uniform()), scale, table);
                }
                checks.close("stochastic " + label(scheme, bits) + " x/delta=" + fmt(v, 6), sum / kDraws, v * scale,
                             3.0 * sigma / root_n + 1e-12);
            }
        }
    }
    for (int point = 0; point < 10; ++point) {
        constexpr int bits = 4;
        const double base = rng.uniform(0.5, 0.9);
        const double index = rng.uniform(1.5, 13.5);
        const double scale = rng.uniform(0.5, 2.0);
        const double frac = index - std::floor(index);
        const double sigma = std::sqrt(frac * (1.0 - frac));
        double sum = 0.0;
        for (int i = 0; i < kDraws; ++i) {
            sum += quantize_log_dither(scale * std::pow(base, index), scale, base, bits, rng.uniform() - 0.5);
        }
        checks.close("dither expected code, base " + fmt(base) + " index " + fmt(index, 6), sum / kDraws, index,
                     3.0 * sigma / root_n + 1e-9);
    }
    return finish(result, checks);
}

CriterionResult variance_bound() {
    CriterionResult result{7, "requantization variance bound", false, 0, 60.0, {}, Json::object()};
    Checks checks;
    constexpr int kDraws = 10000;
    Rng rng(99);
    const std::vector<SchemeKind> schemes = {SchemeKind::LinearSigned, SchemeKind::DynamicExponentSigned,
                                             SchemeKind::LinearUnsigned, SchemeKind::DynamicExponentUnsigned};
    const std::vector<int> widths = {2, 3, 4, 8};
    double tightest = 0.0;
    for (int config = 0; config < 100; ++config) {
        const SchemeKind scheme = schemes[rng.below(schemes.size())];
        const int bits = widths[rng.below(widths.size())];
        const auto table = build_levels(scheme, bits);
        const double beta = rng.uniform(0.05, 0.99);
        const double scale = rng.uniform(0.1, 10.0);
        const RadiusStats stats = radius_stats(table);
        double v = 0.0;
        if (config % 4 == 0) {
            // Worst case: the midpoint of the widest gap.
            std::vector<double> sorted = table.levels;
            std::sort(sorted.begin(), sorted.end());
            sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
            std::size_t widest = 0;
            for (std::size_t k = 1; k + 1 < sorted.size(); ++k) {
                if (sorted[k + 1] - sorted[k] > sorted[widest + 1] - sorted[widest]) {
                    widest = k;
                }
            }
            v = 0.5 * (sorted[widest] + sorted[widest + 1]);
        } else {
            const auto [lo, hi] = std::minmax_element(table.levels.begin(), table.levels.end());
            v = rng.uniform(*lo, *hi);
        }
        const double state = v * scale;
        const double gain = beta / (1.0 - beta);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int i = 0; i < kDraws; ++i) {
            const double noise =
                gain * (dequantize(quantize_stochastic(state, scale, table, rng.uniform()), scale, table) - state);
            sum += noise;
            sum_sq += noise * noise;
        }
        const double mean = sum / kDraws;
        const double variance = sum_sq / kDraws - mean * mean;
        const double bound = gradient_variance_bound(beta, stats.r_max, scale);
        tightest = std::max(tightest, variance / bound);
        checks.at_most("variance " + label(scheme, bits) + " beta " + fmt(beta) + " x/delta " + fmt(v), variance,
                       1.05 * bound);
    }
    return finish(result, checks, "largest variance / bound " + fmt(tightest));
}

CriterionResult adaptive_lr_closed_form() {
    CriterionResult result{8, "adaptive learning-rate variance", false, 0, 0.0, {}, Json::object()};
    Checks checks;
    constexpr int kDraws = 100000;
    const double n = kDraws;
    Rng rng(31);
    for (int triple = 0; triple < 50; ++triple) {
        const double y_lo = rng.uniform(0.01, 0.9);
        const double y_hi = rng.uniform(y_lo + 0.005, 1.0);
        const double v = rng.uniform(y_lo, y_hi);
        const double scale = rng.uniform(0.1, 10.0);
        const double p_lo = (y_hi - v) / (y_hi - y_lo);
        int lows = 0;
        for (int i = 0; i < kDraws; ++i) {
            lows += rng.uniform() < p_lo ? 1 : 0;
        }
        // Unbiased sample variance of the two-point draw, from its counts.
        const double d = scale / std::sqrt(y_lo) - scale / std::sqrt(y_hi);
        const double p_hat = lows / n;
        const double sample = n / (n - 1.0) * p_hat * (1.0 - p_hat) * d * d;
        // Exact sampling variance of that estimator: mu4 / n - sigma^4 (n - 3) / (n (n - 1)).
        const double q_lo = 1.0 - p_lo;
        const double sigma2 = p_lo * q_lo * d * d;
        const double mu4 = p_lo * q_lo * (1.0 - 3.0 * p_lo * q_lo) * d * d * d * d;
        const double sd = std::sqrt(std::max(0.0, mu4 / n - sigma2 * sigma2 * (n - 3.0) / (n * (n - 1.0))));
        checks.close("variance y_lo " + fmt(y_lo) + " y_hi " + fmt(y_hi) + " x/delta " + fmt(v), sample,
                     adaptive_lr_variance(v, scale, y_lo, y_hi), 3.0 * sd);
    }
    return finish(result, checks);
}

// Textbook Adam (optionally with coupled L2) and AdamW, independent of the
// EMA machinery.
struct ReferenceAdam {
    OptimizerSpec spec;
    std::vector<double> m, v;
    int t = 0;

    void step(std::vector<double>& w, std::vector<double> g) {
        ++t;
        const bool decoupled = spec.family == OptimizerFamily::AdamW;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!decoupled) {
                g[i] += spec.weight_decay * w[i];
            }
            m[i] = spec.beta1 * m[i] + (1 - spec.beta1) * g[i];
            v[i] = spec.beta2 * v[i] + (1 - spec.beta2) * g[i] * g[i];
            const double m_hat = m[i] / (1 - std::pow(spec.beta1, t));
            const double v_hat = v[i] / (1 - std::pow(spec.beta2, t));
            const double decay = decoupled ? spec.lr * spec.weight_decay * w[i] : 0.0;
            w[i] = w[i] - spec.lr * m_hat / (std::sqrt(v_hat) + spec.epsilon) - decay;
        }
    }
};

CriterionResult optimizer_equivalence() {
    CriterionResult result{9, "optimizer equivalence", false, 0, 0.0, {}, Json::object()};
    Checks checks;
    Rng rng(5);
    for (auto [family, decay] : {std::pair{OptimizerFamily::Adam, 0.0}, std::pair{OptimizerFamily::Adam, 0.01},
                                 std::pair{OptimizerFamily::AdamW, 0.05}}) {
        OptimizerSpec spec;
        spec.family = family;
        spec.weight_decay = decay;
        spec.lr = rng.uniform(1e-4, 1e-1);
        spec.beta1 = rng.uniform(0.5, 0.95);
        spec.beta2 = rng.uniform(0.9, 0.9999);
        spec.epsilon = std::pow(10.0, rng.uniform(-10.0, -6.0));
        constexpr std::size_t n = 64;
        std::vector<double> w(n);
        for (auto& x : w) {
            x = rng.normal();
        }
        ParamSlot slot = make_slot(w, spec);
        ReferenceAdam reference{spec, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
        double worst = 0.0;
        for (int step = 0; step < 100; ++step) {
            const double magnitude = std::pow(10.0, rng.uniform(-3.0, 1.0));
            std::vector<double> g(n);
            for (auto& x : g) {
                x = magnitude * rng.normal();
            }
            adam_step(slot, g, spec, rng);
            reference.step(w, g);
            for (std::size_t i = 0; i < n; ++i) {
                worst = std::max(worst, std::abs(slot.weights[i] - w[i]) / std::max(std::abs(w[i]), 1e-300));
            }
        }
        checks.at_most(std::string(to_string(family)) + " wd " + fmt(decay) + " max relative deviation", worst, 1e-12);
    }

    Rng data_rng(17);
    const std::vector<ToyModel> models = {
        ToyModel(ModelKind::LinearRegression, make_regression_data(64, 5, 0.1, data_rng)),
        ToyModel(ModelKind::LogisticRegression, make_separable_data(64, 5, 0.1, data_rng)),
        ToyModel(ModelKind::Mlp, make_nonlinear_data(64, 4, data_rng), 6),
    };
    for (const auto& model : models) {
        for (int point = 0; point < 4; ++point) {
            std::vector<double> params(model.parameter_count(), 0.0);
            if (point > 0) {
                for (auto& x : params) {
                    x = data_rng.normal();
                }
            }
            checks.at_most(std::string(to_string(model.kind())) + (point == 0 ? " zero point" : " random point") +
                               " finite-difference relative error",
                           finite_difference_check(model, params, 1e-5), 1e-4);
        }
    }
    return finish(result, checks);
}

CriterionResult training_differential() {
    CriterionResult result{10, "toy training differential", false, 0, 120.0, {}, Json::object()};
    Checks checks;
    constexpr std::uint64_t seed = 1;
    constexpr std::size_t steps = 5000;
    const ToyModel model = make_logistic_task(seed);
    OptimizerSpec base;
    base.lr = 1e-2;
    base.weight_decay = 1e-3;

    OptimizerSpec linear2 = base;
    linear2.signed_state = BlockQuantization::make(SchemeKind::LinearSigned, 2, RoundingMode::Nearest);
    linear2.unsigned_state = BlockQuantization::make(SchemeKind::LinearUnsigned, 2, RoundingMode::Nearest);

    const auto final_loss = [](const TrainResult& run) {
        return run.crashed ? std::numeric_limits<double>::infinity() : run.final_loss();
    };
    const TrainResult full = train(model, base, steps, seed);
    const TrainResult solo42 = train(model, apply_preset(Preset::Solo42Scratch, base), steps, seed);
    const TrainResult solo2 = train(model, apply_preset(Preset::Solo2Scratch, base), steps, seed);
    const TrainResult linear = train(model, linear2, steps, seed);
    const double reference = final_loss(full);

    checks.at_most("full-precision final / initial loss", reference / full.initial_loss(), 0.1);
    checks.at_most("4/2-bit preset relative gap", std::abs(final_loss(solo42) - reference) / reference, 0.10);
    checks.at_most("2-bit preset relative gap", std::abs(final_loss(solo2) - reference) / reference, 0.25);
    checks.expect("4/2-bit preset beats nearest linear 2-bit", final_loss(solo42) < final_loss(linear));
    checks.expect("2-bit preset beats nearest linear 2-bit", final_loss(solo2) < final_loss(linear));

    Json losses;
    losses["full_precision"] = reference;
    losses["solo_4_2"] = final_loss(solo42);
    losses["solo_2"] = final_loss(solo2);
    losses["linear_2"] = std::isfinite(final_loss(linear)) ? Json(final_loss(linear)) : Json();
    losses["linear_2_crashed"] = linear.crashed;
    result.data["final_losses"] = losses;
    result.data["optimizer"] = to_json(base);
    return finish(result, checks,
                  "final loss fp " + fmt(reference) + ", 4/2 " + fmt(final_loss(solo42)) + ", 2-bit " +
                      fmt(final_loss(solo2)) + ", linear 2-bit " + fmt(final_loss(linear)));
}

CriterionResult storage() {
    CriterionResult result{11, "packed storage", false, 0, 0.0, {}, Json::object()};
    Checks checks;
    Rng rng(3);
    std::size_t mismatches = 0;
    for (int bits = kMinBits; bits <= kMaxBits; ++bits) {
        for (std::size_t length = 0; length <= 1000; ++length) {
            std::vector<Code> codes(length);
            for (auto& c : codes) {
                c = static_cast<Code>(rng.below(std::uint64_t{1} << bits));
            }
            const int width = storage_bits(bits);
            const PackedCodes packed = pack(codes, width);
            const std::size_t expected_bytes = (length * static_cast<std::size_t>(width) + 7) / 8;
            if (unpack(packed) != codes || packed.buffer.size() != expected_bytes) {
                ++mismatches;
            }
        }
    }
    checks.expect("pack/unpack round-trip, code bits 2-8 at storage widths 2/4/8, lengths 0-1000 (" + std::to_string(mismatches) + " mismatches)",
                  mismatches == 0);

    struct Case {
        SchemeKind scheme;
        int bits;
        RoundingMode mode;
        std::size_t block;
        std::size_t length;
    };
    const std::vector<Case> cases = {
        {SchemeKind::LinearUnsigned, 8, RoundingMode::Nearest, 128, 1000},
        {SchemeKind::LinearSigned, 3, RoundingMode::Stochastic, 64, 257},
        {SchemeKind::DynamicExponentSigned, 4, RoundingMode::Stochastic, 128, 999},
        {SchemeKind::DynamicExponentUnsigned, 5, RoundingMode::Nearest, 32, 100},
        {SchemeKind::LogUnsigned, 2, RoundingMode::LogDither, 128, 1000},
        {SchemeKind::LinearUnsignedNoZero, 6, RoundingMode::Nearest, 7, 50},
        {SchemeKind::LogUnsigned, 4, RoundingMode::Nearest, 2048, 0},
    };
    for (const auto& c : cases) {
        const auto config = BlockQuantization::make(c.scheme, c.bits, c.mode, c.block);
        std::vector<double> values(c.length);
        for (auto& x : values) {
            x = config.is_signed() ? rng.normal() : std::exp(rng.normal());
        }
        const std::optional<double> x_p =
            values.empty() ? std::nullopt : std::optional<double>(tensor_quantile(values, config.p_quantile));
        const auto blocks = quantize_blocks(values, config, x_p, rng);
        const BlockQuantizedTensor tensor = make_tensor(blocks, c.length, config);
        const auto bytes = serialize(tensor);
        const auto back = deserialize(bytes);
        const std::string name = label(c.scheme, c.bits) + " length " + std::to_string(c.length);
        checks.expect(name + " deserialize(serialize(t)) == t", back == tensor);
        checks.expect(name + " re-serialization is byte-identical", serialize(back) == bytes);
        const std::size_t layout = kHeaderBytes + 4 * tensor.scales.size() + 4 * tensor.bases.size() +
                                   (c.length * static_cast<std::size_t>(storage_bits(c.bits)) + 7) / 8;
        checks.close(name + " footprint_bytes", static_cast<double>(footprint_bytes(tensor)),
                     static_cast<double>(layout), 0.0);
        checks.close(name + " serialized size", static_cast<double>(bytes.size()), static_cast<double>(layout), 0.0);
    }
    return finish(result, checks);
}

} // namespace

CriterionResult run_criterion(int id) {
    static const std::map<int, std::function<CriterionResult()>> criteria = {
        {1, radii_table},         {2, beta_prime_table},        {3, swamping_thresholds},
        {4, uniform_signals},     {5, decay_alignment},         {6, unbiasedness},
        {7, variance_bound},      {8, adaptive_lr_closed_form}, {9, optimizer_equivalence},
        {10, training_differential}, {11, storage},
    };
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
        throw std::out_of_range("no acceptance criterion " + std::to_string(id));
    }
    const auto start = std::chrono::steady_clock::now();
    CriterionResult result = it->second();
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

Json to_json(const CriterionResult& result) {
    Json out;
    out["id"] = result.id;
    out["title"] = result.title;
    out["passed"] = result.passed();
    out["checks_passed"] = result.checks_passed;
    out["seconds"] = result.seconds;
    out["time_limit"] = result.time_limit > 0.0 ? Json(result.time_limit) : Json();
    out["detail"] = result.detail;
    out["data"] = result.data;
    return out;
}

std::string summary_line(const CriterionResult& result) {
    char timing[64];
    if (result.time_limit > 0.0) {
        std::snprintf(timing, sizeof timing, "%.2f s / %.0f s", result.seconds, result.time_limit);
    } else {
        std::snprintf(timing, sizeof timing, "%.2f s", result.seconds);
    }
    std::string line = std::string(result.passed() ? "[PASS] " : "[FAIL] ") + std::to_string(result.id) + " " +
                       result.title + " (" + timing + "): " + result.detail;
    if (!result.within_time()) {
        line += "; over the time limit";
    }
    return line;
}

} // namespace lowbit
