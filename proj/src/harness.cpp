#include "lowbit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace lowbit {

namespace {

double mean_of(std::span<const double> values) {
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

// Nearest-rank quantile of an already sorted range.
double sorted_quantile(std::span<const double> sorted, double p) {
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

double mean_abs_error(std::span<const double> a, std::span<const double> b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += std::abs(a[i] - b[i]);
    }
    return total / static_cast<double>(a.size());
}

EmaConfig ema_config(double beta, const std::optional<BlockQuantization>& quantization) {
    return quantization ? EmaConfig::quantized(beta, *quantization) : EmaConfig::full_precision(beta);
}

} // namespace

Json to_json(const BlockQuantization& config) {
    Json out;
    out["scheme"] = std::string(to_string(config.scheme));
    out["bits"] = config.bits;
    out["rounding"] = std::string(to_string(config.mode));
    out["block_size"] = config.block_size;
    if (is_log(config.scheme)) {
        out["p_quantile"] = config.p_quantile;
    }
    return out;
}

Json to_json(const std::optional<BlockQuantization>& config) {
    if (!config) {
        Json out;
        out["scheme"] = "full-precision";
        return out;
    }
    return to_json(*config);
}

Json to_json(const OptimizerSpec& spec) {
    Json out;
    out["family"] = std::string(to_string(spec.family));
    out["lr"] = spec.lr;
    out["beta1"] = spec.beta1;
    out["beta2"] = spec.beta2;
    out["epsilon"] = spec.epsilon;
    out["weight_decay"] = spec.weight_decay;
    out["bias_correction"] = spec.bias_correction;
    out["first_moment"] = to_json(spec.signed_state);
    out["second_moment"] = to_json(spec.unsigned_state);
    return out;
}

BlockQuantization single_block(BlockQuantization config, std::size_t length) {
    config.block_size = std::max<std::size_t>(length, 1);
    return config;
}

ExperimentReport uniform_signal_experiment(std::size_t n, double beta,
                                           const std::optional<BlockQuantization>& quantization, std::size_t iters,
                                           std::uint64_t seed) {
    if (n == 0 || iters == 0) {
        throw std::invalid_argument("uniform-signal experiment needs n >= 1 and iters >= 1");
    }
    Rng master(seed);
    Rng signals = master.split();
    Rng rounding = master.split();

    std::vector<double> initial(n);
    for (auto& x : initial) {
        x = signals.uniform();
    }
    const EmaConfig config = ema_config(beta, quantization);
    const EmaConfig oracle_config = EmaConfig::full_precision(beta);
    EmaState state = ema_init(initial, config, rounding);
    EmaState oracle = ema_init(initial, oracle_config, rounding);
    const std::vector<double> start = ema_read(state);

    ExperimentReport report;
    report.name = "ema-sim";
    report.seed = seed;
    report.config["n"] = n;
    report.config["beta"] = beta;
    report.config["iters"] = iters;
    report.config["quantization"] = to_json(quantization);
    report.columns = {"iter", "mean", "p10", "p50", "p90", "mae_vs_full_precision"};

    std::vector<double> z(n);
    std::vector<double> values;
    for (std::size_t t = 1; t <= iters; ++t) {
        for (auto& x : z) {
            x = signals.uniform();
        }
        ema_step(state, z, config, rounding);
        ema_step(oracle, z, oracle_config, rounding);
        values = ema_read(state);
        const std::vector<double> reference = ema_read(oracle);
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        Json row;
        row["iter"] = t;
        row["mean"] = mean_of(values);
        row["p10"] = sorted_quantile(sorted, 0.1);
        row["p50"] = sorted_quantile(sorted, 0.5);
        row["p90"] = sorted_quantile(sorted, 0.9);
        row["mae_vs_full_precision"] = mean_abs_error(values, reference);
        report.rows.push_back(std::move(row));
    }

    constexpr std::size_t bins = 10;
    std::vector<std::size_t> histogram(bins, 0);
    for (double x : values) {
        const auto bin = static_cast<std::size_t>(std::clamp(x, 0.0, 1.0) * bins);
        ++histogram[std::min(bin, bins - 1)];
    }
    report.metrics["initial_mean"] = mean_of(initial);
    report.metrics["initial_quantized_mean"] = mean_of(start);
    report.metrics["final_mean"] = mean_of(values);
    report.metrics["full_precision_final_mean"] = mean_of(ema_read(oracle));
    report.metrics["signal_mean"] = 0.5;
    report.metrics["histogram_edges"] = Json::array({0.0, 1.0});
    report.metrics["histogram"] = histogram;
    return report;
}

DecayResult decay_experiment(int c, int s, std::size_t trials, std::uint64_t seed, double beta) {
    if (c < 1 || s < 1 || trials == 0) {
        throw std::invalid_argument("decay experiment needs c, s, trials >= 1");
    }
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("beta must lie in (0, 1)");
    }
    constexpr int bits = 8;
    constexpr Code start = 1;
    if (start + static_cast<Code>(s) > (1U << bits) - 1) {
        throw std::invalid_argument("s is too large for an 8-bit log table");
    }
    const double base = std::pow(beta, c);
    Rng rng(seed);
    DecayResult result;
    result.expected = static_cast<double>(c) * s;
    result.hitting_times.reserve(trials);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Code code = start;
        std::size_t steps = 0;
        while (code < start + static_cast<Code>(s)) {
            const double decayed = beta * dequantize_log(code, 1.0, base, bits);
            code = quantize_log_dither(decayed, 1.0, base, bits, rng.uniform() - 0.5);
            ++steps;
        }
        result.hitting_times.push_back(steps);
    }
    double sum = 0.0;
    double sq = 0.0;
    for (auto t : result.hitting_times) {
        sum += static_cast<double>(t);
        sq += static_cast<double>(t) * static_cast<double>(t);
    }
    const double n = static_cast<double>(trials);
    result.mean = sum / n;
    result.stddev = trials > 1 ? std::sqrt(std::max(0.0, (sq - n * result.mean * result.mean) / (n - 1.0))) : 0.0;
    return result;
}

ExperimentReport decay_report(int c, int s, std::size_t trials, std::uint64_t seed, double beta) {
    const DecayResult result = decay_experiment(c, s, trials, seed, beta);
    ExperimentReport report;
    report.name = "decay";
    report.seed = seed;
    report.config["c"] = c;
    report.config["s"] = s;
    report.config["trials"] = trials;
    report.config["beta"] = beta;
    report.config["bits"] = 8;
    report.columns = {"iterations", "count"};
    const std::size_t longest = *std::max_element(result.hitting_times.begin(), result.hitting_times.end());
    std::vector<std::size_t> counts(longest + 1, 0);
    for (auto t : result.hitting_times) {
        ++counts[t];
    }
    for (std::size_t t = 0; t <= longest; ++t) {
        if (counts[t] != 0) {
            Json row;
            row["iterations"] = t;
            row["count"] = counts[t];
            report.rows.push_back(std::move(row));
        }
    }
    report.metrics["mean"] = result.mean;
    report.metrics["stddev"] = result.stddev;
    report.metrics["expected"] = result.expected;
    report.metrics["relative_error"] = std::abs(result.mean - result.expected) / result.expected;
    return report;
}

SignalStream::SignalStream(const SignalGenerator& generator, Rng rng)
    : m_generator(generator), m_rng(rng), m_offset(generator.length), m_signals(generator.length) {
    if (generator.length == 0 || generator.drift_period == 0) {
        throw std::invalid_argument("signal generator needs a positive length and drift period");
    }
    for (auto& mu : m_offset) {
        mu = generator.spread * m_rng.normal();
    }
}

const std::vector<double>& SignalStream::next() {
    ++m_step;
    const double drift = m_generator.drift_amplitude *
                         std::sin(2.0 * std::numbers::pi * static_cast<double>(m_step) /
                                  static_cast<double>(m_generator.drift_period));
    for (std::size_t i = 0; i < m_signals.size(); ++i) {
        const double g = std::exp(m_offset[i] + drift + m_generator.noise * m_rng.normal());
        m_signals[i] = g * g;
    }
    return m_signals;
}

SignalStream tracking_signals(const SignalGenerator& generator, std::uint64_t seed) {
    Rng master(seed);
    return SignalStream(generator, master.split());
}

ExperimentReport tracking_benchmark(const SignalGenerator& generator, const std::vector<TrackingArm>& arms,
                                    const std::vector<std::size_t>& block_sizes, double beta, std::size_t steps,
                                    std::uint64_t seed) {
    if (arms.empty() || block_sizes.empty()) {
        throw std::invalid_argument("tracking benchmark needs at least one scheme and one block size");
    }
    if (steps == 0) {
        throw std::invalid_argument("tracking benchmark needs at least one step");
    }
    for (const auto& arm : arms) {
        if (arm.quantization && arm.quantization->is_signed()) {
            throw std::invalid_argument("tracking arm '" + arm.name + "' uses a signed scheme for a non-negative state");
        }
    }
    for (auto block : block_sizes) {
        if (block == 0) {
            throw std::invalid_argument("block sizes must be positive");
        }
    }

    Rng master(seed);
    SignalStream signals(generator, master.split());
    const std::size_t n = generator.length;

    struct Run {
        std::size_t arm;
        std::size_t block;
        EmaConfig config;
        EmaState state;
        Rng rng;
        double error_sum = 0.0;
    };
    std::vector<Run> runs;
    for (std::size_t a = 0; a < arms.size(); ++a) {
        for (auto block : block_sizes) {
            std::optional<BlockQuantization> q = arms[a].quantization;
            if (q) {
                q->block_size = block;
            }
            EmaConfig config = ema_config(beta, q);
            EmaState state = ema_zeros(n, config);
            runs.push_back({a, block, config, std::move(state), master.split()});
        }
    }
    const EmaConfig oracle_config = EmaConfig::full_precision(beta);
    EmaState oracle = ema_zeros(n, oracle_config);
    Rng unused(0);

    ExperimentReport report;
    report.name = "track";
    report.seed = seed;
    report.config["length"] = n;
    report.config["spread"] = generator.spread;
    report.config["noise"] = generator.noise;
    report.config["drift_amplitude"] = generator.drift_amplitude;
    report.config["drift_period"] = generator.drift_period;
    report.config["beta"] = beta;
    report.config["steps"] = steps;
    report.config["block_sizes"] = block_sizes;
    Json arm_configs = Json::array();
    for (const auto& arm : arms) {
        Json entry;
        entry["name"] = arm.name;
        entry["quantization"] = to_json(arm.quantization);
        arm_configs.push_back(std::move(entry));
    }
    report.config["schemes"] = std::move(arm_configs);
    report.columns = {"step", "scheme", "block_size", "mae", "relative_mae"};

    for (std::size_t t = 1; t <= steps; ++t) {
        const std::vector<double>& z = signals.next();
        ema_step(oracle, z, oracle_config, unused);
        const std::vector<double> reference = ema_read(oracle);
        const double reference_mean = mean_of(reference);
        for (auto& run : runs) {
            ema_step(run.state, z, run.config, run.rng);
            const double mae = mean_abs_error(ema_read(run.state), reference);
            run.error_sum += mae;
            Json row;
            row["step"] = t;
            row["scheme"] = arms[run.arm].name;
            row["block_size"] = run.block;
            row["mae"] = mae;
            row["relative_mae"] = mae / reference_mean;
            report.rows.push_back(std::move(row));
        }
    }

    Json summary = Json::array();
    for (const auto& run : runs) {
        Json entry;
        entry["scheme"] = arms[run.arm].name;
        entry["block_size"] = run.block;
        entry["mean_mae"] = run.error_sum / static_cast<double>(steps);
        summary.push_back(std::move(entry));
    }
    report.metrics["mean_error"] = std::move(summary);
    report.metrics["oracle_final_mean"] = mean_of(ema_read(oracle));
    return report;
}

std::string_view to_string(LrSchedule schedule) {
    return schedule == LrSchedule::Cosine ? "cosine" : "constant";
}

LrSchedule schedule_from_string(std::string_view name) {
    if (name == "constant") {
        return LrSchedule::Constant;
    }
    if (name == "cosine") {
        return LrSchedule::Cosine;
    }
    throw std::invalid_argument("unknown learning-rate schedule '" + std::string(name) + "'");
}

TrainResult train(const ToyModel& model, const OptimizerSpec& spec, std::size_t steps, std::uint64_t seed,
                  const TrainOptions& options) {
    validate(spec);
    const std::size_t batch_size = options.batch_size;
    if (batch_size == 0) {
        throw std::invalid_argument("batch size must be positive");
    }
    Rng master(seed);
    Rng init = master.split();
    Rng schedule = master.split();
    Rng rounding = master.split();

    ParamSlot slot = make_slot(model.initial_parameters(init), spec);
    TrainResult result;
    result.losses.reserve(steps + 1);
    const double initial = model.loss(slot.weights);
    if (!std::isfinite(initial)) {
        throw std::invalid_argument("initial loss is not finite");
    }
    result.losses.push_back(initial);

    const std::size_t n = model.data().size();
    const std::size_t batch = std::min(batch_size, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = n;
    OptimizerSpec current = spec;

    for (std::size_t t = 1; t <= steps; ++t) {
        if (options.schedule == LrSchedule::Cosine) {
            const double progress = static_cast<double>(t - 1) / static_cast<double>(steps);
            current.lr = spec.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        }
        if (cursor + batch > n) {
            // Fisher-Yates on the engine's own draws keeps the schedule portable.
            for (std::size_t i = n - 1; i > 0; --i) {
                std::swap(order[i], order[schedule.below(i + 1)]);
            }
            cursor = 0;
        }
        const std::span<const std::size_t> indices(order.data() + cursor, batch);
        cursor += batch;

        const std::vector<double> grad = model.gradient(slot.weights, indices);
        const bool finite = std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
        double loss = std::numeric_limits<double>::infinity();
        if (finite) {
            adam_step(slot, grad, current, rounding);
            loss = model.loss(slot.weights);
        }
        result.losses.push_back(loss);
        if (!std::isfinite(loss) || loss > kCrashFactor * initial) {
            result.crashed = true;
            result.crash_step = t;
            break;
        }
    }
    result.parameters = slot.weights;
    return result;
}

ExperimentReport train_report(const ToyModel& model, const OptimizerSpec& spec, std::size_t steps,
                              std::uint64_t seed, const TrainOptions& options) {
    const TrainResult result = train(model, spec, steps, seed, options);
    ExperimentReport report;
    report.name = "train";
    report.seed = seed;
    report.config["model"] = std::string(to_string(model.kind()));
    report.config["examples"] = model.data().size();
    report.config["features"] = model.data().features;
    if (model.kind() == ModelKind::Mlp) {
        report.config["hidden"] = model.hidden();
    }
    report.config["steps"] = steps;
    report.config["batch_size"] = options.batch_size;
    report.config["schedule"] = std::string(to_string(options.schedule));
    report.config["optimizer"] = to_json(spec);
    report.columns = {"step", "loss"};
    for (std::size_t t = 0; t < result.losses.size(); ++t) {
        Json row;
        row["step"] = t;
        // JSON has no infinity; a crashed step is recorded as null.
        row["loss"] = std::isfinite(result.losses[t]) ? Json(result.losses[t]) : Json();
        report.rows.push_back(std::move(row));
    }
    report.metrics["initial_loss"] = result.initial_loss();
    report.metrics["final_loss"] = std::isfinite(result.final_loss()) ? Json(result.final_loss()) : Json();
    report.metrics["crashed"] = result.crashed;
    report.metrics["crash_step"] = result.crashed ? Json(result.crash_step) : Json();
    return report;
}

ExperimentReport beta1_sweep(const ToyModel& model, const OptimizerSpec& spec, const std::vector<double>& betas,
                             std::size_t steps, std::uint64_t seed, const TrainOptions& options) {
    if (betas.empty()) {
        throw std::invalid_argument("beta1 sweep needs at least one value");
    }
    ExperimentReport report;
    report.name = "beta1-sweep";
    report.seed = seed;
    report.config["model"] = std::string(to_string(model.kind()));
    report.config["steps"] = steps;
    report.config["batch_size"] = options.batch_size;
    report.config["schedule"] = std::string(to_string(options.schedule));
    report.config["optimizer"] = to_json(spec);
    report.config["betas"] = betas;
    report.columns = {"beta1", "final_loss", "crashed"};
    double best = std::numeric_limits<double>::infinity();
    double best_beta = betas.front();
    for (double beta1 : betas) {
        OptimizerSpec arm = spec;
        arm.beta1 = beta1;
        const TrainResult result = train(model, arm, steps, seed, options);
        const double loss = result.crashed ? std::numeric_limits<double>::infinity() : result.final_loss();
        Json row;
        row["beta1"] = beta1;
        row["final_loss"] = std::isfinite(loss) ? Json(loss) : Json();
        row["crashed"] = result.crashed;
        report.rows.push_back(std::move(row));
        if (loss < best) {
            best = loss;
            best_beta = beta1;
        }
    }
    report.metrics["best_beta1"] = best_beta;
    report.metrics["best_final_loss"] = std::isfinite(best) ? Json(best) : Json();
    return report;
}

ToyModel make_logistic_task(std::uint64_t seed, std::size_t n, std::size_t features, double margin) {
    Rng rng(seed);
    return ToyModel(ModelKind::LogisticRegression, make_separable_data(n, features, margin, rng));
}

} // namespace lowbit
