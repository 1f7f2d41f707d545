#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lowbit/ema.hpp"
#include "lowbit/optimizers.hpp"
#include "lowbit/quantizer.hpp"
#include "lowbit/report.hpp"
#include "lowbit/toy_models.hpp"

namespace lowbit {

/// Config echo shared by every report.
Json to_json(const BlockQuantization& config);
Json to_json(const std::optional<BlockQuantization>& config);
Json to_json(const OptimizerSpec& spec);

/// Copy of `config` whose single block covers a tensor of `length` entries.
BlockQuantization single_block(BlockQuantization config, std::size_t length);

/// Initial state and per-iteration signals are i.i.d. U[0, 1]; the state is
/// an EMA at momentum `beta`, quantized with `quantization` (full precision
/// when absent). A full-precision EMA fed the same signals runs alongside.
/// Rows: per-iteration mean, quantiles and mean absolute error against that
/// oracle. Metrics include the final mean and histogram and the mean of the
/// quantized initial state.
ExperimentReport uniform_signal_experiment(std::size_t n, double beta,
                                           const std::optional<BlockQuantization>& quantization, std::size_t iters,
                                           std::uint64_t seed);

struct DecayResult {
    double mean = 0.0;
    double stddev = 0.0;
    double expected = 0.0; ///< c * s
    std::vector<std::size_t> hitting_times;
};

/// Zero-signal decay of one dithered 8-bit log code with unit scale and base
/// alpha = beta^c: starting from code 1, counts iterations until the code
/// reaches 1 + s.
DecayResult decay_experiment(int c, int s, std::size_t trials, std::uint64_t seed, double beta = 0.9);
ExperimentReport decay_report(int c, int s, std::size_t trials, std::uint64_t seed, double beta = 0.9);

/// Second-moment-like signals: z = exp(mu_i + d(t) + noise * e)^2 with
/// per-element offsets mu_i ~ N(0, spread^2) and a shared drift
/// d(t) = amplitude * sin(2 pi t / period).
struct SignalGenerator {
    std::size_t length = 4096;
    double spread = 0.25;
    double noise = 0.25;
    double drift_amplitude = 0.5;
    std::size_t drift_period = 200;
};

/// Deterministic source of generator signals, one vector per step.
class SignalStream {
public:
    SignalStream(const SignalGenerator& generator, Rng rng);

    /// Signals for the next step (steps count from 1).
    const std::vector<double>& next();
    std::size_t step() const { return m_step; }

private:
    SignalGenerator m_generator;
    Rng m_rng;
    std::vector<double> m_offset;
    std::vector<double> m_signals;
    std::size_t m_step = 0;
};

/// The stream tracking_benchmark consumes for `seed`.
SignalStream tracking_signals(const SignalGenerator& generator, std::uint64_t seed);

struct TrackingArm {
    std::string name;
    /// Block size is overridden per run; nullopt tracks in full precision.
    std::optional<BlockQuantization> quantization;
};

/// Runs every arm at every block size against the full-precision EMA oracle.
/// Rows: one per (step, arm, block size) with the mean absolute error and the
/// error relative to the oracle's mean. Metrics: mean error per arm and block,
/// and the oracle's final mean.
ExperimentReport tracking_benchmark(const SignalGenerator& generator, const std::vector<TrackingArm>& arms,
                                    const std::vector<std::size_t>& block_sizes, double beta, std::size_t steps,
                                    std::uint64_t seed);

struct TrainResult {
    /// Full-dataset loss before the first step and after every step.
    std::vector<double> losses;
    std::vector<double> parameters;
    bool crashed = false;
    std::size_t crash_step = 0;

    double initial_loss() const { return losses.front(); }
    double final_loss() const { return losses.back(); }
};

/// Loss above this multiple of the initial loss (or a non-finite loss) ends
/// the run and flags it as crashed.
inline constexpr double kCrashFactor = 1e6;

enum class LrSchedule { Constant, Cosine };

std::string_view to_string(LrSchedule schedule);
LrSchedule schedule_from_string(std::string_view name);

inline constexpr std::size_t kDefaultBatchSize = 32;

struct TrainOptions {
    std::size_t batch_size = kDefaultBatchSize;
    /// Cosine decays spec.lr to zero over the run.
    LrSchedule schedule = LrSchedule::Constant;
};

/// Minibatch training with a seeded epoch-shuffled schedule. Parameter
/// initialization, the schedule and the optimizer's rounding stream all
/// derive from `seed`.
TrainResult train(const ToyModel& model, const OptimizerSpec& spec, std::size_t steps, std::uint64_t seed,
                  const TrainOptions& options = {});
ExperimentReport train_report(const ToyModel& model, const OptimizerSpec& spec, std::size_t steps,
                              std::uint64_t seed, const TrainOptions& options = {});

/// Final loss of `spec` with each beta1 in `betas`; a crashed run reports an
/// infinite loss.
ExperimentReport beta1_sweep(const ToyModel& model, const OptimizerSpec& spec, const std::vector<double>& betas,
                             std::size_t steps, std::uint64_t seed, const TrainOptions& options = {});

/// Seeded separable logistic-regression task used by the training checks.
ToyModel make_logistic_task(std::uint64_t seed, std::size_t n = 512, std::size_t features = 10,
                            double margin = 0.1);

} // namespace lowbit
