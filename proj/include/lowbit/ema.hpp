#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "lowbit/levels.hpp"
#include "lowbit/packed_state.hpp"
#include "lowbit/quantizer.hpp"
#include "lowbit/random.hpp"

namespace lowbit {

/// One EMA stream x <- beta * x + (1 - beta) * z. A missing quantization
/// config means the state is kept in full precision, which serves as the
/// reference path for every quantized variant.
struct EmaConfig {
    double beta = 0.9;
    std::optional<BlockQuantization> quantization;

    static EmaConfig full_precision(double beta);
    static EmaConfig quantized(double beta, BlockQuantization quantization);
};

struct EmaState {
    std::variant<std::vector<double>, BlockQuantizedTensor> storage;
    std::size_t step = 0;

    std::size_t length() const;
    bool is_quantized() const { return std::holds_alternative<BlockQuantizedTensor>(storage); }
};

EmaState ema_init(std::span<const double> values, const EmaConfig& config, Rng& rng);
EmaState ema_zeros(std::size_t length, const EmaConfig& config);

/// Dequantize, blend in the signals, recompute per-block scales (and, for the
/// log scheme, the tensor-global quantile and per-block bases), requantize.
void ema_step(EmaState& state, std::span<const double> signals, const EmaConfig& config, Rng& rng);

std::vector<double> ema_read(const EmaState& state);

/// Sufficient condition for a nearest-rounded code to survive one EMA step:
///   r >= (1 - beta) * |z / delta_new - y_code| + |delta_old / delta_new - 1|
/// where r is the code's level radius. The condition is also necessary when
/// both neighbouring gaps are equal (linear tables); tests rely only on the
/// sufficient direction.
bool swamping_holds(Code code, const LevelTable& table, double beta, double z_over_new_scale, double scale_ratio);

enum class RadiusChoice { Min, Median };

/// Momentum above which signals within [-delta, delta] are swamped: 1 - r for
/// unsigned states, 1 - r / 2 for signed ones. With RadiusChoice::Min this
/// covers every level, with Median about half of them.
double swamping_beta_threshold(const RadiusStats& stats, bool is_signed, RadiusChoice choice);

} // namespace lowbit
