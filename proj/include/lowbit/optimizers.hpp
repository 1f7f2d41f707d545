#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lowbit/ema.hpp"
#include "lowbit/levels.hpp"
#include "lowbit/quantizer.hpp"
#include "lowbit/random.hpp"

namespace lowbit {

enum class OptimizerFamily { Adam, AdamW, AdaBelief };

std::string_view to_string(OptimizerFamily family);
OptimizerFamily family_from_string(std::string_view name);

struct OptimizerSpec {
    OptimizerFamily family = OptimizerFamily::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// L2 penalty folded into the gradient for Adam; decoupled decay for AdamW
    /// and AdaBelief.
    double weight_decay = 0.0;
    /// First-moment (signed) state; nullopt keeps it in full precision.
    std::optional<BlockQuantization> signed_state;
    /// Second-moment (unsigned) state; nullopt keeps it in full precision.
    std::optional<BlockQuantization> unsigned_state;
    bool bias_correction = true;
};

/// Throws std::invalid_argument on out-of-range hyperparameters or a state
/// config whose signedness does not fit the moment it quantizes.
void validate(const OptimizerSpec& spec);

struct ParamSlot {
    std::vector<double> weights;
    EmaState m;
    EmaState v;
    std::size_t step = 0;
};

/// Zero-initialized moments for `weights`.
ParamSlot make_slot(std::vector<double> weights, const OptimizerSpec& spec);

/// One optimizer update. The first moment is an EMA of g, the second an EMA
/// of g^2 (AdaBelief: (g - m)^2 + eps / (1 - beta2) with m the freshly updated,
/// dequantized first moment, which reproduces the published s_t recursion).
/// Bias correction uses the configured beta1, including reduced values.
/// Epsilon is added after the square root.
void adam_step(ParamSlot& slot, std::span<const double> grad, const OptimizerSpec& spec, Rng& rng);

/// Momentum b' for a b'-bit first moment matching the variance budget of a
/// b-bit state at momentum beta:
///   b'/(1-b') * r_median(to) = beta/(1-beta) * r_median(from).
/// This is advice only; nothing applies it implicitly.
double beta_prime(double beta, double r_median_from, double r_median_to);
double beta_prime(double beta, const RadiusStats& from, const RadiusStats& to);
/// Uses the reference signed dynamic-exponent medians.
double beta_prime(double beta, int bits_from, int bits_to);

/// Upper bound on the extra gradient variance from stochastic requantization
/// of a first moment: (beta / (1 - beta) * r_max * delta)^2.
double gradient_variance_bound(double beta, double r_max, double scale);

/// Variance of delta / sqrt(y) when x / delta in [y_lo, y_hi] is
/// stochastically rounded to one of the two endpoints:
///   p * q * (delta / sqrt(y_lo) - delta / sqrt(y_hi))^2.
double adaptive_lr_variance(double x_over_scale, double scale, double y_lo, double y_hi);

enum class Preset { Solo42Finetune, Solo42Scratch, Solo2Finetune, Solo2Scratch };

std::string_view to_string(Preset preset);
Preset preset_from_string(std::string_view name);

/// Low-bit presets: 4/2-bit (4-bit signed DE first moment with stochastic
/// rounding, 2-bit dithered log second moment) or 2-bit (both 2-bit). beta1 is
/// 0.8 / 0.3 (4/2-bit fine-tune / scratch) and 0.5 / 0.1 (2-bit); block size
/// 128; p = 0.1. Everything else comes from `base`.
OptimizerSpec apply_preset(Preset preset, const OptimizerSpec& base);

} // namespace lowbit
