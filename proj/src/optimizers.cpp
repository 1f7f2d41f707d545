#include "lowbit/optimizers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lowbit {

namespace {

constexpr int kPresetBlockSize = 128;
constexpr double kPresetQuantile = 0.1;

EmaConfig first_moment_config(const OptimizerSpec& spec) { return EmaConfig{spec.beta1, spec.signed_state}; }

EmaConfig second_moment_config(const OptimizerSpec& spec) { return EmaConfig{spec.beta2, spec.unsigned_state}; }

} // namespace

std::string_view to_string(OptimizerFamily family) {
    switch (family) {
    case OptimizerFamily::Adam: return "adam";
    case OptimizerFamily::AdamW: return "adamw";
    case OptimizerFamily::AdaBelief: return "adabelief";
    }
    return "unknown";
}

OptimizerFamily family_from_string(std::string_view name) {
    for (auto family : {OptimizerFamily::Adam, OptimizerFamily::AdamW, OptimizerFamily::AdaBelief}) {
        if (to_string(family) == name) {
            return family;
        }
    }
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

void validate(const OptimizerSpec& spec) {
    if (!(spec.lr > 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (!(spec.beta1 >= 0.0 && spec.beta1 < 1.0) || !(spec.beta2 >= 0.0 && spec.beta2 < 1.0)) {
        throw std::invalid_argument("momentum parameters must lie in [0, 1)");
    }
    if (!(spec.epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    if (!(spec.weight_decay >= 0.0)) {
        throw std::invalid_argument("weight decay must be non-negative");
    }
    if (spec.signed_state && !spec.signed_state->is_signed()) {
        throw std::invalid_argument("first-moment state needs a signed scheme");
    }
    if (spec.unsigned_state && spec.unsigned_state->is_signed()) {
        throw std::invalid_argument("second-moment state needs an unsigned scheme");
    }
}

ParamSlot make_slot(std::vector<double> weights, const OptimizerSpec& spec) {
    validate(spec);
    ParamSlot slot;
    const std::size_t n = weights.size();
    slot.weights = std::move(weights);
    slot.m = ema_zeros(n, first_moment_config(spec));
    slot.v = ema_zeros(n, second_moment_config(spec));
    return slot;
}

void adam_step(ParamSlot& slot, std::span<const double> grad, const OptimizerSpec& spec, Rng& rng) {
    validate(spec);
    const std::size_t n = slot.weights.size();
    if (grad.size() != n) {
        throw std::invalid_argument("gradient length does not match the parameter count");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) {
            throw std::invalid_argument("non-finite gradient");
        }
    }

    std::vector<double> g(grad.begin(), grad.end());
    if (spec.family == OptimizerFamily::Adam && spec.weight_decay > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            g[i] += spec.weight_decay * slot.weights[i];
        }
    }

    ema_step(slot.m, g, first_moment_config(spec), rng);
    const std::vector<double> m = ema_read(slot.m);

    std::vector<double> second(n);
    if (spec.family == OptimizerFamily::AdaBelief) {
        const double eps_share = spec.epsilon / (1.0 - spec.beta2);
        for (std::size_t i = 0; i < n; ++i) {
            const double belief = g[i] - m[i];
            second[i] = belief * belief + eps_share;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            second[i] = g[i] * g[i];
        }
    }
    ema_step(slot.v, second, second_moment_config(spec), rng);
    const std::vector<double> v = ema_read(slot.v);

    ++slot.step;
    const auto t = static_cast<double>(slot.step);
    const double correction1 = spec.bias_correction ? 1.0 - std::pow(spec.beta1, t) : 1.0;
    const double correction2 = spec.bias_correction ? 1.0 - std::pow(spec.beta2, t) : 1.0;
    const bool decoupled = spec.family != OptimizerFamily::Adam && spec.weight_decay > 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        const double w = slot.weights[i];
        double updated = w - spec.lr * m_hat / (std::sqrt(v_hat) + spec.epsilon);
        if (decoupled) {
            updated -= spec.lr * spec.weight_decay * w;
        }
        slot.weights[i] = updated;
    }
}

double beta_prime(double beta, double r_median_from, double r_median_to) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("beta must lie in (0, 1)");
    }
    if (!(r_median_from > 0.0 && r_median_to > 0.0)) {
        throw std::invalid_argument("median radii must be positive");
    }
    const double rho = beta / (1.0 - beta) * r_median_from / r_median_to;
    return rho / (1.0 + rho);
}

double beta_prime(double beta, const RadiusStats& from, const RadiusStats& to) {
    return beta_prime(beta, from.r_median, to.r_median);
}

double beta_prime(double beta, int bits_from, int bits_to) {
    return beta_prime(beta, reference_signed_de_median(bits_from), reference_signed_de_median(bits_to));
}

double gradient_variance_bound(double beta, double r_max, double scale) {
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw std::invalid_argument("beta must lie in [0, 1)");
    }
    const double amplitude = beta / (1.0 - beta) * r_max * scale;
    return amplitude * amplitude;
}

double adaptive_lr_variance(double x_over_scale, double scale, double y_lo, double y_hi) {
    if (!(y_lo > 0.0)) {
        throw std::domain_error("a zero lower level gives an unbounded adaptive learning rate");
    }
    if (!(y_lo <= x_over_scale && x_over_scale <= y_hi)) {
        throw std::invalid_argument("x / delta must lie within [y_lo, y_hi]");
    }
    if (y_hi == y_lo) {
        return 0.0;
    }
    const double p = (y_hi - x_over_scale) / (y_hi - y_lo);
    const double q = 1.0 - p;
    const double spread = scale / std::sqrt(y_lo) - scale / std::sqrt(y_hi);
    return p * q * spread * spread;
}

std::string_view to_string(Preset preset) {
    switch (preset) {
    case Preset::Solo42Finetune: return "solo_4_2_finetune";
    case Preset::Solo42Scratch: return "solo_4_2_scratch";
    case Preset::Solo2Finetune: return "solo_2_finetune";
    case Preset::Solo2Scratch: return "solo_2_scratch";
    }
    return "unknown";
}

Preset preset_from_string(std::string_view name) {
    for (auto preset : {Preset::Solo42Finetune, Preset::Solo42Scratch, Preset::Solo2Finetune, Preset::Solo2Scratch}) {
        if (to_string(preset) == name) {
            return preset;
        }
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

OptimizerSpec apply_preset(Preset preset, const OptimizerSpec& base) {
    OptimizerSpec spec = base;
    const bool four_two = preset == Preset::Solo42Finetune || preset == Preset::Solo42Scratch;
    switch (preset) {
    case Preset::Solo42Finetune: spec.beta1 = 0.8; break;
    case Preset::Solo42Scratch: spec.beta1 = 0.3; break;
    case Preset::Solo2Finetune: spec.beta1 = 0.5; break;
    case Preset::Solo2Scratch: spec.beta1 = 0.1; break;
    }
    spec.signed_state = BlockQuantization::make(SchemeKind::DynamicExponentSigned, four_two ? 4 : 2,
                                                RoundingMode::Stochastic, kPresetBlockSize, kPresetQuantile);
    spec.unsigned_state = BlockQuantization::make(SchemeKind::LogUnsigned, 2, RoundingMode::LogDither,
                                                  kPresetBlockSize, kPresetQuantile);
    validate(spec);
    return spec;
}

} // namespace lowbit
