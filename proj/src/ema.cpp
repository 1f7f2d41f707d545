#include "lowbit/ema.hpp"

#include <cmath>
#include <stdexcept>

namespace lowbit {

namespace {

void check_config(const EmaConfig& config) {
    if (!(config.beta >= 0.0 && config.beta < 1.0)) {
        throw std::invalid_argument("EMA momentum must lie in [0, 1)");
    }
}

void check_signs(std::span<const double> values, const EmaConfig& config) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("non-finite value fed to an EMA state");
        }
    }
    if (config.quantization && !config.quantization->is_signed()) {
        for (double v : values) {
            if (v < 0.0) {
                throw std::invalid_argument("negative value fed to an unsigned EMA state");
            }
        }
    }
}

BlockQuantizedTensor quantize_tensor(std::span<const double> values, const BlockQuantization& q, Rng& rng) {
    std::optional<double> x_p;
    if (is_log(q.scheme) && !values.empty()) {
        x_p = tensor_quantile(values, q.p_quantile);
    }
    return make_tensor(quantize_blocks(values, q, x_p, rng), values.size(), q);
}

} // namespace

EmaConfig EmaConfig::full_precision(double beta) { return EmaConfig{beta, std::nullopt}; }

EmaConfig EmaConfig::quantized(double beta, BlockQuantization quantization) {
    return EmaConfig{beta, std::move(quantization)};
}

std::size_t EmaState::length() const {
    if (const auto* full = std::get_if<std::vector<double>>(&storage)) {
        return full->size();
    }
    return std::get<BlockQuantizedTensor>(storage).length;
}

EmaState ema_init(std::span<const double> values, const EmaConfig& config, Rng& rng) {
    check_config(config);
    check_signs(values, config);
    EmaState state;
    if (config.quantization) {
        state.storage = quantize_tensor(values, *config.quantization, rng);
    } else {
        state.storage = std::vector<double>(values.begin(), values.end());
    }
    return state;
}

EmaState ema_zeros(std::size_t length, const EmaConfig& config) {
    check_config(config);
    EmaState state;
    if (config.quantization) {
        state.storage = zero_tensor(length, *config.quantization);
    } else {
        state.storage = std::vector<double>(length, 0.0);
    }
    return state;
}

void ema_step(EmaState& state, std::span<const double> signals, const EmaConfig& config, Rng& rng) {
    check_config(config);
    if (signals.size() != state.length()) {
        throw std::invalid_argument("signal length does not match the state length");
    }
    check_signs(signals, config);
    if (config.quantization.has_value() != state.is_quantized()) {
        throw std::invalid_argument("state storage does not match the EMA config");
    }

    std::vector<double> blended = ema_read(state);
    for (std::size_t i = 0; i < blended.size(); ++i) {
        blended[i] = config.beta * blended[i] + (1.0 - config.beta) * signals[i];
    }
    if (config.quantization) {
        state.storage = quantize_tensor(blended, *config.quantization, rng);
    } else {
        state.storage = std::move(blended);
    }
    ++state.step;
}

std::vector<double> ema_read(const EmaState& state) {
    if (const auto* full = std::get_if<std::vector<double>>(&state.storage)) {
        return *full;
    }
    const auto& tensor = std::get<BlockQuantizedTensor>(state.storage);
    std::vector<double> out(tensor.length);
    const std::vector<Code> codes = unpack(tensor.packed);
    if (is_log(tensor.scheme)) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const std::size_t b = i / tensor.block_size;
            out[i] = dequantize_log(codes[i], tensor.scales[b], tensor.bases[b], tensor.bits);
        }
        return out;
    }
    const LevelTable table = build_levels(tensor.scheme, tensor.bits);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = dequantize(codes[i], tensor.scales[i / tensor.block_size], table);
    }
    return out;
}

bool swamping_holds(Code code, const LevelTable& table, double beta, double z_over_new_scale, double scale_ratio) {
    if (!(scale_ratio > 0.0)) {
        throw std::invalid_argument("scale ratio must be positive");
    }
    const double radius = level_radius(table, code);
    const double drift = (1.0 - beta) * std::abs(z_over_new_scale - table.levels[code]) + std::abs(scale_ratio - 1.0);
    return radius >= drift;
}

double swamping_beta_threshold(const RadiusStats& stats, bool is_signed, RadiusChoice choice) {
    const double r = choice == RadiusChoice::Min ? stats.r_min : stats.r_median;
    return is_signed ? 1.0 - r / 2.0 : 1.0 - r;
}

} // namespace lowbit
