#include "lowbit/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lowbit {

namespace {

Code max_code(int bits) { return (Code{1} << bits) - 1; }

void check_scale(double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("scale must be positive");
    }
}

// Scale used for block metadata when the block is all zeros. Any value works
// because dequantization multiplies by a zero scale; this one is the largest
// base the clamp can produce.
float zero_block_base(int bits) {
    return static_cast<float>(std::pow(kLogRatioMax, 1.0 / static_cast<double>(max_code(bits))));
}

} // namespace

std::string_view to_string(RoundingMode mode) {
    switch (mode) {
    case RoundingMode::Nearest: return "nearest";
    case RoundingMode::Stochastic: return "stochastic";
    case RoundingMode::LogDither: return "dither";
    }
    return "unknown";
}

RoundingMode rounding_from_string(std::string_view name) {
    for (auto mode : {RoundingMode::Nearest, RoundingMode::Stochastic, RoundingMode::LogDither}) {
        if (to_string(mode) == name) {
            return mode;
        }
    }
    throw std::invalid_argument("unknown rounding mode '" + std::string(name) + "'");
}

BlockQuantization BlockQuantization::make(SchemeKind scheme, int bits, RoundingMode mode, std::size_t block_size,
                                          double p_quantile) {
    if (block_size == 0) {
        throw std::invalid_argument("block size must be at least 1");
    }
    if (mode == RoundingMode::LogDither && !is_log(scheme)) {
        throw std::invalid_argument("dither rounding requires the log scheme");
    }
    BlockQuantization config;
    config.scheme = scheme;
    config.bits = bits;
    config.mode = mode;
    config.block_size = block_size;
    config.p_quantile = p_quantile;
    if (is_log(scheme)) {
        if (bits < kMinBits || bits > kMaxBits) {
            throw std::invalid_argument("bit width must be in [2, 8], got " + std::to_string(bits));
        }
        if (!(p_quantile > 0.0 && p_quantile < 1.0)) {
            throw std::invalid_argument("quantile p must lie in (0, 1)");
        }
    } else {
        config.table = build_levels(scheme, bits);
    }
    return config;
}

bool operator==(const BlockQuantization& a, const BlockQuantization& b) {
    return a.scheme == b.scheme && a.bits == b.bits && a.mode == b.mode && a.block_size == b.block_size &&
           a.p_quantile == b.p_quantile;
}

double compute_scale(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("cannot compute the scale of an empty block");
    }
    double scale = 0.0;
    for (double v : values) {
        scale = std::max(scale, std::abs(v));
    }
    return scale;
}

double compute_log_base(double x_p, double scale, int bits) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("log base needs a positive scale");
    }
    if (!(x_p >= 0.0)) {
        throw std::invalid_argument("quantile must be non-negative");
    }
    if (bits < kMinBits || bits > kMaxBits) {
        throw std::invalid_argument("bit width must be in [2, 8]");
    }
    const double ratio = std::clamp(x_p / scale, kLogRatioMin, kLogRatioMax);
    return std::pow(ratio, 1.0 / static_cast<double>(max_code(bits)));
}

double tensor_quantile(std::span<const double> values, double p) {
    if (values.empty()) {
        throw std::invalid_argument("quantile of an empty sequence");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("quantile p must lie in (0, 1)");
    }
    std::vector<double> magnitudes(values.size());
    std::transform(values.begin(), values.end(), magnitudes.begin(), [](double v) { return std::abs(v); });
    // Nearest rank, 1-based. The small shrink keeps p * n = 10.000000000000002 at rank 10.
    const double n = static_cast<double>(magnitudes.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n * (1.0 - 1e-12)));
    rank = std::clamp<std::size_t>(rank, 1, magnitudes.size());
    auto nth = magnitudes.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(magnitudes.begin(), nth, magnitudes.end());
    return *nth;
}

Code quantize_nearest(double x, double scale, const LevelTable& table) {
    check_scale(scale);
    const double v = x / scale;
    Code best = 0;
    double best_distance = std::abs(v - table.levels[0]);
    for (std::size_t k = 1; k < table.size(); ++k) {
        const double distance = std::abs(v - table.levels[k]);
        if (distance < best_distance) {
            best_distance = distance;
            best = static_cast<Code>(k);
        }
    }
    return best;
}

Code quantize_stochastic(double x, double scale, const LevelTable& table, double u) {
    check_scale(scale);
    const double v = x / scale;
    // lo: largest level <= v, hi: smallest level > v (first code among duplicates).
    std::optional<std::size_t> lo;
    std::optional<std::size_t> hi;
    std::size_t lowest = 0;
    for (std::size_t k = 0; k < table.size(); ++k) {
        const double y = table.levels[k];
        if (y <= v && (!lo || y > table.levels[*lo])) {
            lo = k;
        }
        if (y > v && (!hi || y < table.levels[*hi])) {
            hi = k;
        }
        if (y < table.levels[lowest]) {
            lowest = k;
        }
    }
    if (!lo) {
        return static_cast<Code>(lowest);
    }
    if (!hi) {
        return static_cast<Code>(*lo);
    }
    const double y_lo = table.levels[*lo];
    const double y_hi = table.levels[*hi];
    const double p_lo = (y_hi - v) / (y_hi - y_lo);
    return static_cast<Code>(u < p_lo ? *lo : *hi);
}

Code quantize_log_dither(double x, double scale, double base, int bits, double xi) {
    check_scale(scale);
    if (x < 0.0) {
        throw std::invalid_argument("log quantization is defined for non-negative values only");
    }
    if (!(base > 0.0 && base < 1.0)) {
        throw std::invalid_argument("log base must lie in (0, 1)");
    }
    const Code top = max_code(bits);
    if (x == 0.0) {
        return top;
    }
    const double index = std::log(x / scale) / std::log(base) + xi;
    // nearbyint honours the default round-half-to-even mode.
    const double rounded = std::nearbyint(index);
    if (rounded <= 0.0) {
        return 0;
    }
    if (rounded >= static_cast<double>(top)) {
        return top;
    }
    return static_cast<Code>(rounded);
}

double dequantize(Code code, double scale, const LevelTable& table) {
    if (code >= table.size()) {
        throw std::out_of_range("code " + std::to_string(code) + " outside level table");
    }
    if (scale == 0.0) {
        return 0.0;
    }
    return table.levels[code] * scale;
}

double dequantize_log(Code code, double scale, double base, int bits) {
    if (code > max_code(bits)) {
        throw std::out_of_range("code " + std::to_string(code) + " outside level table");
    }
    if (scale == 0.0) {
        return 0.0;
    }
    return std::pow(base, static_cast<double>(code)) * scale;
}

BlockCodes quantize_block(std::span<const double> values, const BlockQuantization& config,
                          std::optional<double> x_p, Rng& rng) {
    if (values.size() > config.block_size) {
        throw std::invalid_argument("block longer than the configured block size");
    }
    if (!config.is_signed()) {
        for (double v : values) {
            if (v < 0.0) {
                throw std::invalid_argument("negative value in an unsigned state");
            }
        }
    }

    BlockCodes block;
    block.codes.assign(values.size(), 0);
    const bool log_scheme = is_log(config.scheme);
    block.scale = static_cast<float>(compute_scale(values));
    if (block.scale == 0.0F) {
        if (log_scheme) {
            block.base = zero_block_base(config.bits);
        }
        return block;
    }
    const double scale = block.scale;

    if (log_scheme) {
        const double quantile = x_p ? *x_p : tensor_quantile(values, config.p_quantile);
        block.base = static_cast<float>(compute_log_base(quantile, scale, config.bits));
        const double base = block.base;
        if (config.mode == RoundingMode::LogDither) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                block.codes[i] = quantize_log_dither(values[i], scale, base, config.bits, rng.uniform() - 0.5);
            }
            return block;
        }
        const LevelTable table = build_log_levels(config.bits, base);
        for (std::size_t i = 0; i < values.size(); ++i) {
            block.codes[i] = config.mode == RoundingMode::Nearest
                                 ? quantize_nearest(values[i], scale, table)
                                 : quantize_stochastic(values[i], scale, table, rng.uniform());
        }
        return block;
    }

    for (std::size_t i = 0; i < values.size(); ++i) {
        block.codes[i] = config.mode == RoundingMode::Nearest
                             ? quantize_nearest(values[i], scale, config.table)
                             : quantize_stochastic(values[i], scale, config.table, rng.uniform());
    }
    return block;
}

std::vector<double> dequantize_block(const BlockCodes& block, const BlockQuantization& config) {
    std::vector<double> out(block.codes.size());
    for (std::size_t i = 0; i < block.codes.size(); ++i) {
        out[i] = is_log(config.scheme) ? dequantize_log(block.codes[i], block.scale, block.base, config.bits)
                                       : dequantize(block.codes[i], block.scale, config.table);
    }
    return out;
}

QuantizedBlocks quantize_blocks(std::span<const double> values, const BlockQuantization& config,
                                std::optional<double> x_p, Rng& rng) {
    QuantizedBlocks out;
    out.codes.reserve(values.size());
    const bool log_scheme = is_log(config.scheme);
    if (log_scheme && !x_p && !values.empty()) {
        x_p = tensor_quantile(values, config.p_quantile);
    }
    for (std::size_t start = 0; start < values.size(); start += config.block_size) {
        const std::size_t len = std::min(config.block_size, values.size() - start);
        BlockCodes block = quantize_block(values.subspan(start, len), config, x_p, rng);
        out.codes.insert(out.codes.end(), block.codes.begin(), block.codes.end());
        out.scales.push_back(block.scale);
        if (log_scheme) {
            out.bases.push_back(block.base);
        }
    }
    return out;
}

std::vector<double> dequantize_blocks(const QuantizedBlocks& blocks, std::size_t length,
                                      const BlockQuantization& config) {
    if (blocks.codes.size() != length) {
        throw std::invalid_argument("code count does not match tensor length");
    }
    std::vector<double> out(length);
    const bool log_scheme = is_log(config.scheme);
    for (std::size_t i = 0; i < length; ++i) {
        const std::size_t b = i / config.block_size;
        out[i] = log_scheme ? dequantize_log(blocks.codes[i], blocks.scales[b], blocks.bases[b], config.bits)
                            : dequantize(blocks.codes[i], blocks.scales[b], config.table);
    }
    return out;
}

} // namespace lowbit
