#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lowbit/levels.hpp"
#include "lowbit/random.hpp"

namespace lowbit {

using Code = std::uint32_t;

enum class RoundingMode { Nearest, Stochastic, LogDither };

std::string_view to_string(RoundingMode mode);
RoundingMode rounding_from_string(std::string_view name);

inline constexpr std::size_t kDefaultBlockSize = 128;
inline constexpr double kDefaultQuantile = 0.1;
/// x_p / delta is clamped into this range before taking the root so that the
/// per-block base stays strictly inside (0, 1).
inline constexpr double kLogRatioMin = 1e-8;
inline constexpr double kLogRatioMax = 0.25;

/// Block-wise quantization settings for one state tensor.
struct BlockQuantization {
    SchemeKind scheme = SchemeKind::LinearUnsigned;
    int bits = 8;
    RoundingMode mode = RoundingMode::Nearest;
    std::size_t block_size = kDefaultBlockSize;
    double p_quantile = kDefaultQuantile;
    /// Fixed level table; empty for LogUnsigned, whose table is rebuilt per block.
    LevelTable table;

    /// Validates the combination and builds the level table.
    static BlockQuantization make(SchemeKind scheme, int bits, RoundingMode mode,
                                  std::size_t block_size = kDefaultBlockSize, double p_quantile = kDefaultQuantile);

    bool is_signed() const { return lowbit::is_signed(scheme); }
};

bool operator==(const BlockQuantization& a, const BlockQuantization& b);

/// Codes plus per-block metadata for one quantized tensor, before packing.
struct QuantizedBlocks {
    std::vector<Code> codes;
    std::vector<float> scales;
    std::vector<float> bases; ///< one per block for LogUnsigned, else empty
};

double compute_scale(std::span<const double> values);
double compute_log_base(double x_p, double scale, int bits);
double tensor_quantile(std::span<const double> values, double p);

Code quantize_nearest(double x, double scale, const LevelTable& table);
/// `u` is a uniform draw on [0, 1).
Code quantize_stochastic(double x, double scale, const LevelTable& table, double u);
/// `xi` is a uniform draw on [-0.5, 0.5].
Code quantize_log_dither(double x, double scale, double base, int bits, double xi);

double dequantize(Code code, double scale, const LevelTable& table);
double dequantize_log(Code code, double scale, double base, int bits);

/// Codes and metadata for a single block.
struct BlockCodes {
    std::vector<Code> codes;
    float scale = 0.0F;
    float base = 0.0F; ///< LogUnsigned only
};

/// Quantizes one block (at most config.block_size values). For LogUnsigned,
/// x_p is the tensor-global quantile; when absent the block's own quantile is
/// used.
BlockCodes quantize_block(std::span<const double> values, const BlockQuantization& config,
                          std::optional<double> x_p, Rng& rng);
std::vector<double> dequantize_block(const BlockCodes& block, const BlockQuantization& config);

/// Quantizes a whole tensor block by block. For LogUnsigned the caller passes
/// the tensor-global quantile x_p; it is ignored otherwise.
QuantizedBlocks quantize_blocks(std::span<const double> values, const BlockQuantization& config,
                                std::optional<double> x_p, Rng& rng);
std::vector<double> dequantize_blocks(const QuantizedBlocks& blocks, std::size_t length,
                                      const BlockQuantization& config);

} // namespace lowbit
