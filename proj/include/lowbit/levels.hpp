#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lowbit {

enum class SchemeKind {
    LinearUnsigned,
    LinearUnsignedNoZero,
    LinearSigned,
    DynamicExponentUnsigned,
    DynamicExponentSigned,
    LogUnsigned,
};

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 8;

bool is_signed(SchemeKind kind);
bool is_log(SchemeKind kind);
std::string_view to_string(SchemeKind kind);
/// Accepts the names produced by to_string; throws std::invalid_argument otherwise.
SchemeKind scheme_from_string(std::string_view name);

/// Quantization levels for one (scheme, bits) pair. Code k dequantizes to
/// levels[k] (times the block scale). Linear and dynamic-exponent tables are
/// ascending; log tables hold alpha^k and are therefore descending.
struct LevelTable {
    SchemeKind scheme = SchemeKind::LinearUnsigned;
    int bits = 0;
    std::vector<double> levels;
    bool descending_order = false;
    double base = 0.0; ///< alpha, LogUnsigned only

    std::size_t size() const noexcept { return levels.size(); }
    double operator[](std::size_t code) const { return levels[code]; }
};

/// Radii of a level table.
///
/// per_level[k] is the radius of levels[k]: half the smaller gap to its
/// nearest distinct neighbours (boundary levels use their only neighbour).
/// This is the quantity that decides whether a nearest-rounded state moves.
///
/// r_min / r_median / r_max summarize the half-gaps between consecutive
/// distinct levels, i.e. max_k |y_k - y_{k-1}| / 2 for r_max. For evenly
/// spaced tables both views coincide.
struct RadiusStats {
    double r_min = 0.0;
    double r_median = 0.0;
    double r_max = 0.0;
    std::vector<double> per_level;
};

LevelTable build_linear_levels(int bits, bool is_signed, bool exclude_zero = false);
LevelTable build_de_levels(int bits, bool is_signed);
LevelTable build_log_levels(int bits, double base);

/// Dispatches to the builder for a parameter-free scheme. Log tables need a
/// base and must go through build_log_levels.
LevelTable build_levels(SchemeKind kind, int bits);

RadiusStats radius_stats(const LevelTable& table);

/// Radius of a single code, equal to radius_stats(table).per_level[code].
double level_radius(const LevelTable& table, std::size_t code);

/// Resolved dynamic-exponent tables for 2 to 4 bits, kept as golden data for
/// the constructive builder.
std::span<const double> golden_de_levels(int bits, bool is_signed);

/// Reference r_median values of signed dynamic-exponent tables for 2 to 8
/// bits, rounded to three decimals. Used by the momentum advisor when no
/// table is supplied.
double reference_signed_de_median(int bits);

} // namespace lowbit
