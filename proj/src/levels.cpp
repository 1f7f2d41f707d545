#include "lowbit/levels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lowbit {

namespace {

void check_bits(int bits) {
    if (bits < kMinBits || bits > kMaxBits) {
        throw std::invalid_argument("bit width must be in [2, 8], got " + std::to_string(bits));
    }
}

int bit_length(unsigned word) {
    int n = 0;
    while (word != 0) {
        ++n;
        word >>= 1;
    }
    return n;
}

// Value of an unsigned dynamic-exponent word of `width` bits. The word reads as
// E leading zeros, an indicator one, then F = width - 1 - E fraction bits; the
// fraction selects the midpoint of one of 2^F equal bins over [0.1, 1] and the
// result is scaled by 10^-E. The all-zero word is 0. In the unsigned layout
// the word with only the last bit set (no fraction bits) is the top level 1.
double de_magnitude(unsigned word, int width, bool lone_indicator_is_one) {
    const int exponent = width - bit_length(word);
    if (exponent == width) {
        return 0.0;
    }
    if (lone_indicator_is_one && exponent == width - 1) {
        return 1.0;
    }
    const int fraction_bits = width - 1 - exponent;
    const unsigned bins = 1U << fraction_bits;
    const unsigned fraction = word & (bins - 1U);
    const double mid = 0.1 + 0.9 * (static_cast<double>(fraction) + 0.5) / static_cast<double>(bins);
    return std::pow(10.0, -exponent) * mid;
}

std::vector<double> distinct_ascending(const std::vector<double>& levels) {
    std::vector<double> out(levels);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

constexpr std::array<double, 4> kDeUnsigned2 = {0.0, 0.325, 0.775, 1.0};
constexpr std::array<double, 8> kDeUnsigned3 = {0.0, 0.0325, 0.0775, 0.2125, 0.4375, 0.6625, 0.8875, 1.0};
constexpr std::array<double, 16> kDeUnsigned4 = {
    0.0,     0.00325, 0.00775, 0.02125, 0.04375, 0.06625, 0.08875, 0.15625,
    0.26875, 0.38125, 0.49375, 0.60625, 0.71875, 0.83125, 0.94375, 1.0};
constexpr std::array<double, 4> kDeSigned2 = {-0.55, 0.0, 0.55, 1.0};
constexpr std::array<double, 8> kDeSigned3 = {-0.775, -0.325, -0.055, 0.0, 0.055, 0.325, 0.775, 1.0};
constexpr std::array<double, 16> kDeSigned4 = {
    -0.8875, -0.6625, -0.4375, -0.2125, -0.0775, -0.0325, -0.0055, 0.0,
    0.0055,  0.0325,  0.0775,  0.2125,  0.4375,  0.6625,  0.8875,  1.0};

// Index = bits - 2.
constexpr std::array<double, 7> kSignedDeMedian = {0.275, 0.135, 0.067, 0.034, 0.017, 0.008, 0.004};

} // namespace

bool is_signed(SchemeKind kind) {
    return kind == SchemeKind::LinearSigned || kind == SchemeKind::DynamicExponentSigned;
}

bool is_log(SchemeKind kind) { return kind == SchemeKind::LogUnsigned; }

std::string_view to_string(SchemeKind kind) {
    switch (kind) {
    case SchemeKind::LinearUnsigned: return "linear-unsigned";
    case SchemeKind::LinearUnsignedNoZero: return "linear-unsigned-nozero";
    case SchemeKind::LinearSigned: return "linear-signed";
    case SchemeKind::DynamicExponentUnsigned: return "de-unsigned";
    case SchemeKind::DynamicExponentSigned: return "de-signed";
    case SchemeKind::LogUnsigned: return "log-unsigned";
    }
    return "unknown";
}

SchemeKind scheme_from_string(std::string_view name) {
    for (auto kind : {SchemeKind::LinearUnsigned, SchemeKind::LinearUnsignedNoZero, SchemeKind::LinearSigned,
                      SchemeKind::DynamicExponentUnsigned, SchemeKind::DynamicExponentSigned,
                      SchemeKind::LogUnsigned}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

LevelTable build_linear_levels(int bits, bool is_signed, bool exclude_zero) {
    check_bits(bits);
    if (is_signed && exclude_zero) {
        throw std::invalid_argument("the zero-free linear variant is unsigned only");
    }
    const std::size_t count = std::size_t{1} << bits;
    LevelTable table;
    table.bits = bits;
    table.levels.reserve(count);

    if (!is_signed) {
        table.scheme = exclude_zero ? SchemeKind::LinearUnsignedNoZero : SchemeKind::LinearUnsigned;
        for (std::size_t k = 0; k < count; ++k) {
            table.levels.push_back(exclude_zero ? static_cast<double>(k + 1) / static_cast<double>(count)
                                                : static_cast<double>(k) / static_cast<double>(count - 1));
        }
        return table;
    }

    // {0, +-k/n} has 2n + 1 = 2^b - 1 values; the spare code is a second zero.
    table.scheme = SchemeKind::LinearSigned;
    const int n = static_cast<int>(count / 2) - 1;
    for (int k = -n; k <= n; ++k) {
        table.levels.push_back(static_cast<double>(k) / static_cast<double>(n));
        if (k == 0) {
            table.levels.push_back(0.0);
        }
    }
    return table;
}

LevelTable build_de_levels(int bits, bool is_signed) {
    check_bits(bits);
    LevelTable table;
    table.scheme = is_signed ? SchemeKind::DynamicExponentSigned : SchemeKind::DynamicExponentUnsigned;
    table.bits = bits;

    if (!is_signed) {
        for (unsigned word = 0; word < (1U << bits); ++word) {
            table.levels.push_back(de_magnitude(word, bits, true));
        }
    } else {
        // Leading bit is the sign. The negative zero word is reassigned to +1,
        // which the magnitude layout cannot otherwise reach.
        const int width = bits - 1;
        for (unsigned word = 0; word < (1U << width); ++word) {
            const double magnitude = de_magnitude(word, width, false);
            table.levels.push_back(magnitude);
            table.levels.push_back(word == 0 ? 1.0 : -magnitude);
        }
    }
    std::sort(table.levels.begin(), table.levels.end());
    return table;
}

LevelTable build_log_levels(int bits, double base) {
    check_bits(bits);
    if (!(base > 0.0 && base < 1.0)) {
        throw std::invalid_argument("log base must lie in (0, 1)");
    }
    LevelTable table;
    table.scheme = SchemeKind::LogUnsigned;
    table.bits = bits;
    table.base = base;
    table.descending_order = true;
    const std::size_t count = std::size_t{1} << bits;
    table.levels.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        table.levels.push_back(std::pow(base, static_cast<double>(k)));
    }
    return table;
}

LevelTable build_levels(SchemeKind kind, int bits) {
    switch (kind) {
    case SchemeKind::LinearUnsigned: return build_linear_levels(bits, false, false);
    case SchemeKind::LinearUnsignedNoZero: return build_linear_levels(bits, false, true);
    case SchemeKind::LinearSigned: return build_linear_levels(bits, true, false);
    case SchemeKind::DynamicExponentUnsigned: return build_de_levels(bits, false);
    case SchemeKind::DynamicExponentSigned: return build_de_levels(bits, true);
    case SchemeKind::LogUnsigned: break;
    }
    throw std::invalid_argument("log tables depend on a base; use build_log_levels");
}

RadiusStats radius_stats(const LevelTable& table) {
    RadiusStats stats;
    const std::vector<double> distinct = distinct_ascending(table.levels);
    stats.per_level.reserve(table.size());
    for (std::size_t k = 0; k < table.size(); ++k) {
        stats.per_level.push_back(level_radius(table, k));
    }
    if (distinct.size() < 2) {
        return stats;
    }

    std::vector<double> half_gaps;
    half_gaps.reserve(distinct.size() - 1);
    for (std::size_t i = 1; i < distinct.size(); ++i) {
        half_gaps.push_back(0.5 * (distinct[i] - distinct[i - 1]));
    }
    std::sort(half_gaps.begin(), half_gaps.end());
    const std::size_t n = half_gaps.size();
    stats.r_min = half_gaps.front();
    stats.r_max = half_gaps.back();
    stats.r_median = (n % 2 == 1) ? half_gaps[n / 2] : 0.5 * (half_gaps[n / 2 - 1] + half_gaps[n / 2]);
    return stats;
}

double level_radius(const LevelTable& table, std::size_t code) {
    if (code >= table.size()) {
        throw std::out_of_range("code outside level table");
    }
    const double value = table.levels[code];
    double below = 0.0;
    double above = 0.0;
    bool has_below = false;
    bool has_above = false;
    for (double other : table.levels) {
        if (other < value && (!has_below || other > value - below)) {
            below = value - other;
            has_below = true;
        } else if (other > value && (!has_above || other < value + above)) {
            above = other - value;
            has_above = true;
        }
    }
    if (has_below && has_above) {
        return 0.5 * std::min(below, above);
    }
    if (has_below) {
        return 0.5 * below;
    }
    return has_above ? 0.5 * above : 0.0;
}

std::span<const double> golden_de_levels(int bits, bool is_signed) {
    switch (bits) {
    case 2: return is_signed ? std::span<const double>(kDeSigned2) : std::span<const double>(kDeUnsigned2);
    case 3: return is_signed ? std::span<const double>(kDeSigned3) : std::span<const double>(kDeUnsigned3);
    case 4: return is_signed ? std::span<const double>(kDeSigned4) : std::span<const double>(kDeUnsigned4);
    default: break;
    }
    throw std::invalid_argument("golden dynamic-exponent tables cover 2 to 4 bits");
}

double reference_signed_de_median(int bits) {
    check_bits(bits);
    return kSignedDeMedian[static_cast<std::size_t>(bits - kMinBits)];
}

} // namespace lowbit
