#include "doctest.h"

#include <cmath>

#include "lowbit/ema.hpp"

using namespace lowbit;

namespace {

EmaConfig nearest(SchemeKind scheme, int bits, double beta, std::size_t block = 128) {
    return EmaConfig::quantized(beta, BlockQuantization::make(scheme, bits, RoundingMode::Nearest, block));
}

} // namespace

TEST_CASE("ema_init") {
    Rng rng(1);
    SUBCASE("zeros read back as zeros") {
        const auto state = ema_init(std::vector<double>(300, 0.0), nearest(SchemeKind::LinearSigned, 4, 0.9), rng);
        CHECK(state.step == 0);
        CHECK(ema_read(state) == std::vector<double>(300, 0.0));
        for (float s : std::get<BlockQuantizedTensor>(state.storage).scales) {
            CHECK(s == 0.0F);
        }
    }
    SUBCASE("values on levels are exact") {
        const std::vector<double> on_grid = {0.0, 2.0 / 7.0, 4.0 / 7.0, 1.0};
        CHECK(ema_read(ema_init(on_grid, nearest(SchemeKind::LinearUnsigned, 3, 0.9), rng)) == on_grid);
    }
    SUBCASE("8-bit read-back error is within twice the radius") {
        std::vector<double> values(1000);
        for (auto& v : values) {
            v = rng.uniform(-5.0, 5.0);
        }
        const auto config = nearest(SchemeKind::LinearSigned, 8, 0.9);
        const auto state = ema_init(values, config, rng);
        const auto read = ema_read(state);
        const double r_max = radius_stats(config.quantization->table).r_max;
        const auto& scales = std::get<BlockQuantizedTensor>(state.storage).scales;
        for (std::size_t i = 0; i < values.size(); ++i) {
            CHECK(std::abs(read[i] - values[i]) <= 2.0 * r_max * scales[i / 128]);
        }
    }
    SUBCASE("unsigned schemes reject negative values") {
        CHECK_THROWS_AS(ema_init(std::vector<double>{0.1, -0.1}, nearest(SchemeKind::LinearUnsigned, 4, 0.9), rng),
                        std::invalid_argument);
    }
}

TEST_CASE("ema_step") {
    Rng rng(2);
    SUBCASE("beta = 0 stores the quantized signals") {
        const auto config = nearest(SchemeKind::DynamicExponentSigned, 4, 0.0);
        auto state = ema_init(std::vector<double>{0.3, -0.2, 0.9}, config, rng);
        const std::vector<double> signals = {-0.4, 0.1, 0.35};
        ema_step(state, signals, config, rng);
        const auto direct = ema_read(ema_init(signals, config, rng));
        CHECK(ema_read(state) == direct);
        CHECK(state.step == 1);
    }
    SUBCASE("signals equal to the state are a fixed point") {
        const auto config = nearest(SchemeKind::DynamicExponentUnsigned, 4, 0.9, 4);
        std::vector<double> values(10);
        for (auto& v : values) {
            v = rng.uniform(0.0, 3.0);
        }
        auto state = ema_init(values, config, rng);
        const auto before = ema_read(state);
        ema_step(state, before, config, rng);
        CHECK(ema_read(state) == before);
    }
    SUBCASE("full precision follows the recurrence") {
        const auto config = EmaConfig::full_precision(0.9);
        auto state = ema_init(std::vector<double>{1.0}, config, rng);
        ema_step(state, std::vector<double>{0.0}, config, rng);
        CHECK(ema_read(state)[0] == doctest::Approx(0.9));

        // Closed form over ten steps.
        const double beta = 0.8;
        const auto cfg = EmaConfig::full_precision(beta);
        std::vector<double> x0 = {0.3, -1.2};
        auto s = ema_init(x0, cfg, rng);
        std::vector<std::vector<double>> zs;
        for (int t = 0; t < 10; ++t) {
            zs.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
            ema_step(s, zs.back(), cfg, rng);
        }
        for (std::size_t i = 0; i < 2; ++i) {
            double expected = std::pow(beta, 10) * x0[i];
            for (int t = 0; t < 10; ++t) {
                expected += (1.0 - beta) * std::pow(beta, 9 - t) * zs[static_cast<std::size_t>(t)][i];
            }
            CHECK(ema_read(s)[i] == doctest::Approx(expected).epsilon(1e-13));
        }
    }
    SUBCASE("errors") {
        const auto config = nearest(SchemeKind::LinearUnsigned, 4, 0.9);
        auto state = ema_init(std::vector<double>{0.1, 0.2}, config, rng);
        CHECK_THROWS_AS(ema_step(state, std::vector<double>{0.1}, config, rng), std::invalid_argument);
        CHECK_THROWS_AS(ema_step(state, std::vector<double>{0.1, -0.3}, config, rng), std::invalid_argument);
        CHECK_THROWS_AS(ema_step(state, std::vector<double>{0.1, 0.2}, EmaConfig::full_precision(0.9), rng),
                        std::invalid_argument);
        CHECK_THROWS_AS(ema_step(state, std::vector<double>{0.1, NAN}, config, rng), std::invalid_argument);
    }
    SUBCASE("log scheme recomputes the quantile and bases every step") {
        const auto config =
            EmaConfig::quantized(0.5, BlockQuantization::make(SchemeKind::LogUnsigned, 2, RoundingMode::LogDither, 4));
        std::vector<double> values = {1.0, 0.5, 0.1, 0.01, 2.0, 0.2, 0.3, 0.4};
        auto state = ema_init(values, config, rng);
        const auto& tensor = std::get<BlockQuantizedTensor>(state.storage);
        CHECK(tensor.bases.size() == 2);
        // Tensor-global 0.1-quantile is the smallest magnitude, 0.01.
        CHECK(tensor.bases[0] == static_cast<float>(compute_log_base(0.01, 1.0, 2)));
        CHECK(tensor.bases[1] == static_cast<float>(compute_log_base(0.01, 2.0, 2)));
    }
}

TEST_CASE("swamping predicate") {
    const auto linear4 = build_linear_levels(4, false, false);
    // (1 - 0.97) * |1 - 7/15| = 0.016 <= 1/30.
    CHECK(swamping_holds(7, linear4, 0.97, 1.0, 1.0));
    // The nearest requantization indeed keeps code 7.
    const double blended = 0.97 * (7.0 / 15.0) + 0.03 * 1.0;
    CHECK(quantize_nearest(blended, 1.0, linear4) == 7);

    CHECK_FALSE(swamping_holds(7, linear4, 0.0, 1.0, 1.0));
    // Scale drift alone beyond the radius defeats the condition for every signal.
    for (double z : {0.0, 7.0 / 15.0, 1.0}) {
        CHECK_FALSE(swamping_holds(7, linear4, 0.999, z, 1.04));
    }
    CHECK_THROWS_AS(swamping_holds(0, linear4, 0.9, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("swamping predicate is sufficient") {
    // Whenever the predicate holds, nearest requantization keeps the code.
    Rng rng(4);
    for (const auto& table : {build_linear_levels(3, false, false), build_de_levels(4, false),
                              build_de_levels(3, true), build_log_levels(3, 0.5)}) {
        for (int trial = 0; trial < 5000; ++trial) {
            const auto code = static_cast<Code>(rng.below(table.size()));
            const double beta = rng.uniform(0.8, 0.9999);
            const double z = rng.uniform(table.scheme == SchemeKind::DynamicExponentSigned ? -1.0 : 0.0, 1.0);
            const double ratio = rng.uniform(0.99, 1.01);
            if (!swamping_holds(code, table, beta, z, ratio)) {
                continue;
            }
            // delta_new = 1, delta_old = ratio.
            const double blended = beta * table.levels[code] * ratio + (1.0 - beta) * z;
            CHECK(table.levels[quantize_nearest(blended, 1.0, table)] == table.levels[code]);
        }
    }
}

TEST_CASE("swamping thresholds") {
    const auto threshold = [](const LevelTable& t, bool s, RadiusChoice c) {
        return swamping_beta_threshold(radius_stats(t), s, c);
    };
    CHECK(threshold(build_linear_levels(4, false, false), false, RadiusChoice::Min) == doctest::Approx(0.967).epsilon(0.001));
    CHECK(threshold(build_linear_levels(2, false, false), false, RadiusChoice::Min) == doctest::Approx(0.833).epsilon(0.001));
    CHECK(std::abs(threshold(build_de_levels(2, true), true, RadiusChoice::Median) - 0.863) <= 0.002);
}

TEST_CASE("swamped states never move under nearest rounding") {
    // One block holding an anchor at delta = 1 (fed delta, so the scale stays
    // fixed) and every level, each receiving every signal on a 1000-point grid.
    Rng rng(0);
    for (auto [scheme, bits] : std::vector<std::pair<SchemeKind, int>>{{SchemeKind::LinearUnsigned, 2},
                                                                      {SchemeKind::LinearUnsigned, 4},
                                                                      {SchemeKind::DynamicExponentUnsigned, 3},
                                                                      {SchemeKind::DynamicExponentSigned, 3}}) {
        const auto table = build_levels(scheme, bits);
        const bool signed_scheme = is_signed(scheme);
        const double threshold = swamping_beta_threshold(radius_stats(table), signed_scheme, RadiusChoice::Min);
        const double beta = threshold + std::min(0.005, 0.5 * (1.0 - threshold));
        std::vector<double> values{1.0};
        std::vector<double> signals{1.0};
        for (double y : table.levels) {
            for (int i = 0; i < 1000; ++i) {
                values.push_back(y);
                const double z = i / 999.0;
                signals.push_back(signed_scheme ? 2.0 * z - 1.0 : z);
            }
        }
        const auto config = EmaConfig::quantized(
            beta, BlockQuantization::make(scheme, bits, RoundingMode::Nearest, values.size()));
        auto state = ema_init(values, config, rng);
        const auto before = ema_read(state);
        ema_step(state, signals, config, rng);
        CHECK(ema_read(state) == before);
    }
}
