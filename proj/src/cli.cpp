#include "lowbit/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "lowbit/ema.hpp"
#include "lowbit/harness.hpp"
#include "lowbit/levels.hpp"
#include "lowbit/optimizers.hpp"
#include "lowbit/packed_state.hpp"
#include "lowbit/quantizer.hpp"
#include "lowbit/report.hpp"
#include "lowbit/repro.hpp"
#include "lowbit/toy_models.hpp"

namespace lowbit {

namespace {

// Flag combinations that parse but make no sense; reported like parse errors.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OutputOptions {
    std::string format = "json";
    std::string directory;
};

void add_output_options(CLI::App* sub, OutputOptions& options) {
    sub->add_option("--format", options.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    sub->add_option("--out", options.directory,
                    std::string("Also write {experiment}-{seed}.{json,csv} into this directory (default: $") +
                        kOutputDirEnv + ")");
}

int emit(ExperimentReport report, const std::string& command, const OutputOptions& options, std::ostream& out,
         std::ostream& err) {
    Json config;
    config["command"] = command;
    for (const auto& [key, value] : report.config.items()) {
        config[key] = value;
    }
    report.config = std::move(config);
    const OutputFormat format = format_from_string(options.format);
    out << (format == OutputFormat::Json ? report.to_json().dump(2) + "\n" : report.to_csv());
    std::string directory = options.directory;
    if (directory.empty()) {
        if (const char* env = std::getenv(kOutputDirEnv)) {
            directory = env;
        }
    }
    if (!directory.empty()) {
        err << "wrote " << write_report(report, directory, format).string() << "\n";
    }
    return kExitOk;
}

/// Short family names combine with --signed; full names stand alone.
SchemeKind resolve_scheme(const std::string& name, bool want_signed) {
    if (name == "linear") {
        return want_signed ? SchemeKind::LinearSigned : SchemeKind::LinearUnsigned;
    }
    if (name == "de" || name == "dynamic-exponent") {
        return want_signed ? SchemeKind::DynamicExponentSigned : SchemeKind::DynamicExponentUnsigned;
    }
    if (name == "log") {
        if (want_signed) {
            throw UsageError("the log scheme is unsigned only; drop --signed");
        }
        return SchemeKind::LogUnsigned;
    }
    if (name == "linear-nozero") {
        if (want_signed) {
            throw UsageError("linear-nozero has no signed form; drop --signed");
        }
        return SchemeKind::LinearUnsignedNoZero;
    }
    SchemeKind kind;
    try {
        kind = scheme_from_string(name);
    } catch (const std::invalid_argument&) {
        throw UsageError("unknown scheme '" + name +
                         "'; use linear, de, log, linear-nozero or a full name such as de-signed");
    }
    if (want_signed && !is_signed(kind)) {
        throw UsageError("--signed conflicts with the unsigned scheme '" + name + "'");
    }
    return kind;
}

RoundingMode resolve_rounding(const std::string& name, SchemeKind scheme) {
    if (name == "auto") {
        return is_log(scheme) ? RoundingMode::LogDither : RoundingMode::Nearest;
    }
    try {
        return rounding_from_string(name);
    } catch (const std::invalid_argument&) {
        throw UsageError("unknown rounding '" + name + "'; use auto, nearest, stochastic or dither");
    }
}

/// "full-precision" or scheme:bits[:rounding[:block[:p]]].
std::optional<BlockQuantization> parse_state_spec(const std::string& text) {
    if (text == "full-precision" || text == "fp") {
        return std::nullopt;
    }
    std::vector<std::string> parts;
    std::stringstream stream(text);
    for (std::string part; std::getline(stream, part, ':');) {
        parts.push_back(part);
    }
    if (parts.size() < 2 || parts.size() > 5) {
        throw UsageError("state spec '" + text + "' must look like scheme:bits[:rounding[:block[:p]]]");
    }
    const SchemeKind scheme = resolve_scheme(parts[0], false);
    const auto number = [&](std::size_t i, auto parse) {
        try {
            std::size_t used = 0;
            const auto value = parse(parts[i], &used);
            if (used != parts[i].size()) {
                throw std::invalid_argument(parts[i]);
            }
            return value;
        } catch (const std::logic_error&) {
            throw UsageError("state spec '" + text + "' has a malformed number '" + parts[i] + "'");
        }
    };
    const auto to_int = [](const std::string& t, std::size_t* used) { return std::stoi(t, used); };
    const auto to_size = [](const std::string& t, std::size_t* used) { return std::stoul(t, used); };
    const auto to_real = [](const std::string& t, std::size_t* used) { return std::stod(t, used); };
    const int bits = number(1, to_int);
    const RoundingMode mode = resolve_rounding(parts.size() > 2 ? parts[2] : "auto", scheme);
    const std::size_t block = parts.size() > 3 ? number(3, to_size) : kDefaultBlockSize;
    const double p = parts.size() > 4 ? number(4, to_real) : kDefaultQuantile;
    return BlockQuantization::make(scheme, bits, mode, block, p);
}

LevelTable resolve_table(SchemeKind scheme, int bits, std::optional<double> base) {
    if (is_log(scheme)) {
        if (!base) {
            throw UsageError("the log scheme needs --base");
        }
        return build_log_levels(bits, *base);
    }
    if (base) {
        throw UsageError("--base only applies to the log scheme");
    }
    return build_levels(scheme, bits);
}

ExperimentReport simple_report(const std::string& name) {
    ExperimentReport report;
    report.name = name;
    return report;
}

// --- subcommands -------------------------------------------------------------

struct RadiiArgs {
    std::string scheme;
    int bits = 0;
    bool is_signed = false;
    std::optional<double> base;
    OutputOptions output;
};

int cmd_radii(const RadiiArgs& a, std::ostream& out, std::ostream& err) {
    const SchemeKind scheme = resolve_scheme(a.scheme, a.is_signed);
    const LevelTable table = resolve_table(scheme, a.bits, a.base);
    const RadiusStats stats = radius_stats(table);
    auto report = simple_report("radii");
    report.config["scheme"] = std::string(to_string(scheme));
    report.config["bits"] = a.bits;
    if (a.base) {
        report.config["base"] = *a.base;
    }
    report.columns = {"r_min", "r_median", "r_max"};
    Json row;
    row["r_min"] = stats.r_min;
    row["r_median"] = stats.r_median;
    row["r_max"] = stats.r_max;
    report.rows.push_back(row);
    report.metrics = row;
    report.metrics["levels"] = table.levels;
    report.metrics["per_level_radius"] = stats.per_level;
    return emit(std::move(report), "radii", a.output, out, err);
}

struct BetaPrimeArgs {
    double beta = 0.0;
    int from = 0;
    int to = 0;
    std::string radii = "reference";
    OutputOptions output;
};

int cmd_beta_prime(const BetaPrimeArgs& a, std::ostream& out, std::ostream& err) {
    double value = 0.0;
    double r_from = 0.0;
    double r_to = 0.0;
    if (a.radii == "reference") {
        value = beta_prime(a.beta, a.from, a.to);
        r_from = reference_signed_de_median(a.from);
        r_to = reference_signed_de_median(a.to);
    } else {
        const auto from = radius_stats(build_de_levels(a.from, true));
        const auto to = radius_stats(build_de_levels(a.to, true));
        value = beta_prime(a.beta, from, to);
        r_from = from.r_median;
        r_to = to.r_median;
    }
    auto report = simple_report("beta-prime");
    report.config["beta"] = a.beta;
    report.config["from_bits"] = a.from;
    report.config["to_bits"] = a.to;
    report.config["radii"] = a.radii;
    report.columns = {"beta_prime", "r_median_from", "r_median_to"};
    Json row;
    row["beta_prime"] = value;
    row["r_median_from"] = r_from;
    row["r_median_to"] = r_to;
    report.rows.push_back(row);
    report.metrics = row;
    return emit(std::move(report), "beta-prime", a.output, out, err);
}

struct SwampArgs {
    std::string scheme;
    int bits = 0;
    bool is_signed = false;
    std::string radius = "min";
    std::optional<double> base;
    std::optional<unsigned> code;
    std::optional<double> beta;
    std::optional<double> z;
    double ratio = 1.0;
    OutputOptions output;
};

int cmd_swamp(const SwampArgs& a, std::ostream& out, std::ostream& err) {
    const SchemeKind scheme = resolve_scheme(a.scheme, a.is_signed);
    const LevelTable table = resolve_table(scheme, a.bits, a.base);
    const RadiusStats stats = radius_stats(table);
    const RadiusChoice choice = a.radius == "min" ? RadiusChoice::Min : RadiusChoice::Median;
    if (a.code.has_value() != (a.beta.has_value() && a.z.has_value()) || (!a.code && (a.beta || a.z))) {
        throw UsageError("--code, --beta and --z go together");
    }
    auto report = simple_report("swamp");
    report.config["scheme"] = std::string(to_string(scheme));
    report.config["bits"] = a.bits;
    report.config["radius"] = a.radius;
    if (a.base) {
        report.config["base"] = *a.base;
    }
    Json row;
    row["radius_value"] = choice == RadiusChoice::Min ? stats.r_min : stats.r_median;
    row["threshold"] = swamping_beta_threshold(stats, is_signed(scheme), choice);
    report.columns = {"radius_value", "threshold"};
    if (a.code) {
        report.config["code"] = *a.code;
        report.config["beta"] = *a.beta;
        report.config["z_over_scale"] = *a.z;
        report.config["scale_ratio"] = a.ratio;
        row["swamped"] = swamping_holds(*a.code, table, *a.beta, *a.z, a.ratio);
        report.columns.push_back("swamped");
    }
    report.rows.push_back(row);
    report.metrics = row;
    return emit(std::move(report), "swamp", a.output, out, err);
}

struct EmaSimArgs {
    std::size_t n = 1000;
    double beta = 0.999;
    std::size_t iters = 100;
    std::uint64_t seed = 1;
    std::string scheme = "log";
    int bits = 2;
    bool is_signed = false;
    std::string rounding = "auto";
    std::size_t block = 0;
    double p = kDefaultQuantile;
    OutputOptions output;
};

int cmd_ema_sim(const EmaSimArgs& a, std::ostream& out, std::ostream& err) {
    std::optional<BlockQuantization> q;
    if (a.scheme != "full-precision") {
        const SchemeKind scheme = resolve_scheme(a.scheme, a.is_signed);
        q = BlockQuantization::make(scheme, a.bits, resolve_rounding(a.rounding, scheme), a.block == 0 ? a.n : a.block,
                                    a.p);
    }
    return emit(uniform_signal_experiment(a.n, a.beta, q, a.iters, a.seed), "ema-sim", a.output, out, err);
}

struct DecayArgs {
    int c = 0;
    int s = 0;
    std::size_t trials = 10000;
    std::uint64_t seed = 1;
    double beta = 0.9;
    OutputOptions output;
};

int cmd_decay(const DecayArgs& a, std::ostream& out, std::ostream& err) {
    return emit(decay_report(a.c, a.s, a.trials, a.seed, a.beta), "decay", a.output, out, err);
}

struct TrackArgs {
    SignalGenerator generator;
    std::vector<std::string> arms = {"full-precision", "log-unsigned:2:dither", "linear-unsigned:2:nearest",
                                     "de-unsigned:4:nearest"};
    std::vector<std::size_t> blocks = {128, 2048};
    double beta = 0.99;
    std::size_t steps = 300;
    std::uint64_t seed = 1;
    OutputOptions output;
};

int cmd_track(const TrackArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<TrackingArm> arms;
    for (const auto& spec : a.arms) {
        arms.push_back({spec, parse_state_spec(spec)});
    }
    return emit(tracking_benchmark(a.generator, arms, a.blocks, a.beta, a.steps, a.seed), "track", a.output, out,
                err);
}

struct TrainArgs {
    std::string model = "logistic";
    std::size_t examples = 512;
    std::size_t features = 10;
    std::size_t hidden = 8;
    double margin = 0.1;
    double noise = 0.1;
    std::optional<std::uint64_t> data_seed;
    std::string optimizer = "adam";
    std::string preset = "none";
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-3;
    std::optional<std::string> m_state;
    std::optional<std::string> v_state;
    std::size_t steps = 5000;
    std::uint64_t seed = 1;
    std::size_t batch = kDefaultBatchSize;
    std::string schedule = "constant";
    std::vector<double> sweep;
    bool beta1_given = false;
    OutputOptions output;
};

ToyModel build_model(const TrainArgs& a) {
    const std::uint64_t data_seed = a.data_seed.value_or(a.seed);
    const ModelKind kind = model_from_string(a.model);
    Rng rng(data_seed);
    switch (kind) {
    case ModelKind::LogisticRegression: return make_logistic_task(data_seed, a.examples, a.features, a.margin);
    case ModelKind::LinearRegression:
        return ToyModel(kind, make_regression_data(a.examples, a.features, a.noise, rng));
    case ModelKind::Mlp: return ToyModel(kind, make_nonlinear_data(a.examples, a.features, rng), a.hidden);
    }
    throw std::logic_error("unhandled model kind");
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    OptimizerSpec spec;
    spec.family = family_from_string(a.optimizer);
    spec.lr = a.lr;
    spec.beta1 = a.beta1;
    spec.beta2 = a.beta2;
    spec.epsilon = a.epsilon;
    spec.weight_decay = a.weight_decay;
    if (a.preset != "none") {
        spec = apply_preset(preset_from_string(a.preset), spec);
        if (a.beta1_given) {
            spec.beta1 = a.beta1;
        }
    }
    if (a.m_state) {
        spec.signed_state = parse_state_spec(*a.m_state);
    }
    if (a.v_state) {
        spec.unsigned_state = parse_state_spec(*a.v_state);
    }
    validate(spec);
    TrainOptions options;
    options.batch_size = a.batch;
    options.schedule = schedule_from_string(a.schedule);
    const ToyModel model = build_model(a);
    ExperimentReport report = a.sweep.empty() ? train_report(model, spec, a.steps, a.seed, options)
                                              : beta1_sweep(model, spec, a.sweep, a.steps, a.seed, options);
    report.config["preset"] = a.preset;
    report.config["data_seed"] = a.data_seed.value_or(a.seed);
    return emit(std::move(report), "train", a.output, out, err);
}

struct PackInfoArgs {
    std::optional<std::string> input;
    std::string scheme = "log";
    int bits = 2;
    bool is_signed = false;
    std::size_t length = 4096;
    std::size_t block = kDefaultBlockSize;
    std::optional<std::string> write;
    OutputOptions output;
};

int cmd_pack_info(const PackInfoArgs& a, std::ostream& out, std::ostream& err) {
    BlockQuantizedTensor tensor;
    auto report = simple_report("pack-info");
    if (a.input) {
        std::ifstream file(*a.input, std::ios::binary);
        if (!file) {
            throw std::runtime_error("cannot open " + *a.input);
        }
        const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
        tensor = deserialize(bytes);
        report.config["input"] = *a.input;
    } else {
        const SchemeKind scheme = resolve_scheme(a.scheme, a.is_signed);
        tensor = zero_tensor(a.length, BlockQuantization::make(scheme, a.bits, resolve_rounding("auto", scheme), a.block));
    }
    report.config["scheme"] = std::string(to_string(tensor.scheme));
    report.config["bits"] = tensor.bits;
    report.config["block_size"] = tensor.block_size;
    report.config["length"] = tensor.length;
    if (a.write) {
        const auto bytes = serialize(tensor);
        write_atomically(*a.write, std::string(bytes.begin(), bytes.end()));
        report.config["written_to"] = *a.write;
    }

    const std::size_t total = footprint_bytes(tensor);
    Json row;
    row["storage_bits"] = storage_bits(tensor.bits);
    row["blocks"] = tensor.block_count();
    row["header_bytes"] = kHeaderBytes;
    row["code_bytes"] = tensor.packed.buffer.size();
    row["scale_bytes"] = 4 * tensor.scales.size();
    row["base_bytes"] = 4 * tensor.bases.size();
    row["total_bytes"] = total;
    row["bits_per_entry"] =
        tensor.length ? Json(8.0 * static_cast<double>(total) / static_cast<double>(tensor.length)) : Json();
    for (const auto& [key, _] : row.items()) {
        report.columns.push_back(key);
    }
    report.rows.push_back(row);
    report.metrics = row;
    return emit(std::move(report), "pack-info", a.output, out, err);
}

struct ReproArgs {
    std::vector<int> only;
    OutputOptions output;
};

int cmd_repro(const ReproArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<int> ids = a.only;
    if (ids.empty()) {
        for (int id = 1; id <= kCriterionCount; ++id) {
            ids.push_back(id);
        }
    }
    auto report = simple_report("repro");
    report.config["criteria"] = ids;
    report.columns = {"id", "title", "passed", "seconds", "time_limit", "detail"};
    int failures = 0;
    for (int id : ids) {
        const CriterionResult result = run_criterion(id);
        err << summary_line(result) << "\n";
        Json row = to_json(result);
        row.erase("data");
        row.erase("checks_passed");
        report.rows.push_back(std::move(row));
        failures += result.passed() ? 0 : 1;
    }
    report.metrics["passed"] = static_cast<int>(ids.size()) - failures;
    report.metrics["failed"] = failures;
    emit(std::move(report), "repro", a.output, out, err);
    return failures == 0 ? kExitOk : kExitFailure;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Low-bit quantized optimizer states: level tables, swamping predicates, EMA simulations, "
                 "toy training and the acceptance suite.",
                 "lowbit"};
    app.require_subcommand(1);
    app.fallthrough(false);

    RadiiArgs radii;
    auto* radii_cmd = app.add_subcommand("radii", "Radius statistics (r_min, r_median, r_max) of a level table");
    radii_cmd->add_option("--scheme", radii.scheme, "linear, de, log, linear-nozero or a full scheme name")->required();
    radii_cmd->add_option("--bits", radii.bits, "Code width")->required()->check(CLI::Range(kMinBits, kMaxBits));
    radii_cmd->add_flag("--signed", radii.is_signed, "Signed variant of linear / de");
    radii_cmd->add_option("--base", radii.base, "Log base alpha in (0, 1) (log scheme only)");
    add_output_options(radii_cmd, radii.output);

    BetaPrimeArgs bp;
    auto* bp_cmd = app.add_subcommand("beta-prime", "Reduced first-moment momentum for fewer bits");
    bp_cmd->add_option("--beta", bp.beta, "Momentum of the reference state")->required();
    bp_cmd->add_option("--from", bp.from, "Bits of the reference state")->required()->check(CLI::Range(2, 8));
    bp_cmd->add_option("--to", bp.to, "Bits of the low-bit state")->required()->check(CLI::Range(2, 8));
    bp_cmd->add_option("--radii", bp.radii, "Median radii: published reference values or computed from the tables")
        ->check(CLI::IsMember({"reference", "computed"}))
        ->capture_default_str();
    add_output_options(bp_cmd, bp.output);

    SwampArgs swamp;
    auto* swamp_cmd = app.add_subcommand("swamp", "Momentum threshold above which signals are swamped");
    swamp_cmd->add_option("--scheme", swamp.scheme, "linear, de, log, linear-nozero or a full scheme name")->required();
    swamp_cmd->add_option("--bits", swamp.bits, "Code width")->required()->check(CLI::Range(kMinBits, kMaxBits));
    swamp_cmd->add_flag("--signed", swamp.is_signed, "Signed variant of linear / de");
    swamp_cmd->add_option("--radius", swamp.radius, "Radius statistic: min covers every level, median about half")
        ->check(CLI::IsMember({"min", "median"}))
        ->capture_default_str();
    swamp_cmd->add_option("--base", swamp.base, "Log base alpha in (0, 1) (log scheme only)");
    swamp_cmd->add_option("--code", swamp.code, "Also test one code for swamping (needs --beta and --z)");
    swamp_cmd->add_option("--beta", swamp.beta, "Momentum for the --code test");
    swamp_cmd->add_option("--z", swamp.z, "Signal divided by the new scale for the --code test");
    swamp_cmd->add_option("--ratio", swamp.ratio, "Old scale / new scale for the --code test")->capture_default_str();
    add_output_options(swamp_cmd, swamp.output);

    EmaSimArgs sim;
    auto* sim_cmd = app.add_subcommand("ema-sim", "EMA of i.i.d. U[0,1] signals from a U[0,1] initial state");
    sim_cmd->add_option("--n", sim.n, "Tensor length")->capture_default_str()->check(CLI::PositiveNumber);
    sim_cmd->add_option("--beta", sim.beta, "EMA momentum")->capture_default_str();
    sim_cmd->add_option("--iters", sim.iters, "Iterations")->capture_default_str()->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    sim_cmd->add_option("--scheme", sim.scheme, "Scheme name or full-precision")->capture_default_str();
    sim_cmd->add_option("--bits", sim.bits, "Code width")->capture_default_str();
    sim_cmd->add_flag("--signed", sim.is_signed, "Signed variant of linear / de");
    sim_cmd->add_option("--rounding", sim.rounding, "auto, nearest, stochastic or dither")->capture_default_str();
    sim_cmd->add_option("--block", sim.block, "Block size; 0 quantizes the whole tensor as one block")
        ->capture_default_str();
    sim_cmd->add_option("--p", sim.p, "Quantile for the log base")->capture_default_str();
    add_output_options(sim_cmd, sim.output);

    DecayArgs decay;
    auto* decay_cmd = app.add_subcommand("decay", "Zero-signal decay of a dithered log code with base beta^c");
    decay_cmd->add_option("--c", decay.c, "Base exponent: alpha = beta^c")->required()->check(CLI::PositiveNumber);
    decay_cmd->add_option("--s", decay.s, "Levels to descend")->required()->check(CLI::Range(1, 254));
    decay_cmd->add_option("--trials", decay.trials, "Trials")->capture_default_str()->check(CLI::PositiveNumber);
    decay_cmd->add_option("--seed", decay.seed, "Random seed")->capture_default_str();
    decay_cmd->add_option("--beta", decay.beta, "Momentum")->capture_default_str();
    add_output_options(decay_cmd, decay.output);

    TrackArgs track;
    auto* track_cmd = app.add_subcommand("track", "Track a drifting second-moment EMA against full precision");
    track_cmd->add_option("--scheme", track.arms, "State specs: full-precision or scheme:bits[:rounding[:block[:p]]]")
        ->capture_default_str();
    track_cmd->add_option("--blocks", track.blocks, "Block sizes")->delimiter(',')->capture_default_str();
    track_cmd->add_option("--beta", track.beta, "EMA momentum")->capture_default_str();
    track_cmd->add_option("--steps", track.steps, "Steps")->capture_default_str()->check(CLI::PositiveNumber);
    track_cmd->add_option("--seed", track.seed, "Random seed")->capture_default_str();
    track_cmd->add_option("--length", track.generator.length, "Tensor length")->capture_default_str();
    track_cmd->add_option("--spread", track.generator.spread, "Std dev of per-entry log offsets")->capture_default_str();
    track_cmd->add_option("--noise", track.generator.noise, "Std dev of per-step log noise")->capture_default_str();
    track_cmd->add_option("--drift", track.generator.drift_amplitude, "Amplitude of the shared log drift")
        ->capture_default_str();
    track_cmd->add_option("--period", track.generator.drift_period, "Drift period in steps")->capture_default_str();
    add_output_options(track_cmd, track.output);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a toy model with full-precision or low-bit optimizer states");
    train_cmd->add_option("--model", train.model, "linear, logistic or mlp")
        ->check(CLI::IsMember({"linear", "logistic", "mlp"}))
        ->capture_default_str();
    train_cmd->add_option("--examples", train.examples, "Dataset size")->capture_default_str();
    train_cmd->add_option("--features", train.features, "Input features")->capture_default_str();
    train_cmd->add_option("--hidden", train.hidden, "Hidden units (mlp)")->capture_default_str();
    train_cmd->add_option("--margin", train.margin, "Class margin (logistic)")->capture_default_str();
    train_cmd->add_option("--noise", train.noise, "Target noise (linear)")->capture_default_str();
    train_cmd->add_option("--data-seed", train.data_seed, "Dataset seed (default: --seed)");
    train_cmd->add_option("--optimizer", train.optimizer, "adam, adamw or adabelief")
        ->check(CLI::IsMember({"adam", "adamw", "adabelief"}))
        ->capture_default_str();
    train_cmd->add_option("--preset", train.preset, "Low-bit preset")
        ->check(CLI::IsMember({"none", "solo_4_2_finetune", "solo_4_2_scratch", "solo_2_finetune", "solo_2_scratch"}))
        ->capture_default_str();
    train_cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
    auto* beta1_opt = train_cmd->add_option("--beta1", train.beta1, "First-moment momentum (overrides the preset)")
                          ->capture_default_str();
    train_cmd->add_option("--beta2", train.beta2, "Second-moment momentum")->capture_default_str();
    train_cmd->add_option("--eps", train.epsilon, "Epsilon added after the square root")->capture_default_str();
    train_cmd->add_option("--wd", train.weight_decay, "Weight decay (L2 for adam, decoupled otherwise)")
        ->capture_default_str();
    train_cmd->add_option("--m-state", train.m_state, "First-moment state spec (overrides the preset)");
    train_cmd->add_option("--v-state", train.v_state, "Second-moment state spec (overrides the preset)");
    train_cmd->add_option("--steps", train.steps, "Optimizer steps")->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--batch", train.batch, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--schedule", train.schedule, "Learning-rate schedule")
        ->check(CLI::IsMember({"constant", "cosine"}))
        ->capture_default_str();
    train_cmd->add_option("--sweep-beta1", train.sweep, "Run a beta1 sweep over these values instead")
        ->delimiter(',');
    add_output_options(train_cmd, train.output);

    PackInfoArgs pack;
    auto* pack_cmd = app.add_subcommand("pack-info", "Footprint accounting of a packed state tensor");
    auto* input_opt = pack_cmd->add_option("--input", pack.input, "Read a serialized tensor instead of describing one");
    pack_cmd->add_option("--scheme", pack.scheme, "Scheme of the described tensor")->capture_default_str()->excludes(input_opt);
    pack_cmd->add_option("--bits", pack.bits, "Code width")->capture_default_str()->excludes(input_opt);
    pack_cmd->add_flag("--signed", pack.is_signed, "Signed variant of linear / de")->excludes(input_opt);
    pack_cmd->add_option("--length", pack.length, "Entries")->capture_default_str()->excludes(input_opt);
    pack_cmd->add_option("--block", pack.block, "Block size")->capture_default_str()->excludes(input_opt);
    pack_cmd->add_option("--write", pack.write, "Also write the (zero) tensor's container to this file");
    add_output_options(pack_cmd, pack.output);

    ReproArgs repro;
    auto* repro_cmd = app.add_subcommand("repro", "Run the acceptance suite and write a summary table");
    repro_cmd->add_option("--only", repro.only, "Criteria to run (default: all)")
        ->delimiter(',')
        ->check(CLI::Range(1, kCriterionCount));
    add_output_options(repro_cmd, repro.output);

    if (!args.empty() && !args.front().starts_with("-") && app.get_subcommand_no_throw(args.front()) == nullptr) {
        err << "error: unknown subcommand '" << args.front()
            << "'; expected radii, beta-prime, swamp, ema-sim, decay, track, train, pack-info or repro\n";
        return kExitUsage;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nrun 'lowbit --help' for usage\n";
        return kExitUsage;
    }
    train.beta1_given = beta1_opt->count() > 0;

    try {
        if (radii_cmd->parsed()) return cmd_radii(radii, out, err);
        if (bp_cmd->parsed()) return cmd_beta_prime(bp, out, err);
        if (swamp_cmd->parsed()) return cmd_swamp(swamp, out, err);
        if (sim_cmd->parsed()) return cmd_ema_sim(sim, out, err);
        if (decay_cmd->parsed()) return cmd_decay(decay, out, err);
        if (track_cmd->parsed()) return cmd_track(track, out, err);
        if (train_cmd->parsed()) return cmd_train(train, out, err);
        if (pack_cmd->parsed()) return cmd_pack_info(pack, out, err);
        if (repro_cmd->parsed()) return cmd_repro(repro, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    err << "error: no subcommand given\n";
    return kExitUsage;
}

} // namespace lowbit
