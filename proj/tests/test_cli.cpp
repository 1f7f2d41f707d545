#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lowbit/cli.hpp"
#include "lowbit/report.hpp"

using namespace lowbit;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

Json run_json(const std::vector<std::string>& args) {
    const Run r = run(args);
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    return Json::parse(r.out);
}

// Value types with the same nesting; arrays are described by their first element.
Json shape(const Json& value) {
    if (value.is_object()) {
        Json out = Json::object();
        for (const auto& [key, child] : value.items()) {
            out[key] = shape(child);
        }
        return out;
    }
    if (value.is_array()) {
        Json out = Json::array();
        if (!value.empty()) {
            out.push_back(shape(value.front()));
        }
        return out;
    }
    if (value.is_number()) {
        return "number";
    }
    if (value.is_string()) {
        return "string";
    }
    if (value.is_boolean()) {
        return "boolean";
    }
    return "null";
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    std::ostringstream text;
    text << file.rdbuf();
    return text.str();
}

// Small, fast invocation of every subcommand.
const std::map<std::string, std::vector<std::string>> kSamples = {
    {"radii", {"radii", "--scheme", "linear", "--bits", "2"}},
    {"beta-prime", {"beta-prime", "--beta", "0.9", "--from", "5", "--to", "4"}},
    {"swamp",
     {"swamp", "--scheme", "de", "--signed", "--bits", "3", "--radius", "median", "--code", "2", "--beta", "0.95",
      "--z", "0.4"}},
    {"ema-sim", {"ema-sim", "--n", "100", "--iters", "5", "--seed", "2"}},
    {"decay", {"decay", "--c", "2", "--s", "3", "--trials", "200", "--seed", "7"}},
    {"track", {"track", "--steps", "3", "--length", "64", "--blocks", "16,64"}},
    {"train", {"train", "--steps", "20", "--preset", "solo_4_2_scratch"}},
    {"pack-info", {"pack-info", "--scheme", "de", "--signed", "--bits", "4", "--length", "300"}},
    {"repro", {"repro", "--only", "2"}},
};

} // namespace

TEST_CASE("published values through the command line") {
    const Json bp = run_json({"beta-prime", "--beta", "0.9", "--from", "5", "--to", "4"});
    CHECK(std::abs(bp["metrics"]["beta_prime"].get<double>() - 0.820) <= 0.005);

    const Json radii = run_json({"radii", "--scheme", "linear", "--bits", "2"});
    for (const char* key : {"r_min", "r_median", "r_max"}) {
        CHECK(std::abs(radii["metrics"][key].get<double>() - 0.167) <= 0.001);
    }

    const Json decay = run_json({"decay", "--c", "2", "--s", "3", "--trials", "10000", "--seed", "7"});
    CHECK(std::abs(decay["metrics"]["mean"].get<double>() - 6.0) <= 0.3);

    const Json swamp = run_json({"swamp", "--scheme", "linear", "--bits", "4"});
    CHECK(std::abs(swamp["metrics"]["threshold"].get<double>() - 0.967) <= 0.002);
}

TEST_CASE("every run echoes its resolved config") {
    const Json sim = run_json({"ema-sim", "--n", "50", "--iters", "3"});
    CHECK(sim["config"]["command"] == "ema-sim");
    CHECK(sim["config"]["quantization"]["scheme"] == "log-unsigned");
    CHECK(sim["config"]["quantization"]["rounding"] == "dither");
    CHECK(sim["config"]["quantization"]["block_size"] == 50);

    const Json train = run_json({"train", "--steps", "5", "--preset", "solo_2_scratch", "--beta1", "0.4"});
    CHECK(train["config"]["optimizer"]["beta1"] == 0.4);
    CHECK(train["config"]["optimizer"]["first_moment"]["scheme"] == "de-signed");
    CHECK(train["config"]["optimizer"]["second_moment"]["bits"] == 2);
}

TEST_CASE("output is deterministic given the seed") {
    for (const auto& [name, args] : kSamples) {
        if (name == "repro") {
            continue; // carries wall-clock timings
        }
        CAPTURE(name);
        CHECK(run(args).out == run(args).out);
    }
}

TEST_CASE("golden JSON schema per subcommand") {
    const std::filesystem::path golden_dir = LOWBIT_GOLDEN_DIR;
    const bool update = std::getenv("LOWBIT_UPDATE_GOLDEN") != nullptr;
    for (const auto& [name, args] : kSamples) {
        CAPTURE(name);
        const std::string actual = shape(run_json(args)).dump(2) + "\n";
        const auto path = golden_dir / (name + ".schema.json");
        if (update) {
            write_atomically(path, actual);
            continue;
        }
        REQUIRE_MESSAGE(std::filesystem::exists(path), "missing golden file " << path);
        CHECK(read_file(path) == actual);
    }
}

TEST_CASE("csv output") {
    const Run r = run({"radii", "--scheme", "de", "--bits", "2", "--format", "csv"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.starts_with("r_min,r_median,r_max\n"));
    const Run sim = run({"ema-sim", "--n", "20", "--iters", "4", "--format", "csv"});
    CHECK(std::count(sim.out.begin(), sim.out.end(), '\n') == 5);
}

TEST_CASE("exit codes and diagnostics") {
    SUBCASE("usage errors exit 2 with a one-line message") {
        for (const auto& args : std::vector<std::vector<std::string>>{
                 {},
                 {"frobnicate"},
                 {"radii", "--bits", "2"},
                 {"radii", "--scheme", "log", "--signed", "--bits", "2"},
                 {"radii", "--scheme", "log", "--bits", "2"},
                 {"radii", "--scheme", "linear", "--bits", "9"},
                 {"radii", "--scheme", "nope", "--bits", "2"},
                 {"swamp", "--scheme", "linear", "--bits", "2", "--code", "1"},
                 {"track", "--scheme", "log-unsigned:x"},
                 {"decay", "--c", "2"},
                 {"ema-sim", "--format", "xml"},
             }) {
            const Run r = run(args);
            CAPTURE(r.err);
            CHECK(r.code == kExitUsage);
            CHECK(r.err.starts_with("error: "));
            CHECK(r.out.empty());
        }
    }
    SUBCASE("validation failures exit 3") {
        for (const auto& args : std::vector<std::vector<std::string>>{
                 {"ema-sim", "--beta", "1.5"},
                 {"ema-sim", "--scheme", "log", "--rounding", "stochastic", "--p", "1.5"},
                 {"train", "--lr", "-1", "--steps", "3"},
                 {"pack-info", "--input", "/nonexistent/state.lbq"},
                 {"track", "--scheme", "linear-signed:4"},
             }) {
            const Run r = run(args);
            CAPTURE(r.err);
            CHECK(r.code == kExitFailure);
            CHECK(r.err.starts_with("error: "));
        }
    }
    SUBCASE("help documents every flag") {
        const std::map<std::string, std::vector<std::string>> flags = {
            {"radii", {"--scheme", "--bits", "--signed", "--base", "--format", "--out"}},
            {"beta-prime", {"--beta", "--from", "--to", "--radii"}},
            {"swamp", {"--scheme", "--bits", "--signed", "--radius", "--base", "--code", "--beta", "--z", "--ratio"}},
            {"ema-sim", {"--n", "--beta", "--iters", "--seed", "--scheme", "--bits", "--rounding", "--block", "--p"}},
            {"decay", {"--c", "--s", "--trials", "--seed", "--beta"}},
            {"track", {"--scheme", "--blocks", "--beta", "--steps", "--seed", "--length", "--spread", "--noise",
                       "--drift", "--period"}},
            {"train", {"--model", "--optimizer", "--preset", "--lr", "--beta1", "--beta2", "--eps", "--wd",
                       "--m-state", "--v-state", "--steps", "--seed", "--batch", "--schedule", "--sweep-beta1"}},
            {"pack-info", {"--input", "--scheme", "--bits", "--length", "--block", "--write"}},
            {"repro", {"--only", "--format", "--out"}},
        };
        for (const auto& [command, expected] : flags) {
            const Run r = run({command, "--help"});
            CHECK(r.code == kExitOk);
            for (const auto& flag : expected) {
                CAPTURE(command);
                CAPTURE(flag);
                CHECK(r.out.find(flag) != std::string::npos);
            }
        }
        CHECK(run({"--help"}).code == kExitOk);
    }
}

TEST_CASE("report files") {
    const auto dir = std::filesystem::temp_directory_path() / "lowbit-cli-test";
    std::filesystem::remove_all(dir);

    const Run r = run({"decay", "--c", "2", "--s", "2", "--trials", "50", "--seed", "11", "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(read_file(dir / "decay-11.json") == r.out);

    const Run csv = run({"ema-sim", "--n", "10", "--iters", "2", "--seed", "5", "--format", "csv", "--out",
                         dir.string()});
    REQUIRE(csv.code == kExitOk);
    CHECK(read_file(dir / "ema-sim-5.csv") == csv.out);

    const auto file = dir / "state.lbq";
    const Json described = run_json({"pack-info", "--scheme", "log", "--bits", "2", "--length", "1000", "--write",
                                     file.string()});
    CHECK(described["metrics"]["total_bytes"] == 24 + 250 + 32 + 32);
    CHECK(std::filesystem::file_size(file) == 338);
    const Json read_back = run_json({"pack-info", "--input", file.string()});
    CHECK(read_back["metrics"] == described["metrics"]);

    std::ofstream(dir / "short.lbq", std::ios::binary) << "LBQT";
    CHECK(run({"pack-info", "--input", (dir / "short.lbq").string()}).code == kExitFailure);
    std::filesystem::remove_all(dir);
}

TEST_CASE("repro reports acceptance outcomes") {
    const Run r = run({"repro", "--only", "1,2"});
    CHECK(r.code == kExitOk);
    const Json report = Json::parse(r.out);
    CHECK(report["metrics"]["passed"] == 2);
    CHECK(r.err.find("[PASS] 1 radii table") != std::string::npos);
    CHECK(run({"repro", "--only", "12"}).code == kExitUsage);
}
