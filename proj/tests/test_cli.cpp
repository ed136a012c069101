// Command-line front-end, driven in-process through run_cli: report shapes,
// exit codes, determinism of emitted bytes, and the end-to-end
// sample -> estimate round trip.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "spurdec/cli.hpp"
#include "test_support.hpp"

using namespace spurdec;
using testsupport::model_path;
using testsupport::near;

namespace {
std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}
}  // namespace

TEST_CASE("decompose command reports the exact split with embedded input hashes") {
    CliResult r = run_cli({"decompose", "--model", model_path("markov_b1.json"), "--x", "X=1",
                           "--y-expect", "Y"});
    REQUIRE(r.exit_code == 0);
    const auto& j = r.report;
    CHECK(j["tool"] == "spurdec");
    CHECK(j["version"] == "0.1.0");
    CHECK(j["command"] == "decompose");
    CHECK(j["inputs"]["model"]["fnv1a64"].get<std::string>().size() == 16);
    CHECK(j["query"]["treatment"]["X"] == "1");
    CHECK(j["query"]["outcome"]["form"] == "expectation");
    CHECK(j["mode"] == "markovian");
    CHECK(j["ordering"] == std::vector<std::string>{"U1", "U2"});
    CHECK(near(j["baseline"].get<double>(), 2.24));
    CHECK(near(j["endpoint"].get<double>(), 2.0));
    CHECK(near(j["total"].get<double>(), 0.24));
    REQUIRE(j["contributions"].size() == 2);
    CHECK(j["contributions"][0]["label"] == "U1");
    CHECK(near(j["contributions"][0]["value"].get<double>(), 2034.0 / 14725.0));
    CHECK(near(j["contributions"][1]["value"].get<double>(), 60.0 / 589.0));
    CHECK(std::fabs(j["residual"].get<double>()) < 1e-12);
}

TEST_CASE("decompose handles shared-latent models and event outcomes") {
    CliResult r = run_cli({"decompose", "--model", model_path("semimarkov_b3.json"), "--x",
                           "X=1", "--y-expect", "Y"});
    REQUIRE(r.exit_code == 0);
    CHECK(r.report["mode"] == "semi-markovian");
    CHECK(near(r.report["total"].get<double>(), 1.0 / 6.0));
    CHECK(near(r.report["contributions"][0]["value"].get<double>(), 1.0 / 24.0));
    CHECK(near(r.report["contributions"][1]["value"].get<double>(), 1.0 / 8.0));

    CliResult ev = run_cli({"decompose", "--model", model_path("semimarkov_b3.json"), "--x",
                            "X=1", "--y", "Y=3"});
    REQUIRE(ev.exit_code == 0);
    CHECK(ev.report["query"]["outcome"]["form"] == "probability");
    CHECK(std::fabs(ev.report["residual"].get<double>()) < 1e-12);
}

TEST_CASE("decompose order handling mirrors the library contracts") {
    CliResult bad = run_cli({"decompose", "--model", model_path("markov_b1.json"), "--x", "X=1",
                             "--y-expect", "Y", "--order", "Z2,Z1"});
    CHECK(bad.exit_code == 1);
    CHECK(bad.report.contains("error"));

    CliResult forced = run_cli({"decompose", "--model", model_path("markov_b1.json"), "--x",
                                "X=1", "--y-expect", "Y", "--order", "Z2,Z1",
                                "--force-model-only"});
    REQUIRE(forced.exit_code == 0);
    CHECK(forced.report["ordering"] == std::vector<std::string>{"U2", "U1"});
    CHECK(near(forced.report["total"].get<double>(), 0.24));

    CliResult wrong_mode =
        run_cli({"decompose", "--model", model_path("semimarkov_b3.json"), "--x", "X=1",
                 "--y-expect", "Y", "--force-model-only"});
    CHECK(wrong_mode.exit_code == 1);
}

TEST_CASE("identification checks drive the dedicated exit code") {
    CliResult broken = run_cli({"check-id", "--model", model_path("b4_chain.json"), "--uset",
                                "U2X"});
    CHECK(broken.exit_code == 2);
    CHECK(broken.report["verdict"] == "not-established");
    CHECK(broken.report["ustot"] == std::vector<std::string>{"U1X", "U2X"});
    CHECK(broken.report["markovian"] == false);
    bool saw_closure = false;
    for (const auto& c : broken.report["conditions"]) {
        if (c["name"] == "anchor-exogenous-ancestral-closure") {
            saw_closure = true;
            CHECK(c["holds"] == false);
            CHECK(c["witnesses"] == std::vector<std::string>{"U1X"});
        }
    }
    CHECK(saw_closure);
    CHECK(!broken.report["reasons"].empty());

    CliResult ok = run_cli({"check-id", "--model", model_path("b4_chain.json"), "--uset",
                            "U1X,U2X"});
    CHECK(ok.exit_code == 0);
    CHECK(ok.report["verdict"] == "identifiable");
    CHECK(ok.report["anchor_set"] == std::vector<std::string>{"Z1", "Z2"});
    CHECK(ok.report["reasons"].empty());

    // Empty latent set: trivially identified.
    CliResult trivial = run_cli({"check-id", "--model", model_path("b4_chain.json")});
    CHECK(trivial.exit_code == 0);

    // Latents outside the tops set are a usage error, not a verdict.
    CliResult misuse = run_cli({"check-id", "--model", model_path("b4_chain.json"), "--uset",
                                "UX"});
    CHECK(misuse.exit_code == 1);
    CHECK(misuse.report.contains("error"));
}

TEST_CASE("sampling writes deterministic CSV plus a usable schema") {
    std::string csv = temp_file("spurdec_cli_sample.csv");
    std::string schema = temp_file("spurdec_cli_schema.json");

    CliResult a = run_cli({"sample", "--model", model_path("markov_b1.json"), "--n", "200",
                           "--seed", "9", "--out", csv, "--schema-out", schema});
    REQUIRE(a.exit_code == 0);
    CHECK(a.report["n"] == 200);
    CHECK(a.report["seed"] == 9);
    CHECK(a.report["columns"] == std::vector<std::string>{"Z1", "Z2", "X", "Y"});
    std::string first = slurp(csv);

    CliResult b = run_cli({"sample", "--model", model_path("markov_b1.json"), "--n", "200",
                           "--seed", "9", "--out", csv});
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(csv) == first);
    CHECK(first.rfind("Z1,Z2,X,Y\n", 0) == 0);
}

TEST_CASE("estimate command closes the loop from samples back to the model values") {
    std::string csv = temp_file("spurdec_cli_est.csv");
    std::string schema = temp_file("spurdec_cli_est_schema.json");
    REQUIRE(run_cli({"sample", "--model", model_path("markov_b1.json"), "--n", "4000", "--seed",
                     "7", "--out", csv, "--schema-out", schema})
                .exit_code == 0);

    std::vector<std::string> args{"estimate", "--data", csv,       "--schema",     schema,
                                  "--model",  model_path("markov_b1.json"), "--x", "X=1",
                                  "--y-expect", "Y",     "--replicates", "60", "--seed", "7"};
    CliResult r = run_cli(args);
    REQUIRE(r.exit_code == 0);
    const auto& j = r.report;
    CHECK(j["command"] == "estimate");
    CHECK(j["mode"] == "markovian");
    CHECK(j["n"] == 4000);
    CHECK(j["replicates"]["requested"] == 60);
    CHECK(j["replicates"]["used"].get<std::size_t>() +
              j["replicates"]["failed"].get<std::size_t>() ==
          60);
    CHECK(j["seed"] == 7);
    double total = j["total"]["point"].get<double>();
    CHECK(std::fabs(total - 0.24) < 0.15);
    CHECK(j["total"]["lower"].get<double>() <= j["total"]["upper"].get<double>());
    REQUIRE(j["contributions"].size() == 2);
    CHECK(j["contributions"][0]["label"] == "U1");

    // Identical invocation, identical bytes.
    CliResult again = run_cli(args);
    CHECK(again.report.dump(2) == r.report.dump(2));
}

TEST_CASE("estimate refuses unidentified latent prefixes unless forced") {
    std::string csv = temp_file("spurdec_cli_semi.csv");
    std::string schema = temp_file("spurdec_cli_semi_schema.json");
    REQUIRE(run_cli({"sample", "--model", model_path("semimarkov_b3.json"), "--n", "4000",
                     "--seed", "3", "--out", csv, "--schema-out", schema})
                .exit_code == 0);

    CliResult refused = run_cli({"estimate", "--data", csv, "--schema", schema, "--model",
                                 model_path("semimarkov_b3.json"), "--x", "X=1", "--y-expect",
                                 "Y", "--replicates", "10", "--seed", "1"});
    CHECK(refused.exit_code == 2);
    CHECK(refused.report.contains("error"));
    CHECK(!refused.report["reasons"].empty());

    CliResult forced = run_cli({"estimate", "--data", csv, "--schema", schema, "--model",
                                model_path("semimarkov_b3.json"), "--x", "X=1", "--y-expect",
                                "Y", "--replicates", "40", "--seed", "1", "--force-formula"});
    REQUIRE(forced.exit_code == 0);
    CHECK(forced.report["force_formula"] == true);
    CHECK(forced.report["mode"] == "semi-markovian");
    // The forced plug-in converges to the population formula values.
    CHECK(std::fabs(forced.report["contributions"][0]["point"].get<double>() - 7.0 / 96.0) <
          0.08);
    CHECK(std::fabs(forced.report["contributions"][1]["point"].get<double>() - 3.0 / 32.0) <
          0.08);
}

TEST_CASE("estimate writes report and interval artifacts when asked") {
    std::string csv = temp_file("spurdec_cli_art.csv");
    std::string schema = temp_file("spurdec_cli_art_schema.json");
    std::string out = temp_file("spurdec_cli_art_report.json");
    std::string intervals = temp_file("spurdec_cli_art_intervals.csv");
    REQUIRE(run_cli({"sample", "--model", model_path("markov_b1.json"), "--n", "1500", "--seed",
                     "5", "--out", csv, "--schema-out", schema})
                .exit_code == 0);

    CliResult r = run_cli({"estimate", "--data", csv, "--schema", schema, "--model",
                           model_path("markov_b1.json"), "--x", "X=1", "--y-expect", "Y",
                           "--replicates", "30", "--seed", "2", "--out", out, "--csv",
                           intervals});
    REQUIRE(r.exit_code == 0);
    CHECK(!r.text.empty());

    std::string report_bytes = slurp(out);
    CHECK(report_bytes == r.report.dump(2) + "\n");
    std::string lines = slurp(intervals);
    CHECK(lines.rfind("label,point,lower,upper\ntotal,", 0) == 0);
    CHECK(lines.find("U1,") != std::string::npos);
    CHECK(lines.find("U2,") != std::string::npos);
}

TEST_CASE("seed resolution falls back to the environment variable") {
    std::string csv = temp_file("spurdec_cli_env.csv");

    setenv(kSeedEnvVar, "12345", 1);
    CliResult r = run_cli({"sample", "--model", model_path("markov_b1.json"), "--n", "50",
                           "--out", csv});
    CHECK(r.exit_code == 0);
    CHECK(r.report["seed"] == 12345);

    // An explicit flag wins over the environment.
    CliResult f = run_cli({"sample", "--model", model_path("markov_b1.json"), "--n", "50",
                           "--seed", "6", "--out", csv});
    CHECK(f.report["seed"] == 6);

    setenv(kSeedEnvVar, "not-a-number", 1);
    CliResult bad = run_cli({"sample", "--model", model_path("markov_b1.json"), "--n", "50",
                             "--out", csv});
    CHECK(bad.exit_code == 1);
    CHECK(bad.report["error"].get<std::string>().find(kSeedEnvVar) != std::string::npos);
    unsetenv(kSeedEnvVar);
}

TEST_CASE("argument and file errors never escape as exceptions") {
    CHECK(run_cli({}).exit_code == 1);
    CHECK(run_cli({"decompose"}).exit_code == 1);
    CHECK(run_cli({"decompose", "--model", "/nonexistent.json", "--x", "X=1", "--y-expect",
                   "Y"})
              .exit_code == 1);
    CHECK(run_cli({"decompose", "--model", model_path("markov_b1.json"), "--x", "X=1"})
              .exit_code == 1);
    CHECK(run_cli({"decompose", "--model", model_path("markov_b1.json"), "--x", "X=1", "--y",
                   "Y=3", "--y-expect", "Y"})
              .exit_code == 1);
    CHECK(run_cli({"decompose", "--bogus"}).exit_code == 1);
    CHECK(run_cli({"decompose", "--model", model_path("markov_b1.json"), "--x", "X=9",
                   "--y-expect", "Y"})
              .exit_code == 1);

    CliResult help = run_cli({"--help"});
    CHECK(help.exit_code == 0);
    CHECK(help.text.find("spurdec") != std::string::npos);
}
