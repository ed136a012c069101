#pragma once

// Batch command-line front-end. Each command is exposed as a library function
// returning the canonical JSON report (stable key order, reproducible bytes)
// so that tests can drive it in-process; main() is a thin wrapper.
//
// Exit-code contract: 0 success, 1 error, 2 not-established identification
// verdict (or estimation refusal on identifiability grounds).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace spurdec {

inline constexpr const char* kToolName = "spurdec";
inline constexpr const char* kToolVersion = "0.1.0";
// Environment variable providing the default seed when --seed is absent.
inline constexpr const char* kSeedEnvVar = "SPURDEC_SEED";

struct CliResult {
    int exit_code = 0;
    nlohmann::ordered_json report;  // canonical JSON report (or error object)
    std::string text;               // human-readable rendering
};

// Parses args (excluding argv[0]) and runs the selected command. Never throws;
// errors become {exit_code: 1, report: {"error": ...}}.
CliResult run_cli(const std::vector<std::string>& args);

// Convenience wrapper used by main(): prints the report (JSON to stdout, or
// to --out with a text summary on stdout) and returns the exit code.
int run_cli_main(int argc, char** argv);

std::string hash_file_hex(const std::string& path);  // FNV-1a 64 as 16 hex chars

}  // namespace spurdec
