#pragma once

#include "iswerm/theory_checks.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace iswerm {

/// Entry point of the iswerm_lab tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Runs one subcommand from a fully resolved config, writing artifacts and a
/// manifest.json into out_dir. Returns the process exit code.
int execute_command(const std::string& command, const nlohmann::json& config, const std::filesystem::path& out_dir,
                    std::ostream& log);

/// Re-executes the run recorded in a manifest into out_dir and compares every
/// artifact byte-for-byte with the recorded digests. Returns 0 iff all match.
int replay_manifest(const std::filesystem::path& manifest, const std::filesystem::path& out_dir, std::ostream& log);

/// The theory-check suites driven by the "theory" config section.
std::vector<CheckReport> run_theory_suite(const nlohmann::json& config);

/// 64-bit FNV-1a digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace iswerm
