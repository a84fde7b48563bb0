// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "altlora/bench.hpp"

namespace altlora::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kInternal = 3 };

struct VerifyOptions {
  std::string filter = "*";
  std::optional<std::filesystem::path> out;
};

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  int threads = 1;
};

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// File stem encoding optimizer, eta, alpha, order, kappa and seed.
std::string cell_name(const ExperimentSpec& spec);

/// Grid axes: eta, alpha, order, optimizer, kappa, seed. Cells are ordered
/// with the last axis varying fastest.
std::vector<ExperimentSpec> expand_grid(const ExperimentSpec& base, const nlohmann::json& grid);

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// --out, then the config's "out" key, then $ALTLORA_OUT, then the working directory.
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag,
                                      const std::optional<std::string>& from_config);

}  // namespace altlora::cli
