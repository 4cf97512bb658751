#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace infocnf {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitIo = 1, kExitConfig = 2, kExitVersion = 3 };

/// Entry point of the `infocnf` tool. Never throws; failures become exit codes
/// with a message on stderr.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

/// Default parent for run directories: $INFOCNF_OUT_ROOT, else ./runs.
std::filesystem::path default_out_root();

/// Creates `dir`, refusing (IoError) when it already exists and is not empty.
void claim_run_dir(const std::filesystem::path& dir);

}  // namespace infocnf
