#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dbvae::cli {

// Runs one subcommand; returns the process exit code. Failures print a single
// line `error: kind=<kind> msg="<message>"` to stderr.
int run(int argc, char** argv);

// Relative output paths resolve under $DBVAE_OUT_ROOT when it is set.
std::filesystem::path output_path(const std::filesystem::path& p);

// report: aggregate CSVs plus one SVG violin plot per metric and a per-factor
// downstream accuracy plot; returns the written files.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& in_dir,
                                                const std::filesystem::path& out_dir);

}  // namespace dbvae::cli
