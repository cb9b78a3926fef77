#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "kbrn/config.hpp"

namespace kbrn::cli {

// Exit codes, stable for scripting: 0 success, 2 config/input error,
// 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

int cmd_genbench(const ExperimentConfig& cfg, std::ostream& out);

int cmd_train(const ExperimentConfig& cfg, std::ostream& out);

// cell_name: kbrn | tanh | lstm | all
int cmd_gradcheck(const std::string& cell_name, std::uint64_t seed, std::ostream& out);

int cmd_analyze(const std::string& model_path, const std::string& data_dir,
                const std::string& out_dir, std::size_t grid_n, std::ostream& out);

int cmd_sweep(const ExperimentConfig& cfg, std::size_t parallel, std::ostream& out);

// Full argument parsing + dispatch; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace kbrn::cli
