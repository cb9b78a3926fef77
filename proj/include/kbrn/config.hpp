#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbrn/benchmarks.hpp"
#include "kbrn/model.hpp"
#include "kbrn/training.hpp"

namespace kbrn {

// Invalid configuration or input files; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ModelSection {
    CellKind cell = CellKind::kbrn;
    std::vector<CellKind> cells = {CellKind::kbrn, CellKind::tanh_rnn, CellKind::lstm};
    std::size_t hidden = 10;
    std::size_t dict_size = 12;  // "K" in the config file
    double bandwidth_factor = 1.0;
    bool learn_centers = false;
};

// Either a directory of dataset files written by genbench ("dir") or
// generation parameters; a nonempty dir selects file mode.
struct DataSection {
    std::string dir;
    std::size_t seq_len = 50;                          // "T"
    std::vector<std::size_t> seq_len_grid = {10, 25, 50, 100};  // "T_grid", sweep
    std::size_t alphabet = 5;
    std::size_t prefix_len = 1;
    std::size_t num_classes = 2;
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    NoiseMode noise = NoiseMode::shared;
    bool seed_set = false;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    ModelSection model;
    TrainConfig train;
    bool train_seed_set = false;
    DataSection data;
    std::string output_dir = "runs";
    std::uint64_t seed = 1;

    // Normalized (defaults filled in) document; basis for hashing and echoes.
    nlohmann::json canonical;

    std::uint64_t data_seed() const { return data.seed_set ? data.seed : seed; }
    std::uint64_t train_seed() const { return train_seed_set ? train.seed : seed; }

    ModelSpec model_spec(CellKind kind) const;
};

// Default configuration document (the --print-default template).
nlohmann::json default_config_json();

// Parses and validates a config document. Unknown keys are rejected with
// their full path; JSON syntax errors report line and column.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// FNV-1a over the canonical document, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// <output_dir>/run_<hash>_s<seed>
std::string run_directory(const ExperimentConfig& cfg);

}  // namespace kbrn
