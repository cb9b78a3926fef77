#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kbrn/linalg.hpp"

namespace kbrn {

// Labeled symbol sequences. The class is fully determined by the first
// prefix_len symbols; every later position is i.i.d. uniform noise.
struct SequenceDataset {
    std::vector<std::vector<int>> sequences;  // symbol ids in [0, alphabet)
    std::vector<int> labels;
    std::size_t seq_len = 0;
    std::size_t alphabet = 0;
    std::size_t prefix_len = 0;
    std::size_t num_classes = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return sequences.size(); }
};

// Whether the noise tail draws from the full alphabet (shared, the harder
// variant) or only from symbols outside the class range (disjoint).
enum class NoiseMode { shared, disjoint };

NoiseMode noise_mode_from_string(const std::string& name);
std::string to_string(NoiseMode mode);

// Class c is encoded as symbol c repeated over the prefix; the tail is
// uniform noise. Classes are balanced to within one sequence in each split.
std::pair<SequenceDataset, SequenceDataset> gen_prefix_task(
    std::size_t seq_len, std::size_t prefix_len, std::size_t num_classes, std::size_t alphabet,
    std::size_t n_train, std::size_t n_test, std::uint64_t seed,
    NoiseMode noise = NoiseMode::shared);

// Re-derives the label a sequence's prefix encodes, independent of the
// stored label (prefix pattern lookup).
int label_from_prefix(const std::vector<int>& sequence, std::size_t prefix_len);

Vector one_hot(int symbol, std::size_t alphabet);
std::vector<Vector> encode_one_hot(const std::vector<int>& sequence, std::size_t alphabet);

// 1-D regression targets for activation-expressiveness checks.
enum class FitFn { sine, tanh, bump, square_wave_smooth };

FitFn fit_fn_from_string(const std::string& name);
std::function<double(double)> fitting_function(FitFn fn);

struct FittingDataset {
    Vector inputs;
    Vector targets;
    double lo = 0.0;
    double hi = 0.0;
};

FittingDataset gen_fitting_task(FitFn fn, double lo, double hi, std::size_t n,
                                std::uint64_t seed);

// JSON-lines persistence: one {"label": c, "symbols": [...]} object per line,
// metadata in a sibling JSON document.
std::string dataset_to_jsonl(const SequenceDataset& ds);
std::string dataset_meta_json(const SequenceDataset& ds);
SequenceDataset dataset_from_jsonl(const std::string& jsonl, const std::string& meta_json);

void write_dataset(const SequenceDataset& ds, const std::string& jsonl_path,
                   const std::string& meta_path);
SequenceDataset read_dataset(const std::string& jsonl_path, const std::string& meta_path);

// Benchmark directory layout: train.jsonl, test.jsonl and one shared
// meta.json holding the task parameters and both split sizes.
void write_benchmark_dir(const SequenceDataset& train, const SequenceDataset& test,
                         NoiseMode noise, const std::string& dir);
std::pair<SequenceDataset, SequenceDataset> read_benchmark_dir(const std::string& dir);

}  // namespace kbrn
