#include "kbrn/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kbrn/rng.hpp"

namespace kbrn {

using nlohmann::json;

NoiseMode noise_mode_from_string(const std::string& name) {
    if (name == "shared") return NoiseMode::shared;
    if (name == "disjoint") return NoiseMode::disjoint;
    throw std::invalid_argument("unknown noise mode '" + name + "' (expected shared|disjoint)");
}

std::string to_string(NoiseMode mode) {
    return mode == NoiseMode::shared ? "shared" : "disjoint";
}

namespace {

SequenceDataset gen_split(std::size_t seq_len, std::size_t prefix_len, std::size_t num_classes,
                          std::size_t alphabet, std::size_t n, std::uint64_t seed,
                          NoiseMode noise, Rng& rng) {
    SequenceDataset ds;
    ds.seq_len = seq_len;
    ds.alphabet = alphabet;
    ds.prefix_len = prefix_len;
    ds.num_classes = num_classes;
    ds.seed = seed;
    ds.sequences.reserve(n);
    ds.labels.reserve(n);

    const std::int64_t noise_lo =
        noise == NoiseMode::shared ? 0 : static_cast<std::int64_t>(num_classes);
    const std::int64_t noise_hi = static_cast<std::int64_t>(alphabet) - 1;

    // round-robin labels keep classes balanced to within one
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % num_classes);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(labels[i - 1], labels[j]);
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> seq(seq_len);
        for (std::size_t t = 0; t < prefix_len; ++t) seq[t] = labels[i];
        for (std::size_t t = prefix_len; t < seq_len; ++t) {
            seq[t] = static_cast<int>(rng.uniform_int(noise_lo, noise_hi));
        }
        ds.sequences.push_back(std::move(seq));
        ds.labels.push_back(labels[i]);
    }
    return ds;
}

}  // namespace

std::pair<SequenceDataset, SequenceDataset> gen_prefix_task(
    std::size_t seq_len, std::size_t prefix_len, std::size_t num_classes, std::size_t alphabet,
    std::size_t n_train, std::size_t n_test, std::uint64_t seed, NoiseMode noise) {
    if (alphabet < num_classes) {
        throw std::invalid_argument("gen_prefix_task: alphabet " + std::to_string(alphabet) +
                                    " smaller than num_classes " + std::to_string(num_classes));
    }
    if (num_classes < 2) throw std::invalid_argument("gen_prefix_task: need >= 2 classes");
    if (prefix_len < 1) throw std::invalid_argument("gen_prefix_task: prefix_len must be >= 1");
    if (seq_len <= prefix_len) {
        throw std::invalid_argument("gen_prefix_task: seq_len " + std::to_string(seq_len) +
                                    " must exceed prefix_len " + std::to_string(prefix_len));
    }
    if (noise == NoiseMode::disjoint && alphabet <= num_classes) {
        throw std::invalid_argument(
            "gen_prefix_task: disjoint noise needs alphabet > num_classes");
    }
    Rng rng(seed);
    SequenceDataset train =
        gen_split(seq_len, prefix_len, num_classes, alphabet, n_train, seed, noise, rng);
    SequenceDataset test =
        gen_split(seq_len, prefix_len, num_classes, alphabet, n_test, seed, noise, rng);
    return {std::move(train), std::move(test)};
}

int label_from_prefix(const std::vector<int>& sequence, std::size_t prefix_len) {
    if (sequence.size() < prefix_len || prefix_len == 0) {
        throw std::invalid_argument("label_from_prefix: sequence shorter than prefix");
    }
    const int sym = sequence[0];
    for (std::size_t t = 1; t < prefix_len; ++t) {
        if (sequence[t] != sym) {
            throw std::invalid_argument("label_from_prefix: inconsistent prefix pattern");
        }
    }
    return sym;
}

Vector one_hot(int symbol, std::size_t alphabet) {
    if (symbol < 0 || static_cast<std::size_t>(symbol) >= alphabet) {
        throw std::invalid_argument("one_hot: symbol " + std::to_string(symbol) +
                                    " outside alphabet of size " + std::to_string(alphabet));
    }
    Vector v(alphabet, 0.0);
    v[static_cast<std::size_t>(symbol)] = 1.0;
    return v;
}

std::vector<Vector> encode_one_hot(const std::vector<int>& sequence, std::size_t alphabet) {
    std::vector<Vector> out;
    out.reserve(sequence.size());
    for (int s : sequence) out.push_back(one_hot(s, alphabet));
    return out;
}

FitFn fit_fn_from_string(const std::string& name) {
    if (name == "sin") return FitFn::sine;
    if (name == "tanh") return FitFn::tanh;
    if (name == "bump") return FitFn::bump;
    if (name == "square-wave-smooth") return FitFn::square_wave_smooth;
    throw std::invalid_argument("unknown fitting function '" + name +
                                "' (expected sin|tanh|bump|square-wave-smooth)");
}

std::function<double(double)> fitting_function(FitFn fn) {
    switch (fn) {
        case FitFn::sine: return [](double x) { return std::sin(x); };
        case FitFn::tanh: return [](double x) { return std::tanh(x); };
        case FitFn::bump: return [](double x) { return std::exp(-x * x); };
        case FitFn::square_wave_smooth:
            // smooth approximation of sign(sin x)
            return [](double x) { return std::tanh(5.0 * std::sin(x)); };
    }
    throw std::invalid_argument("fitting_function: bad id");
}

FittingDataset gen_fitting_task(FitFn fn, double lo, double hi, std::size_t n,
                                std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("gen_fitting_task: need n >= 2");
    if (!(lo < hi)) throw std::invalid_argument("gen_fitting_task: lo must be < hi");
    const auto f = fitting_function(fn);
    Rng rng(seed);
    FittingDataset ds;
    ds.lo = lo;
    ds.hi = hi;
    ds.inputs.resize(n);
    ds.targets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.inputs[i] = rng.uniform(lo, hi);
        ds.targets[i] = f(ds.inputs[i]);
    }
    return ds;
}

std::string dataset_to_jsonl(const SequenceDataset& ds) {
    std::ostringstream out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        json line;
        line["label"] = ds.labels[i];
        line["symbols"] = ds.sequences[i];
        out << line.dump() << '\n';
    }
    return out.str();
}

std::string dataset_meta_json(const SequenceDataset& ds) {
    json meta;
    meta["T"] = ds.seq_len;
    meta["alphabet"] = ds.alphabet;
    meta["prefix_len"] = ds.prefix_len;
    meta["num_classes"] = ds.num_classes;
    meta["seed"] = ds.seed;
    meta["count"] = ds.size();
    return meta.dump(2) + "\n";
}

SequenceDataset dataset_from_jsonl(const std::string& jsonl, const std::string& meta_json) {
    const json meta = json::parse(meta_json);
    SequenceDataset ds;
    ds.seq_len = meta.at("T").get<std::size_t>();
    ds.alphabet = meta.at("alphabet").get<std::size_t>();
    ds.prefix_len = meta.at("prefix_len").get<std::size_t>();
    ds.num_classes = meta.at("num_classes").get<std::size_t>();
    ds.seed = meta.at("seed").get<std::uint64_t>();

    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json obj = json::parse(line);
        const int label = obj.at("label").get<int>();
        auto symbols = obj.at("symbols").get<std::vector<int>>();
        if (symbols.size() != ds.seq_len) {
            throw std::invalid_argument("dataset_from_jsonl: sequence of length " +
                                        std::to_string(symbols.size()) + ", metadata says " +
                                        std::to_string(ds.seq_len));
        }
        for (int s : symbols) {
            if (s < 0 || static_cast<std::size_t>(s) >= ds.alphabet) {
                throw std::invalid_argument("dataset_from_jsonl: symbol outside alphabet");
            }
        }
        ds.labels.push_back(label);
        ds.sequences.push_back(std::move(symbols));
    }
    return ds;
}

void write_dataset(const SequenceDataset& ds, const std::string& jsonl_path,
                   const std::string& meta_path) {
    std::ofstream jf(jsonl_path, std::ios::binary);
    if (!jf) throw std::runtime_error("cannot write " + jsonl_path);
    jf << dataset_to_jsonl(ds);
    std::ofstream mf(meta_path, std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write " + meta_path);
    mf << dataset_meta_json(ds);
}

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

SequenceDataset read_dataset(const std::string& jsonl_path, const std::string& meta_path) {
    return dataset_from_jsonl(slurp(jsonl_path), slurp(meta_path));
}

void write_benchmark_dir(const SequenceDataset& train, const SequenceDataset& test,
                         NoiseMode noise, const std::string& dir) {
    json meta;
    meta["T"] = train.seq_len;
    meta["alphabet"] = train.alphabet;
    meta["prefix_len"] = train.prefix_len;
    meta["num_classes"] = train.num_classes;
    meta["seed"] = train.seed;
    meta["noise_mode"] = to_string(noise);
    meta["n_train"] = train.size();
    meta["n_test"] = test.size();

    std::ofstream mf(dir + "/meta.json", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write " + dir + "/meta.json");
    mf << meta.dump(2) << "\n";
    std::ofstream trf(dir + "/train.jsonl", std::ios::binary);
    if (!trf) throw std::runtime_error("cannot write " + dir + "/train.jsonl");
    trf << dataset_to_jsonl(train);
    std::ofstream tef(dir + "/test.jsonl", std::ios::binary);
    if (!tef) throw std::runtime_error("cannot write " + dir + "/test.jsonl");
    tef << dataset_to_jsonl(test);
}

std::pair<SequenceDataset, SequenceDataset> read_benchmark_dir(const std::string& dir) {
    const std::string meta = slurp(dir + "/meta.json");
    SequenceDataset train = dataset_from_jsonl(slurp(dir + "/train.jsonl"), meta);
    SequenceDataset test = dataset_from_jsonl(slurp(dir + "/test.jsonl"), meta);
    return {std::move(train), std::move(test)};
}

}  // namespace kbrn
