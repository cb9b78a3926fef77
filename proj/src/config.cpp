#include "kbrn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace kbrn {

using nlohmann::json;

ModelSpec ExperimentConfig::model_spec(CellKind kind) const {
    ModelSpec spec;
    spec.kind = kind;
    spec.hidden = model.hidden;
    spec.dict_size = model.dict_size;
    spec.bandwidth_factor = model.bandwidth_factor;
    spec.learn_centers = model.learn_centers;
    return spec;
}

json default_config_json() {
    return json{
        {"model",
         {{"cell", "kbrn"},
          {"cells", {"kbrn", "tanh", "lstm"}},
          {"hidden", 10},
          {"K", 12},
          {"bandwidth_factor", 1.0},
          {"learn_centers", false}}},
        {"train",
         {{"optimizer", "adam"},
          {"lr", 1e-3},
          {"batch_size", 32},
          {"epochs", 300},
          {"lambda_smooth", 1e-4},
          {"lambda_weight", 0.0},
          {"clip_norm", 0.0}}},
        {"data",
         {{"dir", ""},
          {"T", 50},
          {"T_grid", {10, 25, 50, 100}},
          {"alphabet", 5},
          {"prefix_len", 1},
          {"num_classes", 2},
          {"n_train", 2000},
          {"n_test", 500},
          {"noise_mode", "shared"}}},
        {"output_dir", "runs"},
        {"seed", 1}};
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.contains(key)) {
            throw ConfigError("config: unknown key '" + (path.empty() ? key : path + "." + key) +
                              "'");
        }
    }
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& path, const char* type) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: '" + (path.empty() ? key : path + "." + key) + "' must be " +
                          type);
    }
}

std::size_t get_count(const json& obj, const std::string& key, const std::string& path) {
    const auto v = get_as<std::int64_t>(obj, key, path, "a nonnegative integer");
    if (v < 0) {
        throw ConfigError("config: '" + path + "." + key + "' must be nonnegative, got " +
                          std::to_string(v));
    }
    return static_cast<std::size_t>(v);
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError("config: JSON syntax error at line " + std::to_string(line) +
                          ", column " + std::to_string(col) + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
    reject_unknown(doc, {"model", "train", "data", "output_dir", "seed"}, "");

    ExperimentConfig cfg;

    if (doc.contains("seed")) cfg.seed = get_as<std::uint64_t>(doc, "seed", "", "an integer");
    if (doc.contains("output_dir")) {
        cfg.output_dir = get_as<std::string>(doc, "output_dir", "", "a string");
        if (cfg.output_dir.empty()) throw ConfigError("config: 'output_dir' must be nonempty");
    }

    if (doc.contains("model")) {
        const json& m = doc.at("model");
        if (!m.is_object()) throw ConfigError("config: 'model' must be an object");
        reject_unknown(m, {"cell", "cells", "hidden", "K", "bandwidth_factor", "learn_centers"},
                       "model");
        if (m.contains("cell")) {
            try {
                cfg.model.cell = cell_kind_from_string(get_as<std::string>(m, "cell", "model", "a string"));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: model.cell: ") + e.what());
            }
        }
        if (m.contains("cells")) {
            auto names = get_as<std::vector<std::string>>(m, "cells", "model", "an array of strings");
            if (names.empty()) throw ConfigError("config: model.cells must be nonempty");
            cfg.model.cells.clear();
            for (const auto& n : names) {
                try {
                    cfg.model.cells.push_back(cell_kind_from_string(n));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("config: model.cells: ") + e.what());
                }
            }
        }
        if (m.contains("hidden")) cfg.model.hidden = get_count(m, "hidden", "model");
        if (m.contains("K")) cfg.model.dict_size = get_count(m, "K", "model");
        if (m.contains("bandwidth_factor")) {
            cfg.model.bandwidth_factor = get_as<double>(m, "bandwidth_factor", "model", "a number");
        }
        if (m.contains("learn_centers")) {
            cfg.model.learn_centers = get_as<bool>(m, "learn_centers", "model", "a boolean");
        }
    }
    if (cfg.model.hidden == 0) throw ConfigError("config: model.hidden must be positive");
    if (cfg.model.dict_size < 2) throw ConfigError("config: model.K must be at least 2");
    if (!(cfg.model.bandwidth_factor > 0.0)) {
        throw ConfigError("config: model.bandwidth_factor must be positive");
    }

    if (doc.contains("train")) {
        const json& t = doc.at("train");
        if (!t.is_object()) throw ConfigError("config: 'train' must be an object");
        reject_unknown(t,
                       {"optimizer", "lr", "batch_size", "epochs", "lambda_smooth",
                        "lambda_weight", "clip_norm", "seed"},
                       "train");
        if (t.contains("optimizer")) {
            try {
                cfg.train.optimizer =
                    optimizer_from_string(get_as<std::string>(t, "optimizer", "train", "a string"));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: train.optimizer: ") + e.what());
            }
        }
        if (t.contains("lr")) cfg.train.lr = get_as<double>(t, "lr", "train", "a number");
        if (t.contains("batch_size")) cfg.train.batch_size = get_count(t, "batch_size", "train");
        if (t.contains("epochs")) cfg.train.epochs = get_count(t, "epochs", "train");
        if (t.contains("lambda_smooth")) {
            cfg.train.lambda_smooth = get_as<double>(t, "lambda_smooth", "train", "a number");
        }
        if (t.contains("lambda_weight")) {
            cfg.train.lambda_weight = get_as<double>(t, "lambda_weight", "train", "a number");
        }
        if (t.contains("clip_norm")) {
            cfg.train.clip_norm = get_as<double>(t, "clip_norm", "train", "a number");
        }
        if (t.contains("seed")) {
            cfg.train.seed = get_as<std::uint64_t>(t, "seed", "train", "an integer");
            cfg.train_seed_set = true;
        }
    }
    if (!(cfg.train.lr > 0.0)) throw ConfigError("config: train.lr must be positive");
    if (cfg.train.batch_size == 0) throw ConfigError("config: train.batch_size must be positive");
    if (cfg.train.lambda_smooth < 0.0 || cfg.train.lambda_weight < 0.0) {
        throw ConfigError("config: train penalties must be nonnegative");
    }
    if (cfg.train.clip_norm < 0.0) throw ConfigError("config: train.clip_norm must be >= 0");

    if (doc.contains("data")) {
        const json& d = doc.at("data");
        if (!d.is_object()) throw ConfigError("config: 'data' must be an object");
        reject_unknown(d,
                       {"dir", "T", "T_grid", "alphabet", "prefix_len", "num_classes", "n_train",
                        "n_test", "noise_mode", "seed"},
                       "data");
        if (d.contains("dir")) cfg.data.dir = get_as<std::string>(d, "dir", "data", "a string");
        if (d.contains("T")) cfg.data.seq_len = get_count(d, "T", "data");
        if (d.contains("T_grid")) {
            auto grid = get_as<std::vector<std::int64_t>>(d, "T_grid", "data",
                                                          "an array of integers");
            if (grid.empty()) throw ConfigError("config: data.T_grid must be nonempty");
            cfg.data.seq_len_grid.clear();
            for (auto v : grid) {
                if (v < 2) throw ConfigError("config: data.T_grid entries must be >= 2");
                cfg.data.seq_len_grid.push_back(static_cast<std::size_t>(v));
            }
        }
        if (d.contains("alphabet")) cfg.data.alphabet = get_count(d, "alphabet", "data");
        if (d.contains("prefix_len")) cfg.data.prefix_len = get_count(d, "prefix_len", "data");
        if (d.contains("num_classes")) cfg.data.num_classes = get_count(d, "num_classes", "data");
        if (d.contains("n_train")) cfg.data.n_train = get_count(d, "n_train", "data");
        if (d.contains("n_test")) cfg.data.n_test = get_count(d, "n_test", "data");
        if (d.contains("noise_mode")) {
            try {
                cfg.data.noise =
                    noise_mode_from_string(get_as<std::string>(d, "noise_mode", "data", "a string"));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: data.noise_mode: ") + e.what());
            }
        }
        if (d.contains("seed")) {
            cfg.data.seed = get_as<std::uint64_t>(d, "seed", "data", "an integer");
            cfg.data.seed_set = true;
        }
    }
    if (cfg.data.dir.empty()) {
        if (cfg.data.num_classes < 2) throw ConfigError("config: data.num_classes must be >= 2");
        if (cfg.data.alphabet < cfg.data.num_classes) {
            throw ConfigError("config: data.alphabet must be >= data.num_classes");
        }
        if (cfg.data.prefix_len < 1) throw ConfigError("config: data.prefix_len must be >= 1");
        if (cfg.data.seq_len <= cfg.data.prefix_len) {
            throw ConfigError("config: data.T must exceed data.prefix_len");
        }
        if (cfg.data.n_train == 0 || cfg.data.n_test == 0) {
            throw ConfigError("config: data.n_train and data.n_test must be positive");
        }
        if (cfg.data.noise == NoiseMode::disjoint && cfg.data.alphabet <= cfg.data.num_classes) {
            throw ConfigError("config: disjoint noise needs data.alphabet > data.num_classes");
        }
        for (auto t : cfg.data.seq_len_grid) {
            if (t <= cfg.data.prefix_len) {
                throw ConfigError("config: every data.T_grid entry must exceed prefix_len");
            }
        }
    }

    // canonical echo: defaults with the parsed values substituted back in
    json canon = default_config_json();
    canon["seed"] = cfg.seed;
    canon["output_dir"] = cfg.output_dir;
    canon["model"]["cell"] = to_string(cfg.model.cell);
    json cell_names = json::array();
    for (auto c : cfg.model.cells) cell_names.push_back(to_string(c));
    canon["model"]["cells"] = std::move(cell_names);
    canon["model"]["hidden"] = cfg.model.hidden;
    canon["model"]["K"] = cfg.model.dict_size;
    canon["model"]["bandwidth_factor"] = cfg.model.bandwidth_factor;
    canon["model"]["learn_centers"] = cfg.model.learn_centers;
    canon["train"]["optimizer"] = to_string(cfg.train.optimizer);
    canon["train"]["lr"] = cfg.train.lr;
    canon["train"]["batch_size"] = cfg.train.batch_size;
    canon["train"]["epochs"] = cfg.train.epochs;
    canon["train"]["lambda_smooth"] = cfg.train.lambda_smooth;
    canon["train"]["lambda_weight"] = cfg.train.lambda_weight;
    canon["train"]["clip_norm"] = cfg.train.clip_norm;
    if (cfg.train_seed_set) canon["train"]["seed"] = cfg.train.seed;
    canon["data"]["dir"] = cfg.data.dir;
    canon["data"]["T"] = cfg.data.seq_len;
    canon["data"]["T_grid"] = cfg.data.seq_len_grid;
    canon["data"]["alphabet"] = cfg.data.alphabet;
    canon["data"]["prefix_len"] = cfg.data.prefix_len;
    canon["data"]["num_classes"] = cfg.data.num_classes;
    canon["data"]["n_train"] = cfg.data.n_train;
    canon["data"]["n_test"] = cfg.data.n_test;
    canon["data"]["noise_mode"] = to_string(cfg.data.noise);
    if (cfg.data.seed_set) canon["data"]["seed"] = cfg.data.seed;
    cfg.canonical = std::move(canon);
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("config: cannot read '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = cfg.canonical.dump();
    std::uint64_t hash = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string run_directory(const ExperimentConfig& cfg) {
    return cfg.output_dir + "/run_" + config_hash(cfg) + "_s" + std::to_string(cfg.seed);
}

}  // namespace kbrn
