#include "kbrn/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "kbrn/analysis.hpp"
#include "kbrn/gradcheck.hpp"
#include "kbrn/serialization.hpp"

namespace kbrn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << body;
}

// Loads or generates the (train, test) pair a command works on.
std::pair<SequenceDataset, SequenceDataset> obtain_data(const ExperimentConfig& cfg) {
    if (!cfg.data.dir.empty()) {
        if (!fs::exists(cfg.data.dir + "/meta.json")) {
            throw ConfigError("dataset directory '" + cfg.data.dir + "' is missing meta.json");
        }
        return read_benchmark_dir(cfg.data.dir);
    }
    return gen_prefix_task(cfg.data.seq_len, cfg.data.prefix_len, cfg.data.num_classes,
                           cfg.data.alphabet, cfg.data.n_train, cfg.data.n_test,
                           cfg.data_seed(), cfg.data.noise);
}

TrainConfig train_config_of(const ExperimentConfig& cfg) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train_seed();
    return tc;
}

double final_accuracy(const TrainResult& result, const SequenceDataset& test) {
    if (result.diverged) return std::nan("");
    std::vector<std::vector<Vector>> encoded;
    encoded.reserve(test.size());
    for (const auto& s : test.sequences) encoded.push_back(encode_one_hot(s, test.alphabet));
    return dataset_accuracy(result.model, encoded, test.labels);
}

json summary_of(const TrainResult& result, double final_acc, double seconds_total) {
    json summary;
    summary["final_test_acc"] = final_acc;
    summary["epochs"] = result.history.records.size();
    summary["seconds"] = seconds_total;
    summary["diverged"] = result.diverged;
    return summary;
}

}  // namespace

int cmd_genbench(const ExperimentConfig& cfg, std::ostream& out) {
    if (!cfg.data.dir.empty()) {
        throw ConfigError("genbench needs generation parameters; data.dir points at existing files");
    }
    auto [train_ds, test_ds] = obtain_data(cfg);
    const std::string dir = run_directory(cfg);
    fs::create_directories(dir);
    write_benchmark_dir(train_ds, test_ds, cfg.data.noise, dir);
    out << dir << "/train.jsonl\n" << dir << "/test.jsonl\n" << dir << "/meta.json\n";
    return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
    const auto [train_ds, test_ds] = obtain_data(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result =
        train(cfg.model_spec(cfg.model.cell), train_ds, test_ds, train_config_of(cfg));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string dir = run_directory(cfg);
    fs::create_directories(dir);
    write_text(dir + "/history.csv", history_to_csv(result.history));
    const double final_acc = final_accuracy(result, test_ds);
    write_text(dir + "/summary.json", summary_of(result, final_acc, seconds).dump(2) + "\n");
    if (!result.diverged) {
        write_model(result.model, dir + "/model.json", &cfg.canonical);
        out << dir << "/model.json\n";
    }
    out << dir << "/history.csv\n" << dir << "/summary.json\n";
    if (result.diverged) {
        out << "diverged after " << result.history.records.size() << " completed epochs\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_gradcheck(const std::string& cell_name, std::uint64_t seed, std::ostream& out) {
    std::vector<CellKind> kinds;
    if (cell_name == "all") {
        kinds = {CellKind::kbrn, CellKind::tanh_rnn, CellKind::lstm};
    } else {
        kinds = {cell_kind_from_string(cell_name)};
    }
    bool ok = true;
    for (CellKind kind : kinds) {
        const GradCheckReport report = run_gradcheck(kind, seed);
        out << to_string(kind) << ": max relative error " << fmt9(report.max_error) << " over "
            << report.instances << " instances -> " << (report.passed ? "ok" : "FAIL") << "\n";
        ok = ok && report.passed;
    }
    return ok ? kExitOk : kExitNumerical;
}

int cmd_analyze(const std::string& model_path, const std::string& data_dir,
                const std::string& out_dir, std::size_t grid_n, std::ostream& out) {
    if (!fs::exists(model_path)) throw ConfigError("model file '" + model_path + "' not found");
    RecurrentModel model = [&] {
        try {
            return read_model(model_path);
        } catch (const std::exception& e) {
            throw ConfigError("cannot parse model '" + model_path + "': " + e.what());
        }
    }();
    if (!fs::exists(data_dir + "/meta.json")) {
        throw ConfigError("dataset directory '" + data_dir + "' is missing meta.json");
    }
    const auto [train_ds, test_ds] = read_benchmark_dir(data_dir);
    (void)train_ds;
    if (test_ds.alphabet != model.input_dim()) {
        throw ConfigError("model expects input width " + std::to_string(model.input_dim()) +
                          " but dataset alphabet is " + std::to_string(test_ds.alphabet));
    }

    std::vector<std::vector<Vector>> encoded;
    encoded.reserve(test_ds.size());
    for (const auto& s : test_ds.sequences) encoded.push_back(encode_one_hot(s, test_ds.alphabet));
    const auto trace = mean_gradient_norm_trace(model, encoded, test_ds.labels);

    double lo = -3.0;
    double hi = 3.0;
    if (model.is_kbrn()) {
        const auto& dict = model.kbrn().dict();
        lo = dict.centers().front() - 2.0 * dict.bandwidth();
        hi = dict.centers().back() + 2.0 * dict.bandwidth();
    }
    const auto shapes = activation_shapes(model, lo, hi, grid_n);

    fs::create_directories(out_dir);
    write_text(out_dir + "/trace.csv", trace_to_csv(trace));
    write_text(out_dir + "/shapes.csv", shapes_to_csv(shapes));
    out << out_dir << "/trace.csv\n" << out_dir << "/shapes.csv\n";
    return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, std::size_t parallel, std::ostream& out) {
    struct GridPoint {
        std::size_t seq_len;
        CellKind kind;
    };
    std::vector<GridPoint> grid;
    for (std::size_t t : cfg.data.seq_len_grid) {
        for (CellKind kind : cfg.model.cells) grid.push_back({t, kind});
    }

    struct Row {
        std::size_t seq_len = 0;
        CellKind kind = CellKind::kbrn;
        double final_acc = std::nan("");
        long epochs_to_95 = -1;
        TrainHistory history;
    };
    std::vector<Row> rows(grid.size());

    const std::string dir = run_directory(cfg);
    fs::create_directories(dir);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= grid.size()) return;
            const GridPoint& point = grid[idx];
            Row& row = rows[idx];
            row.seq_len = point.seq_len;
            row.kind = point.kind;
            try {
                auto [train_ds, test_ds] = gen_prefix_task(
                    point.seq_len, cfg.data.prefix_len, cfg.data.num_classes, cfg.data.alphabet,
                    cfg.data.n_train, cfg.data.n_test, cfg.data_seed(), cfg.data.noise);
                TrainConfig tc = train_config_of(cfg);
                tc.stop_at_val_acc = 0.95;
                TrainResult result =
                    train(cfg.model_spec(point.kind), train_ds, test_ds, tc);
                row.history = result.history;
                row.final_acc = final_accuracy(result, test_ds);
                for (const auto& rec : result.history.records) {
                    if (rec.val_acc >= 0.95) {
                        row.epochs_to_95 = static_cast<long>(rec.epoch);
                        break;
                    }
                }
            } catch (const std::exception&) {
                row.final_acc = std::nan("");  // divergence recorded, sweep continues
            }
        }
    };

    if (parallel <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < parallel; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }

    std::ostringstream csv;
    csv << "T,cell,final_test_acc,epochs_to_95,seconds\n";
    for (const auto& row : rows) {
        csv << row.seq_len << ',' << to_string(row.kind) << ',' << fmt9(row.final_acc) << ','
            << row.epochs_to_95 << ',' << fmt9(0.0) << '\n';
    }
    write_text(dir + "/sweep.csv", csv.str());
    for (const auto& row : rows) {
        const std::string sub =
            dir + "/T" + std::to_string(row.seq_len) + "_" + to_string(row.kind);
        fs::create_directories(sub);
        write_text(sub + "/history.csv", history_to_csv(row.history));
    }
    out << csv.str();
    out << dir << "/sweep.csv\n";
    return kExitOk;
}

namespace {

ExperimentConfig config_with_overrides(const std::string& config_path, const std::string& out_dir,
                                       bool seed_set, std::uint64_t seed) {
    ExperimentConfig cfg = load_config_file(config_path);
    if (!out_dir.empty() || seed_set) {
        // rebuild through the parser so the canonical echo and hash agree
        json doc = cfg.canonical;
        if (!out_dir.empty()) doc["output_dir"] = out_dir;
        if (seed_set) {
            doc["seed"] = seed;
        }
        cfg = parse_config_text(doc.dump());
    }
    return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"kernel-expansion recurrent network experiments"};
    app.require_subcommand(0, 1);

    bool print_default = false;
    app.add_flag("--print-default", print_default, "print the default config template and exit");

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t parallel = 1;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config JSON");
        if (config_required) opt->required();
        cmd->add_option("--out", out_dir, "override the configured output directory");
        cmd->add_option("--seed", seed, "override the configured seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    auto* genbench = app.add_subcommand("genbench", "generate benchmark dataset files");
    add_common(genbench, true);

    auto* train_cmd = app.add_subcommand("train", "train one model per the config");
    add_common(train_cmd, true);

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string cell_name = "all";
    std::uint64_t gc_seed = 1;
    gradcheck->add_option("--cell", cell_name, "kbrn|tanh|lstm|all")->capture_default_str();
    gradcheck->add_option("--seed", gc_seed, "instance seed")->capture_default_str();

    auto* analyze = app.add_subcommand("analyze", "gradient traces and activation shapes");
    std::string model_path;
    std::string data_dir;
    std::string analyze_out = ".";
    std::size_t grid_n = 201;
    analyze->add_option("--model", model_path, "model JSON written by train")->required();
    analyze->add_option("--data", data_dir, "dataset directory written by genbench")->required();
    analyze->add_option("--out", analyze_out, "output directory")->capture_default_str();
    analyze->add_option("--grid-n", grid_n, "activation grid resolution")->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "train the full T x cell grid");
    add_common(sweep, true);
    sweep->add_option("--parallel", parallel, "concurrent grid points")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (print_default) {
            std::cout << default_config_json().dump(2) << "\n";
            return kExitOk;
        }
        if (genbench->parsed()) {
            return cmd_genbench(config_with_overrides(config_path, out_dir, seed_set, seed),
                                std::cout);
        }
        if (train_cmd->parsed()) {
            return cmd_train(config_with_overrides(config_path, out_dir, seed_set, seed),
                             std::cout);
        }
        if (gradcheck->parsed()) return cmd_gradcheck(cell_name, gc_seed, std::cout);
        if (analyze->parsed()) {
            return cmd_analyze(model_path, data_dir, analyze_out, grid_n, std::cout);
        }
        if (sweep->parsed()) {
            if (parallel == 0) parallel = 1;
            return cmd_sweep(config_with_overrides(config_path, out_dir, seed_set, seed),
                             parallel, std::cout);
        }
        std::cout << app.help();
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace kbrn::cli
