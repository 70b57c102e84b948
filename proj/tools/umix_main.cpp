// Copyright 2026 The umix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "umix/config.hpp"
#include "umix/data_io.hpp"
#include "umix/model_io.hpp"
#include "umix/neighbor_graph.hpp"
#include "umix/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using umix::Error;
using umix::UsageError;
using umix::config::Settings;
using umix::detail::cat;

constexpr const char* kUsage = R"(usage: umix <command> [options] [key=value ...]

commands:
  graph               build the neighbour graph of a dataset and export it
  train               train one model and persist it with its training log
  evaluate            RMSE of a persisted model on a dataset
  benchmark           multi-fold comparison of training methods
  export-embeddings   write the embedding of every data point as CSV

options:
  --config FILE       key=value config file (command line wins on conflicts)
  --dataset NAME      preset (yacht | concrete | boston), synthetic:<kind>
                      (trend | shock | high_vol), or a CSV path
  --method NAME       training method (train)
  --methods LIST      comma-separated methods (benchmark)
  --folds N           fold count (benchmark)
  --parallel-folds N  worker threads for benchmark folds
  --seed N            master seed; all randomness flows from it
  --model FILE        persisted model (evaluate, export-embeddings)
  --out DIR           output directory (default: out)
  --help              this text, plus every config key and its default

Any positional key=value pair overrides the corresponding config key.
)";

void print_help() {
    std::cout << kUsage << "\nconfig keys (defaults in brackets):\n";
    for (const auto& k : umix::config::registry()) {
        std::printf("  %-22s [%s]\n      %s\n", k.key, k.default_value, k.help);
    }
}

struct Cli {
    std::string command;
    Settings settings = Settings::defaults();
    std::string out_dir = "out";
    std::string model_path;
};

struct Preset {
    const char* name;
    const char* file;
    const char* target;
};

constexpr Preset kPresets[] = {
    {"yacht", "yacht_hydrodynamics.csv", "resistance"},
    {"concrete", "concrete_compressive_strength.csv", "strength"},
    {"boston", "boston_housing.csv", "medv"},
};

void apply_dataset_flag(Settings& s, const std::string& value) {
    if (value.rfind("synthetic:", 0) == 0) {
        s.set("data.kind", "synthetic");
        s.set("data.synthetic", value.substr(10));
        return;
    }
    for (const auto& p : kPresets) {
        if (value == p.name) {
            s.set("data.kind", "tabular");
            s.set("data.path", cat(s.get("data.dir"), "/", p.file));
            if (!s.is_set("data.target")) s.set("data.target", p.target);
            return;
        }
    }
    if (value.find('/') != std::string::npos || value.find(".csv") != std::string::npos) {
        s.set("data.path", value);
        return;
    }
    throw UsageError(cat("unknown dataset '", value,
                         "' (expected a preset, synthetic:<kind>, or a CSV path)"));
}

Cli parse_cli(int argc, char** argv) {
    Cli cli;
    if (argc < 2) throw UsageError("missing command (try --help)");
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        print_help();
        std::exit(0);
    }
    cli.command = args[0];

    // The config file loads before any other command-line setting so that
    // command-line values win.
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file path");
            cli.settings.load_file(args[i + 1]);
        }
    }

    const auto next = [&](std::size_t& i, const char* flag) -> const std::string& {
        if (i + 1 >= args.size()) throw UsageError(cat(flag, " needs a value"));
        return args[++i];
    };

    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--help" || a == "-h") {
            print_help();
            std::exit(0);
        } else if (a == "--config") {
            ++i; // applied above
        } else if (a == "--dataset") {
            apply_dataset_flag(cli.settings, next(i, "--dataset"));
        } else if (a == "--method") {
            cli.settings.set("train.method", next(i, "--method"));
        } else if (a == "--methods") {
            cli.settings.set("bench.methods", next(i, "--methods"));
        } else if (a == "--folds") {
            cli.settings.set("bench.folds", next(i, "--folds"));
        } else if (a == "--parallel-folds") {
            cli.settings.set("bench.parallel", next(i, "--parallel-folds"));
        } else if (a == "--seed") {
            cli.settings.set("train.seed", next(i, "--seed"));
        } else if (a == "--model") {
            cli.model_path = next(i, "--model");
        } else if (a == "--out") {
            cli.out_dir = next(i, "--out");
        } else if (a.rfind("--", 0) == 0) {
            throw UsageError(cat("unknown option '", a, "'"));
        } else if (a.find('=') != std::string::npos) {
            const auto eq = a.find('=');
            cli.settings.set(a.substr(0, eq), a.substr(eq + 1));
        } else {
            throw UsageError(cat("unexpected argument '", a, "'"));
        }
    }
    return cli;
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

struct LoadedData {
    std::string name;
    umix::train::BenchmarkTask task; // benchmark view
    umix::data::Dataset fit_set;     // training view (tabular: whole file)
    umix::data::Dataset eval_set;    // evaluation view (series: test suffix)
};

LoadedData load_data(const Settings& s) {
    LoadedData out;
    const std::string kind = s.get("data.kind");
    if (kind == "tabular") {
        const std::string path = s.get("data.path");
        if (path.empty()) throw UsageError("no dataset given (use --dataset or data.path)");
        if (!fs::exists(path)) {
            throw Error(cat("dataset file missing: expected '", path, "'"));
        }
        const std::string target = s.get("data.target");
        if (target.empty()) throw UsageError("data.target is required for tabular CSVs");
        umix::data::Dataset ds = umix::data::load_csv(path, target);
        out.name = fs::path(path).stem().string();
        out.task = {out.name, ds, {}, 0, 0.0};
        out.fit_set = ds;
        out.eval_set = std::move(ds);
        return out;
    }

    std::vector<double> prices;
    if (kind == "series") {
        const std::string path = s.get("data.path");
        if (path.empty()) throw UsageError("no dataset given (use --dataset or data.path)");
        if (!fs::exists(path)) {
            throw Error(cat("dataset file missing: expected '", path, "'"));
        }
        prices = umix::data::load_series_csv(path, s.get("data.close_column"));
        out.name = fs::path(path).stem().string();
    } else if (kind == "synthetic") {
        const auto sk = umix::data::series_kind_from_name(s.get("data.synthetic"));
        prices = umix::data::synthetic_series(sk, s.get_size("data.synthetic_n"),
                                              s.get_u64("train.seed"));
        out.name = cat("synthetic_", s.get("data.synthetic"));
    } else {
        throw UsageError(cat("unknown data.kind '", kind, "'"));
    }

    const std::size_t window = s.get_size("data.window");
    const double train_fraction = s.get_double("data.train_fraction");
    auto [train_set, test_set] = umix::data::chronological_split(prices, train_fraction, window);
    out.task = {out.name, std::nullopt, prices, window, train_fraction};
    out.fit_set = std::move(train_set);
    out.eval_set = std::move(test_set);
    return out;
}

bool is_series(const Settings& s) { return s.get("data.kind") != "tabular"; }

// ---------------------------------------------------------------------------
// Settings -> TrainConfig
// ---------------------------------------------------------------------------

umix::train::TrainConfig make_train_config(const Settings& s) {
    umix::train::TrainConfig cfg;
    cfg.method = umix::train::method_from_name(s.get("train.method"));
    cfg.alpha = s.get_double("train.alpha");
    cfg.gamma = s.get_double("train.gamma");
    cfg.k = s.get_size("graph.k");
    cfg.m_negatives = s.get_size("umap.m_negatives");
    cfg.min_dist = s.get_double("umap.min_dist");
    if (s.is_set("umap.a") != s.is_set("umap.b")) {
        throw UsageError("umap.a and umap.b must be set together");
    }
    if (s.is_set("umap.a")) {
        cfg.kernel_override =
            umix::umap::KernelParams{s.get_double("umap.a"), s.get_double("umap.b"), 0.0};
    }
    cfg.metric = umix::graph::metric_from_name(s.get("graph.metric"));
    cfg.lr = s.get_double("train.lr");
    cfg.batch_size = s.get_size("train.batch_size");
    cfg.seed = s.get_u64("train.seed");
    cfg.loss = umix::mix::loss_from_name(s.get("train.loss"));
    cfg.standardize = s.get_bool("data.standardize");
    const std::string pair_source = s.get("train.pair_source");
    if (pair_source != "uniform" && pair_source != "graph") {
        throw UsageError(cat("train.pair_source must be uniform or graph, got '", pair_source,
                             "'"));
    }
    cfg.graph_pairs = pair_source == "graph";

    const bool series = is_series(s);
    const std::string embed =
        s.is_set("model.embed") ? s.get("model.embed") : (series ? "lstm" : "mlp");
    if (embed == "mlp") {
        cfg.model.embed = umix::nn::EmbedKind::mlp;
    } else if (embed == "lstm") {
        cfg.model.embed = umix::nn::EmbedKind::lstm;
    } else {
        throw UsageError(cat("model.embed must be mlp or lstm, got '", embed, "'"));
    }
    cfg.model.embed_widths = s.get_sizes("model.embed_widths");
    cfg.model.head_widths = s.get_sizes("model.head_widths");
    cfg.model.activation = umix::nn::activation_from_name(s.get("model.activation"));
    cfg.model.lstm_hidden = s.get_size("model.lstm_hidden");
    cfg.model.window = s.get_size("data.window");

    // epoch default: 400 for tabular mlp runs, 150 for lstm runs
    cfg.epochs = s.is_set("train.epochs")
                     ? s.get_size("train.epochs")
                     : (cfg.model.embed == umix::nn::EmbedKind::lstm ? 150 : 400);
    return cfg;
}

fs::path ensure_out_dir(const Cli& cli) {
    fs::path dir(cli.out_dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_graph(const Cli& cli) {
    const LoadedData data = load_data(cli.settings);
    const std::size_t k = cli.settings.get_size("graph.k");
    const std::size_t n = data.fit_set.size();
    if (k >= n) throw UsageError(cat("K must be < N (K=", k, ", N=", n, ")"));

    umix::data::Scaler scaler =
        cli.settings.get_bool("data.standardize")
            ? umix::data::Scaler::fit(data.fit_set.x, true,
                                      [](const std::string& w) { std::cerr << "warning: " << w << "\n"; },
                                      &data.fit_set.feature_names)
            : umix::data::Scaler::identity(data.fit_set.x.cols());
    const auto metric = umix::graph::metric_from_name(cli.settings.get("graph.metric"));
    const umix::graph::DataGraph g =
        umix::graph::build_graph(scaler.transform(data.fit_set.x), k, metric);

    const fs::path out = ensure_out_dir(cli) / "graph.txt";
    umix::graph::save_graph(out.string(), g);
    std::cout << "n " << g.n << "\nk " << g.k << "\nedges " << g.edges.size() << "\nmean_p "
              << umix::format_double(g.edges.empty() ? 0.0 : g.sum_p() / g.edges.size())
              << "\nwrote " << out.string() << "\n";
    return 0;
}

int cmd_train(const Cli& cli) {
    const LoadedData data = load_data(cli.settings);
    const umix::train::TrainConfig cfg = make_train_config(cli.settings);

    umix::train::TrainReport report;
    const umix::train::FittedModel model = umix::train::train(cfg, data.fit_set, &report);

    const fs::path dir = ensure_out_dir(cli);
    const fs::path model_path = dir / "model.umx";
    umix::io::save_model(model_path.string(), model);

    const fs::path log_path = dir / "train_report.csv";
    std::ofstream log(log_path, std::ios::binary);
    log << "epoch,supervised_loss,umap_loss,total_loss\n";
    for (std::size_t e = 0; e < report.total_loss.size(); ++e) {
        log << e << "," << umix::format_double(report.supervised_loss[e]) << ","
            << umix::format_double(report.umap_loss[e]) << ","
            << umix::format_double(report.total_loss[e]) << "\n";
    }
    if (!log) throw Error(cat("cannot write '", log_path.string(), "'"));

    std::cout << "dataset " << data.name << "\nmethod " << method_name(cfg.method) << "\nepochs "
              << report.total_loss.size() << "\nfinal_total_loss "
              << umix::format_double(report.total_loss.back()) << "\nwall_seconds "
              << report.wall_seconds << "\nwrote " << model_path.string() << "\nwrote "
              << log_path.string() << "\n";
    return 0;
}

int cmd_evaluate(const Cli& cli) {
    if (cli.model_path.empty()) throw UsageError("evaluate needs --model FILE");
    const LoadedData data = load_data(cli.settings);
    const umix::train::FittedModel model = umix::io::load_model(cli.model_path);
    const double rmse = umix::train::evaluate(model, data.eval_set);
    std::cout << "rmse " << umix::format_double(rmse) << "\n";
    return 0;
}

int cmd_benchmark(const Cli& cli) {
    const LoadedData data = load_data(cli.settings);
    umix::train::BenchmarkConfig bench;
    bench.base = make_train_config(cli.settings);
    for (const auto& m : cli.settings.get_list("bench.methods")) {
        bench.methods.push_back(umix::train::method_from_name(m));
    }
    bench.folds = cli.settings.get_size("bench.folds");
    bench.test_fraction = cli.settings.get_double("bench.test_fraction");
    bench.parallel = cli.settings.get_size("bench.parallel");

    const auto results = umix::train::run_benchmark(data.task, bench);

    const fs::path dir = ensure_out_dir(cli);
    const fs::path folds_path = dir / "benchmark_folds.csv";
    std::ofstream folds(folds_path, std::ios::binary);
    folds << "dataset,method,fold,rmse\n";
    for (const auto& r : results) {
        for (std::size_t f = 0; f < r.fold_rmse.size(); ++f) {
            folds << r.dataset << "," << method_name(r.method) << "," << f << ","
                  << umix::format_double(r.fold_rmse[f]) << "\n";
        }
    }
    const fs::path summary_path = dir / "benchmark_summary.csv";
    std::ofstream summary(summary_path, std::ios::binary);
    summary << "dataset,method,mean_rmse,std_rmse\n";
    for (const auto& r : results) {
        summary << r.dataset << "," << method_name(r.method) << ","
                << umix::format_double(r.mean) << "," << umix::format_double(r.stddev) << "\n";
    }
    if (!folds || !summary) throw Error("cannot write benchmark tables");

    std::printf("%-20s %-16s %10s %10s\n", "dataset", "method", "mean", "std");
    for (const auto& r : results) {
        std::printf("%-20s %-16s %10.3f %10.3f\n", r.dataset.c_str(),
                    method_name(r.method).c_str(), r.mean, r.stddev);
    }
    std::cout << "wrote " << folds_path.string() << "\nwrote " << summary_path.string() << "\n";
    return 0;
}

int cmd_export_embeddings(const Cli& cli) {
    if (cli.model_path.empty()) throw UsageError("export-embeddings needs --model FILE");
    const LoadedData data = load_data(cli.settings);
    const umix::train::FittedModel model = umix::io::load_model(cli.model_path);
    if (model.x_scaler.in_cols() != data.fit_set.x.cols()) {
        throw Error(cat("dimension mismatch: model expects d_x=", model.x_scaler.in_cols(),
                        ", dataset has d_x=", data.fit_set.x.cols()));
    }
    const umix::ad::Tensor z = model.embed(data.fit_set.x);

    const fs::path out = ensure_out_dir(cli) / "embeddings.csv";
    std::ofstream csv(out, std::ios::binary);
    csv << "id";
    for (std::size_t c = 0; c < z.cols(); ++c) csv << ",z_" << (c + 1);
    csv << ",y\n";
    for (std::size_t i = 0; i < z.rows(); ++i) {
        csv << i;
        for (std::size_t c = 0; c < z.cols(); ++c) {
            csv << "," << umix::format_double(z.at(i, c));
        }
        csv << "," << umix::format_double(data.fit_set.y.at(i, 0)) << "\n";
    }
    if (!csv) throw Error(cat("cannot write '", out.string(), "'"));
    std::cout << "rows " << z.rows() << "\nwrote " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        const Cli cli = parse_cli(argc, argv);
        if (cli.command == "graph") return cmd_graph(cli);
        if (cli.command == "train") return cmd_train(cli);
        if (cli.command == "evaluate") return cmd_evaluate(cli);
        if (cli.command == "benchmark") return cmd_benchmark(cli);
        if (cli.command == "export-embeddings") return cmd_export_embeddings(cli);
        throw UsageError(cat("unknown command '", cli.command, "' (try --help)"));
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
