// gsabfd: command-line driver for the bearing-fault detection pipeline.
//
//   gsabfd synth    -> normal.csv, fault.csv
//   gsabfd convert  --normal N --fault F           -> features.csv, features.stats.json
//   gsabfd graph    --features X [--dense]          -> edges.csv [, M.csv]
//   gsabfd train    --features X [--graph E]        -> checkpoint.json, train_log.csv
//   gsabfd score    --features X --checkpoint C     -> report.json, report.csv
//   gsabfd eval     --report R                      -> metrics.csv (+ one-line summary)
//   gsabfd bench    --features X                    -> bench.csv
//   gsabfd sweep    k|sampling_ratio --features X   -> sweep_<param>.csv
//
// Global: --config FILE, --seed N, --out DIR, and --<key> VALUE for every config key.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gsabfd/gsabfd.hpp"

namespace fs = std::filesystem;
using namespace gsabfd;

namespace {

void require_file(const std::string& path, std::string_view what) {
  if (path.empty()) throw Error(ErrorCategory::usage, std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw Error(ErrorCategory::io, std::string(what) + " '" + path + "' does not exist");
}

std::string out_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// Loads features and, when present, the stats sidecar written next to them.
FeatureMatrix load_features(const std::string& path) {
  require_file(path, "features");
  auto fm = read_feature_csv(path);
  const auto sidecar = stats_sidecar_path(path);
  if (fs::is_regular_file(sidecar)) fm.norm_stats = norm_stats_from_json(read_json_file(sidecar));
  return fm;
}

AttributedGraph load_or_build_graph(const std::string& graph_path, const Matrix& x, std::size_t k) {
  if (graph_path.empty()) return build_graph(x, k);
  require_file(graph_path, "graph");
  return read_edges_csv(graph_path, x.rows);
}

void write_train_log(const std::string& path, const std::vector<double>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e) out << e << ',' << format_double(curve[e]) << '\n';
}

void write_metrics_csv(const std::string& path, const Metrics& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << "auc,acc,dr,runtime_seconds\n"
      << format_double(m.auc) << ',' << format_double(m.acc) << ',' << format_double(m.dr) << ','
      << format_double(m.runtime_seconds) << '\n';
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  for (auto part : split(text, ',')) {
    double v = 0.0;
    if (!parse_double(part, v)) throw Error(ErrorCategory::parse, "bad grid value '" + std::string(part) + "'");
    grid.push_back(v);
  }
  return grid;
}

int run(int argc, char** argv) {
  CLI::App app{"Graph-based bearing fault detection"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = ".";
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_dir, "output directory");
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys()) app.add_option("--" + key, overrides[key], "override config key " + key);

  std::string normal_path, fault_path, features_path, graph_path, checkpoint_path, report_path;
  std::string methods_text = "gsabfd,ae,lof,knn,iforest", dataset_name, grid_text, sweep_param;
  bool dense = false;
  SynthParams synth_params;

  auto* synth = app.add_subcommand("synth", "write deterministic synthetic normal/fault signals");
  synth->add_option("--impulse-amplitude", synth_params.impulse_amplitude,
                    "fault burst amplitude relative to the carrier (smaller = closer to normal)");
  auto* convert = app.add_subcommand("convert", "slice, assemble and extract standardized features");
  convert->add_option("--normal", normal_path, "normal signal (.csv or .mat)")->required();
  convert->add_option("--fault", fault_path, "fault signal (.csv or .mat)")->required();
  auto* graph = app.add_subcommand("graph", "build the cosine k-NN graph");
  graph->add_option("--features", features_path)->required();
  graph->add_flag("--dense", dense, "also export dense M = A + I (m <= 1000)");
  auto* trainc = app.add_subcommand("train", "train the graph autoencoder");
  trainc->add_option("--features", features_path)->required();
  trainc->add_option("--graph", graph_path, "edge CSV; rebuilt from features when omitted");
  auto* score = app.add_subcommand("score", "score nodes with a trained checkpoint");
  score->add_option("--features", features_path)->required();
  score->add_option("--checkpoint", checkpoint_path)->required();
  score->add_option("--graph", graph_path, "edge CSV; rebuilt from features when omitted");
  auto* evalc = app.add_subcommand("eval", "compute metrics from a fault report");
  evalc->add_option("--report", report_path)->required();
  auto* bench = app.add_subcommand("bench", "repeated comparison of all detectors");
  bench->add_option("--features", features_path)->required();
  bench->add_option("--methods", methods_text, "comma-separated subset of gsabfd,ae,lof,knn,iforest");
  bench->add_option("--dataset", dataset_name, "dataset name for the CSV (default: features file stem)");
  auto* sweep = app.add_subcommand("sweep", "AUC versus k or sampling ratio");
  sweep->add_option("param", sweep_param, "k | sampling_ratio")->required();
  sweep->add_option("--features", features_path)->required();
  sweep->add_option("--grid", grid_text, "comma-separated values (default: the full 10-point range)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  for (const auto& key : config_keys())
    if (app.count("--" + key) > 0) set_config_value(cfg, key, overrides[key]);
  cfg.validate();
  fs::create_directories(out_dir);

  if (synth->parsed()) {
    auto [normal, fault] = synth_signals(cfg.n_normal, cfg.n_fault, cfg.window_width, cfg.seed, synth_params);
    write_signal_csv(out_path(out_dir, "normal.csv"), normal, "DE_time");
    write_signal_csv(out_path(out_dir, "fault.csv"), fault, "DE_time");
    std::cout << "wrote " << normal.samples.size() << " normal and " << fault.samples.size() << " fault samples\n";
  } else if (convert->parsed()) {
    require_file(normal_path, "normal signal");
    require_file(fault_path, "fault signal");
    const auto normal = load_signal(normal_path, Label::normal, cfg.var_filter);
    const auto fault = load_signal(fault_path, parse_label(cfg.fault_label), cfg.var_filter);
    const auto fm = features_from_signals(normal, fault, cfg);
    const auto csv = out_path(out_dir, "features.csv");
    write_feature_csv(csv, fm);
    write_json_file(stats_sidecar_path(csv), to_json(*fm.norm_stats));
    std::cout << "wrote " << fm.size() << " x " << fm.values.cols << " features\n";
  } else if (graph->parsed()) {
    const auto fm = load_features(features_path);
    const auto g = build_graph(fm.values, cfg.k);
    write_edges_csv(out_path(out_dir, "edges.csv"), g);
    if (dense) write_matrix_csv(out_path(out_dir, "M.csv"), g.dense());
    std::cout << "wrote graph with " << g.m << " nodes, k = " << g.k << '\n';
  } else if (trainc->parsed()) {
    const auto fm = load_features(features_path);
    const auto g = load_or_build_graph(graph_path, fm.values, cfg.k);
    auto hyper = cfg.sage_hyper(cfg.seed);
    hyper.k = g.k;
    const auto result = train(g, fm.values, hyper, fm.norm_stats);
    write_json_file(out_path(out_dir, "checkpoint.json"), checkpoint_json(result.model));
    write_train_log(out_path(out_dir, "train_log.csv"), result.loss_curve);
    std::cout << "final loss " << result.loss_curve.back() << '\n';
  } else if (score->parsed()) {
    const auto fm = load_features(features_path);
    require_file(checkpoint_path, "checkpoint");
    const auto model = model_from_checkpoint(read_json_file(checkpoint_path));
    Stopwatch clock;
    Matrix x = fm.values;
    if (model.norm_stats && fm.norm_stats && !(*model.norm_stats == *fm.norm_stats))
      x = restandardize(x, *fm.norm_stats, *model.norm_stats);
    const auto g = load_or_build_graph(graph_path, x, model.hyper.k);
    auto scores = fault_degree(x, model.reconstruct(g, x));
    const double runtime = cfg.timing ? clock.seconds() : 0.0;
    const auto report = evaluate(std::move(scores), fault_labels(fm), cfg.contamination, runtime);
    write_json_file(out_path(out_dir, "report.json"), to_json(report));
    write_report_csv(out_path(out_dir, "report.csv"), report);
    std::cout << "scored " << report.scores.size() << " nodes, " << std::count(report.flags.begin(), report.flags.end(), true)
              << " flagged\n";
  } else if (evalc->parsed()) {
    require_file(report_path, "report");
    auto report = report_from_json(read_json_file(report_path));
    const double runtime = report.metrics ? report.metrics->runtime_seconds : 0.0;
    report = evaluate(std::move(report.scores), std::move(report.labels), report.contamination, runtime);
    write_report_csv(out_path(out_dir, "report.csv"), report);
    if (report.metrics) {
      write_metrics_csv(out_path(out_dir, "metrics.csv"), *report.metrics);
      std::cout << "AUC=" << report.metrics->auc << ", ACC=" << report.metrics->acc << ", DR=" << report.metrics->dr
                << ", time=" << report.metrics->runtime_seconds << "s\n";
    } else {
      std::cout << "no ground-truth labels: metrics omitted, " << report.scores.size() << " scores written\n";
    }
  } else if (bench->parsed()) {
    const auto fm = load_features(features_path);
    std::vector<Method> methods;
    for (auto m : split(methods_text, ',')) methods.push_back(parse_method(trim(m)));
    const auto name = dataset_name.empty() ? fs::path(features_path).stem().string() : dataset_name;
    const auto rows = run_bench(fm, cfg, name, methods);
    write_bench_csv(out_path(out_dir, "bench.csv"), rows);
    for (const auto& r : rows)
      std::cout << r.method << ": AUC=" << r.auc.mean << " +/- " << r.auc.std
                << (r.error.empty() ? "" : " (failed: " + r.error + ")") << '\n';
  } else if (sweep->parsed()) {
    const auto param = parse_sweep_param(sweep_param);
    const auto fm = load_features(features_path);
    const auto grid = grid_text.empty() ? default_grid(param) : parse_grid(grid_text);
    const auto rows = run_sweep(fm, cfg, param, grid);
    write_sweep_csv(out_path(out_dir, "sweep_" + sweep_param + ".csv"), param, rows);
    for (const auto& r : rows)
      std::cout << sweep_param << '=' << r.value << ": AUC=" << r.auc.mean << " +/- " << r.auc.std
                << (r.error.empty() ? "" : " (failed: " + r.error + ")") << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.category()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 3;
  }
}
