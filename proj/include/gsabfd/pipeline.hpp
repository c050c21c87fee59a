#pragma once

// End-to-end wiring shared by the CLI and the acceptance suite: signals -> features,
// one scored run per method, repeated benchmarks and parameter sweeps.

#include <chrono>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "gsabfd/baselines.hpp"
#include "gsabfd/config.hpp"
#include "gsabfd/diagnose.hpp"
#include "gsabfd/features.hpp"
#include "gsabfd/graph.hpp"
#include "gsabfd/ingest.hpp"
#include "gsabfd/sage.hpp"

namespace gsabfd {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Stream ids for derive_seed(cfg.seed, ...).
inline constexpr std::uint64_t kAssemblyStream = 2;
inline constexpr std::uint64_t kFeatureStream = 3;
inline constexpr std::uint64_t kRepetitionStream = 7;

inline WindowSet window_set_from_signals(const RawSignal& normal, const RawSignal& fault, const RunConfig& cfg) {
  const auto normals = slice_windows(normal, cfg.window_width);
  const auto faults = slice_windows(fault, cfg.window_width);
  return assemble_dataset(normals, faults, cfg.n_normal, cfg.n_fault, derive_seed(cfg.seed, kAssemblyStream));
}

/// Slice, assemble, extract and standardize.
inline FeatureMatrix features_from_signals(const RawSignal& normal, const RawSignal& fault, const RunConfig& cfg) {
  const auto set = window_set_from_signals(normal, fault, cfg);
  return standardize(extract_all(set, cfg.eemd, derive_seed(cfg.seed, kFeatureStream)));
}

inline std::optional<std::vector<bool>> fault_labels(const FeatureMatrix& fm) {
  if (!fm.has_labels()) return std::nullopt;
  return fm.fault_mask();
}

/// GSABFD scores for a standardized matrix: build graph, train, reconstruct in full mode.
inline std::vector<double> gsabfd_scores(const Matrix& x, const SageHyper& hyper) {
  const auto graph = build_graph(x, hyper.k);
  const auto trained = train(graph, x, hyper);
  return fault_degree(x, trained.model.reconstruct(graph, x));
}

/// One scored run; runtime covers everything after data load (zero when timing is off).
inline FaultReport run_method(Method method, const FeatureMatrix& fm, const RunConfig& cfg, std::uint64_t run_seed) {
  Stopwatch clock;
  std::vector<double> scores = method == Method::gsabfd ? gsabfd_scores(fm.values, cfg.sage_hyper(run_seed))
                                                        : baseline_scores(fm.values, cfg.baseline(method, run_seed));
  const double runtime = cfg.timing ? clock.seconds() : 0.0;
  return evaluate(std::move(scores), fault_labels(fm), cfg.contamination, runtime);
}

inline std::uint64_t repetition_seed(const RunConfig& cfg, std::size_t rep) {
  return derive_seed(cfg.seed, kRepetitionStream, rep);
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // n-1 divisor; 0 for a single value
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct BenchRow {
  std::string method;
  std::string dataset;
  Summary auc, acc, dr, runtime;
  std::size_t repetitions = 0;
  std::string error;  // non-empty when the method failed
};

/// Runs each method cfg.repetitions times with derived seeds; a failing method is recorded and skipped.
inline std::vector<BenchRow> run_bench(const FeatureMatrix& fm, const RunConfig& cfg, const std::string& dataset,
                                       const std::vector<Method>& methods) {
  if (!fm.has_labels()) throw Error(ErrorCategory::usage, "bench needs labelled features");
  std::vector<BenchRow> rows;
  for (auto method : methods) {
    BenchRow row;
    row.method = std::string(to_string(method));
    row.dataset = dataset;
    std::vector<double> auc, acc, dr, rt;
    try {
      for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        const auto report = run_method(method, fm, cfg, repetition_seed(cfg, rep));
        if (!report.metrics) throw Error(ErrorCategory::range, "metrics unavailable (single-class labels)");
        auc.push_back(report.metrics->auc);
        acc.push_back(report.metrics->acc);
        dr.push_back(report.metrics->dr);
        rt.push_back(report.metrics->runtime_seconds);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.repetitions = auc.size();
    row.auc = summarize(auc);
    row.acc = summarize(acc);
    row.dr = summarize(dr);
    row.runtime = summarize(rt);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << "method,dataset,auc,acc,dr,runtime_seconds,auc_std,acc_std,dr_std,runtime_seconds_std,repetitions,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.method << ',' << r.dataset << ',' << format_double(r.auc.mean) << ',' << format_double(r.acc.mean) << ','
        << format_double(r.dr.mean) << ',' << format_double(r.runtime.mean) << ',' << format_double(r.auc.std) << ','
        << format_double(r.acc.std) << ',' << format_double(r.dr.std) << ',' << format_double(r.runtime.std) << ','
        << r.repetitions << ',' << err << '\n';
  }
}

enum class SweepParam { k, sampling_ratio };

inline SweepParam parse_sweep_param(std::string_view s) {
  if (s == "k") return SweepParam::k;
  if (s == "sampling_ratio") return SweepParam::sampling_ratio;
  throw Error(ErrorCategory::usage, "sweep parameter must be 'k' or 'sampling_ratio'");
}

/// k: 10..100 step 10; sampling_ratio: 0.1..1 step 0.1.
inline std::vector<double> default_grid(SweepParam p) {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(p == SweepParam::k ? 10.0 * i : i / 10.0);
  return g;
}

struct SweepRow {
  double value = 0.0;
  Summary auc;
  std::size_t repetitions = 0;
  std::string error;
};

inline std::vector<SweepRow> run_sweep(const FeatureMatrix& fm, const RunConfig& cfg, SweepParam param,
                                       const std::vector<double>& grid) {
  if (!fm.has_labels()) throw Error(ErrorCategory::usage, "sweep needs labelled features");
  std::vector<SweepRow> rows;
  for (double value : grid) {
    SweepRow row;
    row.value = value;
    std::vector<double> aucs;
    try {
      RunConfig c = cfg;
      if (param == SweepParam::k) {
        if (value < 10 || value > 100 || value != std::floor(value))
          throw Error(ErrorCategory::range, "k grid values must be integers in [10, 100]");
        c.k = static_cast<std::size_t>(value);
      } else {
        if (value < 0.1 - 1e-12 || value > 1.0 + 1e-12)
          throw Error(ErrorCategory::range, "sampling_ratio grid values must lie in [0.1, 1]");
        c.sampling_ratio = std::min(value, 1.0);
      }
      for (std::size_t rep = 0; rep < c.repetitions; ++rep) {
        const auto report = run_method(Method::gsabfd, fm, c, repetition_seed(c, rep));
        if (!report.metrics) throw Error(ErrorCategory::range, "metrics unavailable (single-class labels)");
        aucs.push_back(report.metrics->auc);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.repetitions = aucs.size();
    row.auc = summarize(aucs);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(const std::string& path, SweepParam param, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << (param == SweepParam::k ? "k" : "sampling_ratio") << ",auc_mean,auc_std,repetitions,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << format_double(r.value) << ',' << format_double(r.auc.mean) << ',' << format_double(r.auc.std) << ','
        << r.repetitions << ',' << err << '\n';
  }
}

}  // namespace gsabfd
