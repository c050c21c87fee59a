#pragma once

// Flat key = value run configuration. Every key can also be overridden by a CLI flag of the
// same name. Lines starting with '#' are comments.

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsabfd/baselines.hpp"
#include "gsabfd/common.hpp"
#include "gsabfd/emd.hpp"
#include "gsabfd/sage.hpp"

namespace gsabfd {

struct RunConfig {
  std::size_t window_width = 300;
  std::size_t n_normal = 800;
  std::size_t n_fault = 60;
  std::string fault_label = "inner";
  std::string var_filter = "DE_time";

  std::size_t k = 20;
  double sampling_ratio = 0.5;
  std::size_t depth = 2;
  std::size_t hidden_dim = 32;
  std::size_t embed_dim = 16;
  std::size_t epochs = 100;
  double lr = 0.003;
  bool weighted_mean = false;
  std::uint64_t seed = 1;
  double contamination = 60.0 / 860.0;

  EemdParams eemd;

  std::size_t baseline_k = 20;
  std::size_t iforest_trees = 256;
  std::size_t iforest_subsample = 256;
  std::size_t repetitions = 10;
  bool timing = true;

  SageHyper sage_hyper(std::uint64_t run_seed) const {
    SageHyper h;
    h.depth = depth;
    h.hidden_dim = hidden_dim;
    h.embed_dim = embed_dim;
    h.k = k;
    h.sampling_ratio = sampling_ratio;
    h.epochs = epochs;
    h.lr = lr;
    h.seed = run_seed;
    h.weighted_mean = weighted_mean;
    return h;
  }

  BaselineConfig baseline(Method m, std::uint64_t run_seed) const {
    BaselineConfig b;
    b.method = m;
    b.k = baseline_k;
    b.trees = iforest_trees;
    b.subsample = iforest_subsample;
    b.ae = AeHyper{hidden_dim, embed_dim, epochs, lr};
    b.seed = run_seed;
    return b;
  }

  void validate() const {
    if (window_width < 8) throw Error(ErrorCategory::range, "window_width must be >= 8");
    sage_hyper(seed).validate();
    eemd.validate();
    if (!(contamination > 0.0 && contamination < 1.0))
      throw Error(ErrorCategory::range, "contamination must lie in (0, 1)");
    if (repetitions < 1) throw Error(ErrorCategory::range, "repetitions must be >= 1");
    parse_label(fault_label);
  }
};

namespace detail {

struct ConfigField {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

inline std::uint64_t parse_size(std::string_view key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size())
    throw Error(ErrorCategory::parse, "config '" + std::string(key) + "': expected a non-negative integer, got '" +
                                          std::string(v) + "'");
  return out;
}

/// Accepts decimals and "a/b" fractions.
inline double parse_real(std::string_view key, std::string_view v) {
  v = trim(v);
  double d = 0.0;
  if (auto slash = v.find('/'); slash != std::string_view::npos) {
    double num = 0.0, den = 0.0;
    if (parse_double(v.substr(0, slash), num) && parse_double(v.substr(slash + 1), den) && den != 0.0) return num / den;
  } else if (parse_double(v, d)) {
    return d;
  }
  throw Error(ErrorCategory::parse, "config '" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCategory::parse, "config '" + std::string(key) + "': expected a boolean, got '" + std::string(v) + "'");
}

#define GSABFD_SIZE_FIELD(name, member)                                                     \
  ConfigField {                                                                             \
    name, [](const RunConfig& c) { return std::to_string(c.member); },                      \
        [](RunConfig& c, std::string_view v) { c.member = parse_size(name, v); }            \
  }
#define GSABFD_REAL_FIELD(name, member)                                                     \
  ConfigField {                                                                             \
    name, [](const RunConfig& c) { return format_double(c.member); },                       \
        [](RunConfig& c, std::string_view v) { c.member = parse_real(name, v); }            \
  }
#define GSABFD_BOOL_FIELD(name, member)                                                     \
  ConfigField {                                                                             \
    name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); },      \
        [](RunConfig& c, std::string_view v) { c.member = parse_bool(name, v); }            \
  }
#define GSABFD_TEXT_FIELD(name, member)                                                     \
  ConfigField {                                                                             \
    name, [](const RunConfig& c) { return c.member; },                                      \
        [](RunConfig& c, std::string_view v) { c.member = std::string(trim(v)); }          \
  }

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      GSABFD_SIZE_FIELD("window_width", window_width),
      GSABFD_SIZE_FIELD("n_normal", n_normal),
      GSABFD_SIZE_FIELD("n_fault", n_fault),
      GSABFD_TEXT_FIELD("fault_label", fault_label),
      GSABFD_TEXT_FIELD("var_filter", var_filter),
      GSABFD_SIZE_FIELD("k", k),
      GSABFD_REAL_FIELD("sampling_ratio", sampling_ratio),
      GSABFD_SIZE_FIELD("depth", depth),
      GSABFD_SIZE_FIELD("hidden_dim", hidden_dim),
      GSABFD_SIZE_FIELD("embed_dim", embed_dim),
      GSABFD_SIZE_FIELD("epochs", epochs),
      GSABFD_REAL_FIELD("lr", lr),
      GSABFD_BOOL_FIELD("weighted_mean", weighted_mean),
      GSABFD_SIZE_FIELD("seed", seed),
      GSABFD_REAL_FIELD("contamination", contamination),
      GSABFD_SIZE_FIELD("eemd_ensemble_size", eemd.ensemble_size),
      GSABFD_REAL_FIELD("eemd_noise_ratio", eemd.noise_ratio),
      GSABFD_SIZE_FIELD("eemd_max_sift_iters", eemd.max_sift_iters),
      GSABFD_REAL_FIELD("eemd_sift_sd_threshold", eemd.sift_sd_threshold),
      GSABFD_SIZE_FIELD("eemd_max_imfs", eemd.max_imfs),
      GSABFD_SIZE_FIELD("baseline_k", baseline_k),
      GSABFD_SIZE_FIELD("iforest_trees", iforest_trees),
      GSABFD_SIZE_FIELD("iforest_subsample", iforest_subsample),
      GSABFD_SIZE_FIELD("repetitions", repetitions),
      GSABFD_BOOL_FIELD("timing", timing),
  };
  return fields;
}

#undef GSABFD_SIZE_FIELD
#undef GSABFD_REAL_FIELD
#undef GSABFD_BOOL_FIELD
#undef GSABFD_TEXT_FIELD

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : detail::config_fields()) keys.push_back(f.key);
  return keys;
}

inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : detail::config_fields())
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  throw Error(ErrorCategory::parse, "unknown config key '" + std::string(key) + "'");
}

inline std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

inline RunConfig parse_config(std::string_view text, RunConfig cfg = {}) {
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCategory::parse, "config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace gsabfd
