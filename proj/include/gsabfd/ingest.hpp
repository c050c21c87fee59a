#pragma once

// Raw vibration records: CSV and MAT-file level 5 loading, fixed-width slicing,
// mixed normal/fault dataset assembly and a deterministic synthetic generator.

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gsabfd/common.hpp"

namespace gsabfd {

struct RawSignal {
  std::vector<double> samples;
  double sample_rate = 12000.0;
  Label label = Label::normal;
  std::optional<double> fault_diameter;  // mm
  std::string source;

  void validate() const {
    if (samples.empty()) throw Error(ErrorCategory::range, "signal '" + source + "' is empty");
    if (!(sample_rate > 0.0)) throw Error(ErrorCategory::range, "sample rate must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (!std::isfinite(samples[i]))
        throw Error(ErrorCategory::numeric,
                    "non-finite sample at index " + std::to_string(i) + " in '" + source + "'");
  }
};

struct Window {
  std::vector<double> values;
  Label label = Label::normal;
  std::size_t source_offset = 0;
  std::string source;
};

struct WindowSet {
  std::vector<Window> windows;
  std::map<Label, std::size_t> counts;
  std::uint64_t assembly_seed = 0;

  std::size_t size() const { return windows.size(); }
  std::vector<Label> labels() const {
    std::vector<Label> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(w.label);
    return out;
  }
};

// ---------------------------------------------------------------------------
// CSV

/// One value per line; an optional single header line is skipped.
inline RawSignal load_csv(const std::string& path, Label label = Label::normal,
                          double sample_rate = 12000.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  RawSignal sig;
  sig.sample_rate = sample_rate;
  sig.label = label;
  sig.source = path;
  std::string line;
  std::size_t row = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++row;
    auto field = trim(line);
    if (field.empty()) continue;
    double v = 0.0;
    if (!parse_double(field, v)) {
      if (!seen_content) {
        seen_content = true;  // header line
        continue;
      }
      throw Error(ErrorCategory::parse, "'" + path + "' row " + std::to_string(row) +
                                            ": non-numeric value '" + std::string(field) + "'");
    }
    if (!std::isfinite(v))
      throw Error(ErrorCategory::numeric,
                  "'" + path + "' row " + std::to_string(row) + ": non-finite value");
    seen_content = true;
    sig.samples.push_back(v);
  }
  if (sig.samples.empty()) throw Error(ErrorCategory::format, "'" + path + "' contains no samples");
  return sig;
}

inline void write_signal_csv(const std::string& path, const RawSignal& sig,
                             std::string_view header = "value") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << header << '\n';
  for (double v : sig.samples) out << format_double(v) << '\n';
}

// ---------------------------------------------------------------------------
// MAT-file level 5 (uncompressed subset)

namespace mat5 {

enum : std::uint32_t {
  miINT8 = 1, miUINT8 = 2, miINT16 = 3, miUINT16 = 4, miINT32 = 5, miUINT32 = 6,
  miSINGLE = 7, miDOUBLE = 9, miINT64 = 12, miUINT64 = 13, miMATRIX = 14,
  miCOMPRESSED = 15, miUTF8 = 16
};
constexpr std::uint32_t mxDOUBLE_CLASS = 6;
constexpr std::uint32_t kComplexFlag = 0x800;

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, bool big_endian)
      : bytes_(bytes), big_endian_(big_endian) {}

  template <class T>
  T read(std::size_t pos) const {
    if (pos + sizeof(T) > bytes_.size())
      throw Error(ErrorCategory::format, "truncated MAT file");
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + pos, sizeof(T));
    if (big_endian_ != (std::endian::native == std::endian::big))
      std::reverse(raw.begin(), raw.end());
    T v;
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
  }

  struct Tag {
    std::uint32_t type = 0;
    std::uint32_t nbytes = 0;
    std::size_t data = 0;  // offset of payload
    std::size_t next = 0;  // offset of the following element
  };

  Tag tag(std::size_t pos, std::size_t limit) const {
    Tag t;
    auto first = read<std::uint32_t>(pos);
    if ((first >> 16) != 0) {  // small data element: payload packed into the tag
      t.type = first & 0xffffu;
      t.nbytes = first >> 16;
      t.data = pos + 4;
      t.next = pos + 8;
    } else {
      t.type = first;
      t.nbytes = read<std::uint32_t>(pos + 4);
      t.data = pos + 8;
      std::size_t span = t.nbytes;
      if (t.type != miCOMPRESSED) span = (span + 7) / 8 * 8;
      t.next = t.data + span;
    }
    if (t.data + t.nbytes > limit) throw Error(ErrorCategory::format, "MAT element overruns its container");
    return t;
  }

  std::vector<double> numeric(const Tag& t) const {
    std::size_t width = 0;
    switch (t.type) {
      case miINT8: case miUINT8: width = 1; break;
      case miINT16: case miUINT16: width = 2; break;
      case miINT32: case miUINT32: case miSINGLE: width = 4; break;
      case miDOUBLE: case miINT64: case miUINT64: width = 8; break;
      default:
        throw Error(ErrorCategory::format, "unsupported MAT numeric type " + std::to_string(t.type));
    }
    std::vector<double> out(t.nbytes / width);
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::size_t p = t.data + i * width;
      switch (t.type) {
        case miINT8: out[i] = static_cast<std::int8_t>(bytes_[p]); break;
        case miUINT8: out[i] = bytes_[p]; break;
        case miINT16: out[i] = read<std::int16_t>(p); break;
        case miUINT16: out[i] = read<std::uint16_t>(p); break;
        case miINT32: out[i] = read<std::int32_t>(p); break;
        case miUINT32: out[i] = read<std::uint32_t>(p); break;
        case miSINGLE: out[i] = read<float>(p); break;
        case miDOUBLE: out[i] = read<double>(p); break;
        case miINT64: out[i] = static_cast<double>(read<std::int64_t>(p)); break;
        case miUINT64: out[i] = static_cast<double>(read<std::uint64_t>(p)); break;
      }
    }
    return out;
  }

  std::string text(const Tag& t) const {
    return std::string(reinterpret_cast<const char*>(bytes_.data() + t.data), t.nbytes);
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  bool big_endian_;
};

}  // namespace mat5

/// Returns the first double matrix whose name contains `var_filter`, flattened column-major.
inline RawSignal load_mat_v5(const std::string& path, const std::string& var_filter = "DE_time",
                             Label label = Label::normal, double sample_rate = 12000.0) {
  using namespace mat5;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 128) throw Error(ErrorCategory::format, "'" + path + "' is too short for a MAT header");

  bool big_endian = false;
  if (bytes[126] == 'I' && bytes[127] == 'M') {
    big_endian = false;
  } else if (bytes[126] == 'M' && bytes[127] == 'I') {
    big_endian = true;
  } else {
    throw Error(ErrorCategory::format, "'" + path + "' has no MAT-file level 5 endian marker");
  }
  Reader rd(bytes, big_endian);
  if (rd.read<std::uint16_t>(124) != 0x0100)
    throw Error(ErrorCategory::format, "'" + path + "' has unsupported MAT version");

  std::vector<std::string> names;
  bool saw_compressed = false;
  std::size_t pos = 128;
  while (pos + 8 <= bytes.size()) {
    auto el = rd.tag(pos, bytes.size());
    pos = el.next;
    if (el.type == miCOMPRESSED) {
      saw_compressed = true;
      continue;
    }
    if (el.type != miMATRIX || el.nbytes == 0) continue;

    const std::size_t end = el.data + el.nbytes;
    auto flags = rd.tag(el.data, end);
    auto dims = rd.tag(flags.next, end);
    auto name_tag = rd.tag(dims.next, end);
    const auto flag_word = rd.read<std::uint32_t>(flags.data);
    const std::uint32_t cls = flag_word & 0xffu;
    const std::string name = rd.text(name_tag);
    names.push_back(name);
    if (name.find(var_filter) == std::string::npos) continue;

    if (cls != mxDOUBLE_CLASS)
      throw Error(ErrorCategory::format, "MAT variable '" + name + "' has non-double storage class " +
                                             std::to_string(cls));
    if (flag_word & kComplexFlag)
      throw Error(ErrorCategory::format, "MAT variable '" + name + "' is complex");
    auto dim_values = rd.numeric(dims);
    double expected = 1.0;
    for (double d : dim_values) expected *= d;
    auto real = rd.tag(name_tag.next, end);
    RawSignal sig;
    sig.samples = rd.numeric(real);
    if (static_cast<double>(sig.samples.size()) != expected)
      throw Error(ErrorCategory::format, "MAT variable '" + name + "' size does not match its dimensions");
    sig.label = label;
    sig.sample_rate = sample_rate;
    sig.source = path + ":" + name;
    sig.validate();
    return sig;
  }
  if (saw_compressed)
    throw Error(ErrorCategory::format, "compressed MAT element unsupported; convert to CSV");
  std::string listing;
  for (const auto& n : names) listing += (listing.empty() ? "" : ", ") + n;
  throw Error(ErrorCategory::format, "no MAT variable matching '" + var_filter + "' in '" + path +
                                         "' (available: " + (listing.empty() ? "none" : listing) + ")");
}

/// Dispatches on extension: `.mat` goes to the MAT parser, everything else is CSV.
inline RawSignal load_signal(const std::string& path, Label label,
                             const std::string& var_filter = "DE_time") {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".mat") == 0)
    return load_mat_v5(path, var_filter, label);
  return load_csv(path, label);
}

// ---------------------------------------------------------------------------
// Windowing and assembly

/// Non-overlapping windows; the trailing remainder is dropped.
inline std::vector<Window> slice_windows(const RawSignal& signal, std::size_t width = 300) {
  if (width < 8) throw Error(ErrorCategory::range, "window width must be at least 8");
  if (signal.samples.size() < width)
    throw Error(ErrorCategory::range, "signal of " + std::to_string(signal.samples.size()) +
                                          " samples is shorter than window width " + std::to_string(width));
  const std::size_t count = signal.samples.size() / width;
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Window win;
    auto first = signal.samples.begin() + static_cast<std::ptrdiff_t>(w * width);
    win.values.assign(first, first + static_cast<std::ptrdiff_t>(width));
    win.label = signal.label;
    win.source_offset = w * width;
    win.source = signal.source;
    out.push_back(std::move(win));
  }
  return out;
}

/// First `n_normal` normals followed by `n_fault` faults sampled without replacement,
/// kept in their original relative order.
inline WindowSet assemble_dataset(const std::vector<Window>& normals, const std::vector<Window>& faults,
                                  std::size_t n_normal, std::size_t n_fault, std::uint64_t seed) {
  if (normals.size() < n_normal)
    throw Error(ErrorCategory::range, "need " + std::to_string(n_normal) + " normal windows, have " +
                                          std::to_string(normals.size()));
  if (faults.size() < n_fault)
    throw Error(ErrorCategory::range, "need " + std::to_string(n_fault) + " fault windows, have " +
                                          std::to_string(faults.size()));
  WindowSet set;
  set.assembly_seed = seed;
  set.windows.reserve(n_normal + n_fault);
  for (std::size_t i = 0; i < n_normal; ++i) set.windows.push_back(normals[i]);

  std::vector<std::size_t> pool(faults.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_fault; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_fault));
  std::sort(chosen.begin(), chosen.end());
  for (auto idx : chosen) set.windows.push_back(faults[idx]);
  for (const auto& w : set.windows) ++set.counts[w.label];
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic vibration records

/// Generator constants. Amplitudes are relative to the primary carrier (amplitude 1).
struct SynthParams {
  double sample_rate = 12000.0;
  double carrier_hz = 200.0;
  double second_hz = 630.0;
  double second_amplitude = 0.5;
  double noise_sigma = 0.1;
  double impulse_amplitude = 5.0;
  double resonance_hz = 3000.0;
  double decay_samples = 8.0;
  int jitter_samples = 3;
};

namespace detail {

inline std::vector<double> carrier(std::size_t n, const SynthParams& p, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double ph1 = phase(rng);
  const double ph2 = phase(rng);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / p.sample_rate;
    x[i] = std::sin(2.0 * std::numbers::pi * p.carrier_hz * t + ph1) +
           p.second_amplitude * std::sin(2.0 * std::numbers::pi * p.second_hz * t + ph2);
  }
  return x;
}

inline void add_noise(std::vector<double>& x, double sigma, Rng& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : x) v += noise(rng);
}

}  // namespace detail

/// Normal: two sinusoids plus Gaussian noise. Fault: the same carrier plus a train of
/// exponentially decaying resonance bursts roughly every width/4 samples.
inline std::pair<RawSignal, RawSignal> synth_signals(std::size_t n_normal_windows, std::size_t n_fault_windows,
                                                     std::size_t width, std::uint64_t seed,
                                                     const SynthParams& p = {}) {
  if (n_normal_windows == 0 || n_fault_windows == 0 || width == 0)
    throw Error(ErrorCategory::range, "synthetic counts must be positive");

  RawSignal normal;
  normal.sample_rate = p.sample_rate;
  normal.label = Label::normal;
  normal.source = "synth:normal";
  {
    Rng rng(derive_seed(seed, 0));
    normal.samples = detail::carrier(n_normal_windows * width, p, rng);
    detail::add_noise(normal.samples, p.noise_sigma, rng);
  }

  RawSignal fault;
  fault.sample_rate = p.sample_rate;
  fault.label = Label::inner;
  fault.source = "synth:fault";
  {
    Rng rng(derive_seed(seed, 1));
    const std::size_t n = n_fault_windows * width;
    fault.samples = detail::carrier(n, p, rng);
    const auto period = static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, width / 4));
    std::uniform_int_distribution<std::ptrdiff_t> start(0, period - 1);
    std::uniform_int_distribution<int> jitter(-p.jitter_samples, p.jitter_samples);
    const auto burst = static_cast<std::ptrdiff_t>(std::ceil(8.0 * p.decay_samples));
    for (std::ptrdiff_t at = start(rng); at < static_cast<std::ptrdiff_t>(n); at += period + jitter(rng)) {
      for (std::ptrdiff_t j = 0; j < burst && at + j < static_cast<std::ptrdiff_t>(n); ++j) {
        const double dj = static_cast<double>(j);
        fault.samples[static_cast<std::size_t>(at + j)] +=
            p.impulse_amplitude * std::exp(-dj / p.decay_samples) *
            std::sin(2.0 * std::numbers::pi * p.resonance_hz * dj / p.sample_rate + std::numbers::pi / 2.0);
      }
    }
    detail::add_noise(fault.samples, p.noise_sigma, rng);
  }
  return {std::move(normal), std::move(fault)};
}

}  // namespace gsabfd
