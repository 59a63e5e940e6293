#include "madnet/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "madnet/error.hpp"

namespace madnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(key, value, "a number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad(key, value, "a finite number");
  }
  return out;
}

double real_in(const std::string& key, const std::string& value, double lo, double hi, bool loOpen = false,
               bool hiOpen = false) {
  const double v = parse_number<double>(key, value);
  const bool okLo = loOpen ? v > lo : v >= lo;
  const bool okHi = hiOpen ? v < hi : v <= hi;
  if (!okLo || !okHi) {
    bad(key, value, std::string("a value in ") + (loOpen ? "(" : "[") + std::to_string(lo) + ", " + std::to_string(hi) +
                        (hiOpen ? ")" : "]"));
  }
  return v;
}

long integer_at_least(const std::string& key, const std::string& value, long lo) {
  const long v = parse_number<long>(key, value);
  if (v < lo) bad(key, value, "an integer >= " + std::to_string(lo));
  return v;
}

int odd_positive(const std::string& key, const std::string& value) {
  const long v = integer_at_least(key, value, 1);
  if (v % 2 == 0) bad(key, value, "a positive odd integer");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad(key, value, "true or false");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  if (out.empty()) bad(key, value, "a comma-separated list");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

SamplingGrid parse_rings(const std::string& key, const std::string& value) {
  SamplingGrid grid;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream parts(trim(item));
    std::string a, b, c;
    if (!std::getline(parts, a, ':') || !std::getline(parts, b, ':') || !std::getline(parts, c) ) {
      bad(key, value, "start:end:block triples separated by commas, or auto");
    }
    grid.rings.push_back({parse_number<double>(key, trim(a)), parse_number<double>(key, trim(b)),
                          static_cast<int>(integer_at_least(key, trim(c), 1))});
  }
  if (grid.rings.empty()) bad(key, value, "at least one ring");
  return grid;
}

std::string fmt_rings(const SamplingGrid& g) {
  std::string out;
  for (std::size_t i = 0; i < g.rings.size(); ++i) {
    out += (i ? "," : "") + fmt(g.rings[i].radiusStart) + ":" + fmt(g.rings[i].radiusEnd) + ":" +
           std::to_string(g.rings[i].blockSize);
  }
  return out;
}

const char* transform_name(WindowTransform t) {
  switch (t) {
    case WindowTransform::raw: return "raw";
    case WindowTransform::foveate: return "foveate";
    case WindowTransform::sample: return "sample";
    case WindowTransform::both: return "both";
  }
  return "both";
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Entry>& registry() {
  using K = const std::string&;
  static const std::vector<Entry> entries = {
      {"seed", [](RunConfig& c, K v) { c.seed = parse_number<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"threads", [](RunConfig& c, K v) { c.threads = static_cast<int>(integer_at_least("threads", v, 0)); },
       [](const RunConfig& c) { return std::to_string(c.threads); }},
      {"out", [](RunConfig& c, K v) { c.out = v; }, [](const RunConfig& c) { return c.out.string(); }},

      {"synth.count", [](RunConfig& c, K v) { c.synthCount = static_cast<int>(integer_at_least("synth.count", v, 0)); },
       [](const RunConfig& c) { return std::to_string(c.synthCount); }},
      {"synth.image_size",
       [](RunConfig& c, K v) { c.synth.imageSize = static_cast<int>(integer_at_least("synth.image_size", v, 64)); },
       [](const RunConfig& c) { return std::to_string(c.synth.imageSize); }},
      {"synth.ma_count",
       [](RunConfig& c, K v) { c.synth.maCount = static_cast<int>(integer_at_least("synth.ma_count", v, 0)); },
       [](const RunConfig& c) { return std::to_string(c.synth.maCount); }},
      {"synth.vessel_count",
       [](RunConfig& c, K v) { c.synth.vesselCount = static_cast<int>(integer_at_least("synth.vessel_count", v, 0)); },
       [](const RunConfig& c) { return std::to_string(c.synth.vesselCount); }},
      {"synth.hemorrhage_count",
       [](RunConfig& c, K v) {
         c.synth.hemorrhageCount = static_cast<int>(integer_at_least("synth.hemorrhage_count", v, 0));
       },
       [](const RunConfig& c) { return std::to_string(c.synth.hemorrhageCount); }},
      {"synth.noise", [](RunConfig& c, K v) { c.synth.noiseLevel = real_in("synth.noise", v, 0.0, 0.5); },
       [](const RunConfig& c) { return fmt(c.synth.noiseLevel); }},

      {"network.preset",
       [](RunConfig& c, K v) {
         if (v == "compact") c.preset = NetworkPreset::compact;
         else if (v == "table1") c.preset = NetworkPreset::table1;
         else bad("network.preset", v, "compact or table1");
       },
       [](const RunConfig& c) { return std::string(c.preset == NetworkPreset::table1 ? "table1" : "compact"); }},
      {"network.maxout_pieces",
       [](RunConfig& c, K v) { c.maxoutPieces = static_cast<int>(integer_at_least("network.maxout_pieces", v, 1)); },
       [](const RunConfig& c) { return std::to_string(c.maxoutPieces); }},
      {"network.conv_maps",
       [](RunConfig& c, K v) { c.convMaps = static_cast<int>(integer_at_least("network.conv_maps", v, 1)); },
       [](const RunConfig& c) { return std::to_string(c.convMaps); }},
      {"network.fc_units",
       [](RunConfig& c, K v) { c.fcUnits = static_cast<int>(integer_at_least("network.fc_units", v, 1)); },
       [](const RunConfig& c) { return std::to_string(c.fcUnits); }},
      {"network.input_dropout",
       [](RunConfig& c, K v) { c.drops.input = real_in("network.input_dropout", v, 0.0, 1.0, false, true); },
       [](const RunConfig& c) { return fmt(c.drops.input); }},
      {"network.conv_dropout",
       [](RunConfig& c, K v) {
         auto list = parse_list("network.conv_dropout", v);
         for (double p : list) {
           if (!(p >= 0.0 && p < 1.0)) bad("network.conv_dropout", v, "probabilities in [0, 1)");
         }
         if (list.size() != 3) bad("network.conv_dropout", v, "three probabilities, one per conv stage");
         c.drops.conv = list;
       },
       [](const RunConfig& c) { return fmt_list(c.drops.conv); }},
      {"network.fc_dropout",
       [](RunConfig& c, K v) { c.drops.fullyConnected = real_in("network.fc_dropout", v, 0.0, 1.0, false, true); },
       [](const RunConfig& c) { return fmt(c.drops.fullyConnected); }},

      {"network.center_input",
       [](RunConfig& c, K v) { c.centerInput = parse_bool("network.center_input", v); },
       [](const RunConfig& c) { return std::string(c.centerInput ? "true" : "false"); }},

      {"optimizer.epsilon0",
       [](RunConfig& c, K v) { c.optimizer.epsilon0 = real_in("optimizer.epsilon0", v, 0.0, 1e6, true); },
       [](const RunConfig& c) { return fmt(c.optimizer.epsilon0); }},
      {"optimizer.decay_f",
       [](RunConfig& c, K v) { c.optimizer.decayFactor = real_in("optimizer.decay_f", v, 0.0, 1.0, true); },
       [](const RunConfig& c) { return fmt(c.optimizer.decayFactor); }},
      {"optimizer.m_i",
       [](RunConfig& c, K v) { c.optimizer.momentumInitial = real_in("optimizer.m_i", v, 0.0, 1.0, false, true); },
       [](const RunConfig& c) { return fmt(c.optimizer.momentumInitial); }},
      {"optimizer.m_f",
       [](RunConfig& c, K v) { c.optimizer.momentumFinal = real_in("optimizer.m_f", v, 0.0, 1.0, false, true); },
       [](const RunConfig& c) { return fmt(c.optimizer.momentumFinal); }},
      {"optimizer.T", [](RunConfig& c, K v) { c.optimizer.rampSteps = integer_at_least("optimizer.T", v, 1); },
       [](const RunConfig& c) { return std::to_string(c.optimizer.rampSteps); }},
      {"optimizer.max_norm_c",
       [](RunConfig& c, K v) { c.optimizer.maxNorm = real_in("optimizer.max_norm_c", v, 0.0, 1e12, true); },
       [](const RunConfig& c) { return fmt(c.optimizer.maxNorm); }},
      {"optimizer.batch_size",
       [](RunConfig& c, K v) { c.optimizer.batchSize = static_cast<int>(integer_at_least("optimizer.batch_size", v, 1)); },
       [](const RunConfig& c) { return std::to_string(c.optimizer.batchSize); }},
      {"optimizer.momentum_ramp",
       [](RunConfig& c, K v) {
         if (v == "standard") c.optimizer.ramp = MomentumRamp::standard;
         else if (v == "paper") c.optimizer.ramp = MomentumRamp::paper;
         else bad("optimizer.momentum_ramp", v, "standard or paper");
       },
       [](const RunConfig& c) {
         return std::string(c.optimizer.ramp == MomentumRamp::paper ? "paper" : "standard");
       }},

      {"foveation.r0",
       [](RunConfig& c, K v) {
         if (v == "auto") c.fovealRadius.reset();
         else c.fovealRadius = real_in("foveation.r0", v, 0.0, 1e6);
       },
       [](const RunConfig& c) { return c.fovealRadius ? fmt(*c.fovealRadius) : std::string("auto"); }},
      {"foveation.sigma_slope",
       [](RunConfig& c, K v) { c.sigmaSlope = real_in("foveation.sigma_slope", v, 0.0, 100.0); },
       [](const RunConfig& c) { return fmt(c.sigmaSlope); }},
      {"sampling.rings",
       [](RunConfig& c, K v) {
         if (v == "auto") c.rings.reset();
         else c.rings = parse_rings("sampling.rings", v);
       },
       [](const RunConfig& c) { return c.rings ? fmt_rings(*c.rings) : std::string("auto"); }},

      {"dataset.manifest", [](RunConfig& c, K v) { c.manifest = v; },
       [](const RunConfig& c) { return c.manifest.string(); }},
      {"dataset.ma_ratio", [](RunConfig& c, K v) { c.maRatio = real_in("dataset.ma_ratio", v, 0.0, 1e6); },
       [](const RunConfig& c) { return fmt(c.maRatio); }},
      {"dataset.hard_negative_fraction",
       [](RunConfig& c, K v) { c.hardNegativeFraction = real_in("dataset.hard_negative_fraction", v, 0.0, 1.0); },
       [](const RunConfig& c) { return fmt(c.hardNegativeFraction); }},
      {"dataset.validation_fraction",
       [](RunConfig& c, K v) {
         c.validationFraction = real_in("dataset.validation_fraction", v, 0.0, 1.0, false, true);
       },
       [](const RunConfig& c) { return fmt(c.validationFraction); }},
      {"dataset.ma_fraction",
       [](RunConfig& c, K v) { c.maFraction = real_in("dataset.ma_fraction", v, 0.0, 1.0, true, true); },
       [](const RunConfig& c) { return fmt(c.maFraction); }},
      {"dataset.rotate", [](RunConfig& c, K v) { c.rotate = parse_bool("dataset.rotate", v); },
       [](const RunConfig& c) { return std::string(c.rotate ? "true" : "false"); }},

      {"train.batches", [](RunConfig& c, K v) { c.train.batches = integer_at_least("train.batches", v, 0); },
       [](const RunConfig& c) { return std::to_string(c.train.batches); }},
      {"train.eval_interval",
       [](RunConfig& c, K v) { c.train.evalInterval = integer_at_least("train.eval_interval", v, 1); },
       [](const RunConfig& c) { return std::to_string(c.train.evalInterval); }},
      {"train.chunk", [](RunConfig& c, K v) { c.train.chunk = static_cast<int>(integer_at_least("train.chunk", v, 1)); },
       [](const RunConfig& c) { return std::to_string(c.train.chunk); }},
      {"train.validation_windows",
       [](RunConfig& c, K v) {
         c.validationWindows = static_cast<int>(integer_at_least("train.validation_windows", v, 0));
       },
       [](const RunConfig& c) { return std::to_string(c.validationWindows); }},

      {"detection.mask_threshold",
       [](RunConfig& c, K v) { c.mask.luminanceThreshold = real_in("detection.mask_threshold", v, 0.0, 1.0); },
       [](const RunConfig& c) { return fmt(c.mask.luminanceThreshold); }},
      {"detection.median_size", [](RunConfig& c, K v) { c.mask.medianSize = odd_positive("detection.median_size", v); },
       [](const RunConfig& c) { return std::to_string(c.mask.medianSize); }},
      {"detection.erosion_radius",
       [](RunConfig& c, K v) { c.mask.erosionRadius = static_cast<int>(integer_at_least("detection.erosion_radius", v, 0)); },
       [](const RunConfig& c) { return std::to_string(c.mask.erosionRadius); }},
      {"detection.kappa", [](RunConfig& c, K v) { c.prefilter.kappa = real_in("detection.kappa", v, -100.0, 100.0); },
       [](const RunConfig& c) { return fmt(c.prefilter.kappa); }},
      {"detection.neighborhood",
       [](RunConfig& c, K v) { c.prefilter.neighborhood = odd_positive("detection.neighborhood", v); },
       [](const RunConfig& c) { return std::to_string(c.prefilter.neighborhood); }},
      {"detection.smoothing", [](RunConfig& c, K v) { c.prefilter.smoothing = odd_positive("detection.smoothing", v); },
       [](const RunConfig& c) { return std::to_string(c.prefilter.smoothing); }},
      {"detection.prob_threshold",
       [](RunConfig& c, K v) {
         c.postprocess.probThreshold = real_in("detection.prob_threshold", v, 0.0, 1.0, true, true);
       },
       [](const RunConfig& c) { return fmt(c.postprocess.probThreshold); }},
      {"detection.max_area",
       [](RunConfig& c, K v) { c.postprocess.maxArea = static_cast<int>(integer_at_least("detection.max_area", v, 1)); },
       [](const RunConfig& c) { return std::to_string(c.postprocess.maxArea); }},
      {"detection.min_convexity",
       [](RunConfig& c, K v) { c.postprocess.minConvexity = real_in("detection.min_convexity", v, 0.0, 1.0); },
       [](const RunConfig& c) { return fmt(c.postprocess.minConvexity); }},
      {"detection.transform",
       [](RunConfig& c, K v) {
         if (v == "raw") c.transform = WindowTransform::raw;
         else if (v == "foveate") c.transform = WindowTransform::foveate;
         else if (v == "sample") c.transform = WindowTransform::sample;
         else if (v == "both") c.transform = WindowTransform::both;
         else bad("detection.transform", v, "raw, foveate, sample or both");
       },
       [](const RunConfig& c) { return std::string(transform_name(c.transform)); }},

      {"evaluation.min_regions",
       [](RunConfig& c, K v) { c.minRegions = static_cast<int>(integer_at_least("evaluation.min_regions", v, 1)); },
       [](const RunConfig& c) { return std::to_string(c.minRegions); }},
      {"evaluation.froc_thresholds",
       [](RunConfig& c, K v) {
         auto list = parse_list("evaluation.froc_thresholds", v);
         for (double t : list) {
           if (!(t > 0.0 && t < 1.0)) bad("evaluation.froc_thresholds", v, "thresholds in (0, 1)");
         }
         c.frocThresholds = list;
       },
       [](const RunConfig& c) { return fmt_list(c.frocThresholds); }},
  };
  return entries;
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Entry& e : registry()) {
    if (e.key == key) {
      e.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(ss, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineNo) + ": expected `key = value`");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str(), path.string());
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  cfg.optimizer.validate();
  const NetworkSpec spec = network_spec(cfg);
  sampling_grid(cfg, spec.input_side()).validate(spec.input_side());
  if (cfg.synth.imageSize < 64) throw ConfigError("synth.image_size must be >= 64");
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : registry()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : registry()) keys.push_back(e.key);
  return keys;
}

NetworkSpec network_spec(const RunConfig& cfg) {
  ArchitectureConfig arch = cfg.preset == NetworkPreset::table1
                                ? table1_architecture(129, cfg.maxoutPieces, cfg.drops)
                                : compact_architecture(cfg.convMaps, cfg.fcUnits, cfg.maxoutPieces, cfg.drops);
  arch.centerInput = cfg.centerInput;
  return build_network(arch);
}

FoveationConfig foveation_config(const RunConfig& cfg, int windowSide) {
  FoveationConfig f = default_foveation(windowSide);
  if (cfg.fovealRadius) f.fovealRadius = *cfg.fovealRadius;
  f.sigmaSlope = cfg.sigmaSlope;
  return f;
}

SamplingGrid sampling_grid(const RunConfig& cfg, int windowSide) {
  return cfg.rings ? *cfg.rings : default_sampling_grid(windowSide);
}

DetectionConfig detection_config(const RunConfig& cfg, int windowSide) {
  DetectionConfig d;
  d.mask = cfg.mask;
  d.prefilter = cfg.prefilter;
  d.postprocess = cfg.postprocess;
  d.inference.transform = cfg.transform;
  d.inference.foveation = foveation_config(cfg, windowSide);
  d.inference.sampling = sampling_grid(cfg, windowSide);
  return d;
}

CatalogConfig catalog_config(const RunConfig& cfg) {
  CatalogConfig c;
  c.nonMaPerMa = cfg.maRatio;
  c.hardNegativeFraction = cfg.hardNegativeFraction;
  c.prefilter = cfg.prefilter;
  c.seed = cfg.seed;
  return c;
}

SamplerConfig sampler_config(const RunConfig& cfg, int windowSide) {
  SamplerConfig s;
  s.batchSize = cfg.optimizer.batchSize;
  s.maFraction = cfg.maFraction;
  s.windowSide = windowSide;
  s.foveation = foveation_config(cfg, windowSide);
  s.sampling = sampling_grid(cfg, windowSide);
  s.rotate = cfg.rotate;
  return s;
}

}  // namespace madnet
