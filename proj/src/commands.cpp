#include "madnet/commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "madnet/checkpoint.hpp"
#include "madnet/error.hpp"
#include "madnet/image_io.hpp"
#include "madnet/training.hpp"

namespace madnet {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

std::string numbered(const std::string& prefix, int i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return prefix + buf + ext;
}

std::vector<Point> read_hints(const fs::path& path) {
  std::vector<Point> out;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open hints file " + path.string());
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#') continue;
    int x = 0;
    int y = 0;
    char comma = 0;
    std::istringstream ss(line);
    if (!(ss >> x >> comma >> y) || comma != ',') {
      throw DataError(path.string() + ":" + std::to_string(lineNo) + ": expected `x,y`");
    }
    out.push_back({x, y});
  }
  return out;
}

fs::path require_manifest(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("no manifest given (use --manifest or dataset.manifest)");
  return cfg.manifest;
}

Checkpoint load_for(const RunConfig& cfg, const fs::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  validate(ck.spec);
  (void)cfg;
  return ck;
}

}  // namespace

fs::path run_synth(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < cfg.synthCount; ++i) {
    SyntheticConfig sc = cfg.synth;
    sc.seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i);
    const AnnotatedImage img = synth_generate(sc);
    ManifestEntry e{cfg.out / numbered("img_", i, ".ppm"), cfg.out / numbered("label_", i, ".pgm"),
                    cfg.out / numbered("mask_", i, ".pgm")};
    write_ppm(e.image, img.rgb);
    write_binary_raster(*e.label, img.labels);
    write_binary_raster(*e.mask, img.fovMask);
    std::ofstream hints(e.image.string() + ".hints", std::ios::trunc);
    for (const Point& p : img.hardNegativeHints) hints << p.x << ',' << p.y << '\n';
    if (!hints) throw DataError("cannot write hints for " + e.image.string());
    entries.push_back(std::move(e));
  }
  const fs::path manifest = cfg.out / "manifest.txt";
  write_manifest(manifest, entries);
  log << "wrote " << cfg.synthCount << " synthetic images and " << manifest.string() << '\n';
  return manifest;
}

std::vector<AnnotatedImage> load_corpus(const std::vector<ManifestEntry>& entries, const MaskConfig& mask,
                                        bool requireLabels) {
  if (requireLabels) {
    std::string missing;
    for (const ManifestEntry& e : entries) {
      if (!e.label) missing += (missing.empty() ? "" : ", ") + e.image.string();
    }
    if (!missing.empty()) throw DataError("unlabeled manifest entries: " + missing);
  }
  std::vector<AnnotatedImage> out;
  for (const ManifestEntry& e : entries) {
    AnnotatedImage img;
    if (e.label) {
      img = load_annotated(e.image, *e.label, e.mask, mask);
    } else {
      img.name = e.image.string();
      img.rgb = read_image(e.image);
      img.fovMask = e.mask ? read_binary_raster(*e.mask) : compute_mask(img.rgb, mask);
      img.labels = BinaryRaster(img.rgb.width(), img.rgb.height());
    }
    const fs::path hints = e.image.string() + ".hints";
    if (fs::exists(hints)) img.hardNegativeHints = read_hints(hints);
    out.push_back(std::move(img));
  }
  return out;
}

fs::path run_train(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const auto entries = read_manifest(require_manifest(cfg));
  if (entries.empty()) throw DataError("manifest lists no images");
  std::vector<AnnotatedImage> all = load_corpus(entries, cfg.mask, true);
  ensure_dir(cfg.out);

  const std::vector<int> valIdx = all.size() > 1 ? split_validation(static_cast<int>(all.size()), cfg.validationFraction, cfg.seed)
                                                 : std::vector<int>{};
  std::vector<AnnotatedImage> trainImages;
  std::vector<AnnotatedImage> valImages;
  for (int i = 0; i < static_cast<int>(all.size()); ++i) {
    if (std::binary_search(valIdx.begin(), valIdx.end(), i)) valImages.push_back(std::move(all[i]));
    else trainImages.push_back(std::move(all[i]));
  }

  const NetworkSpec spec = network_spec(cfg);
  const int side = spec.input_side();
  const SampleCatalog catalog = build_catalog(trainImages, catalog_config(cfg));
  BatchSampler sampler(trainImages, catalog, sampler_config(cfg, side), cfg.seed + 17);
  log << "catalog: " << catalog.maCenters.size() << " MA centers, " << catalog.nonMaCenters.size()
      << " non-MA centers from " << trainImages.size() << " training images\n";

  std::vector<Window> validation;
  if (!valImages.empty() && cfg.validationWindows > 0) {
    try {
      CatalogConfig vc = catalog_config(cfg);
      vc.seed = cfg.seed + 1;
      const SampleCatalog valCatalog = build_catalog(valImages, vc);
      SamplerConfig sc = sampler_config(cfg, side);
      sc.batchSize = cfg.validationWindows;
      BatchSampler valSampler(valImages, valCatalog, sc, cfg.seed + 2);
      validation = valSampler.next_batch();
    } catch (const DataError& e) {
      log << "validation disabled: " << e.what() << '\n';
    }
  }

  SeededRng initRng(cfg.seed);
  NetworkState initial = init_state(spec, initRng);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const TrainResult result = train(spec, std::move(initial), [&] { return sampler.next_batch(); }, cfg.optimizer, tc,
                                   validation);

  const fs::path logPath = cfg.out / "train_log.csv";
  {
    std::ofstream out(logPath, std::ios::trunc);
    out << "batch,t,loss,lr,momentum\n";
    for (const auto& e : result.log) out << format_log_line(e) << '\n';
    if (!out) throw DataError("cannot write " + logPath.string());
  }
  {
    std::ofstream out(cfg.out / "validation.csv", std::ios::trunc);
    out << "batch,se,sp\n";
    for (const auto& v : result.validation) {
      out << v.batch << ',' << format_metric(v.report.sensitivity) << ',' << format_metric(v.report.specificity) << '\n';
    }
  }
  const fs::path ckpt = cfg.out / "model.ckpt";
  save_checkpoint(ckpt, spec, result.state);
  if (result.failure) {
    throw NumericError("training stopped at " + *result.failure + "; last good checkpoint kept at " + ckpt.string());
  }
  if (!result.log.empty()) log << "final loss " << result.log.back().loss << '\n';
  if (!result.validation.empty()) {
    const auto& v = result.validation.back().report;
    log << "validation SE " << format_metric(v.sensitivity) << " SP " << format_metric(v.specificity) << '\n';
  }
  log << "wrote " << ckpt.string() << '\n';
  return ckpt;
}

DetectionResult run_predict(const RunConfig& cfg, const fs::path& image, const fs::path& checkpoint, std::ostream& log) {
  const Checkpoint ck = load_for(cfg, checkpoint);
  const Image rgb = read_image(image);
  const DetectionResult r = detect(rgb, ck.state, ck.spec, detection_config(cfg, ck.spec.input_side()));
  ensure_dir(cfg.out);
  const std::string stem = image.stem().string();
  write_probability_map(cfg.out / (stem + ".map"), r.map);
  write_probability_pgm(cfg.out / (stem + "_prob.pgm"), r.map);
  write_regions(cfg.out / (stem + "_regions.txt"), image.string(), r.regions);
  log << image.string() << ": " << r.regions.size() << " regions\n";
  return r;
}

EvaluationReport evaluate_maps(const std::vector<AnnotatedImage>& images, const std::vector<ProbabilityMap>& maps,
                               const RunConfig& cfg) {
  if (images.empty()) throw DataError("evaluation needs at least one image");
  if (images.size() != maps.size()) throw DataError("evaluation: image and map counts differ");
  EvaluationReport report;
  std::vector<const ProbabilityMap*> mp;
  std::vector<const BinaryRaster*> lp;
  std::vector<const BinaryRaster*> kp;
  std::vector<double> imageScores;
  std::vector<int> imageTruth;
  const DecisionRule rule{cfg.minRegions};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const AnnotatedImage& img = images[i];
    require_same_size(maps[i], img.labels, img.name + " map vs label");
    const std::vector<Region> regions = postprocess(maps[i], cfg.postprocess);
    ImageEvaluation ev;
    ev.name = img.name;
    ev.counts = confusion(regions_to_raster(regions, img.labels.width, img.labels.height), img.labels, img.fovMask);
    ev.regions = static_cast<int>(regions.size());
    ev.decision = image_decision(regions, rule);
    ev.truth = std::find(img.labels.data.begin(), img.labels.data.end(), 1) != img.labels.data.end();
    ev.score = image_score(regions);
    report.pooled += ev.counts;
    imageScores.push_back(ev.score);
    imageTruth.push_back(ev.truth ? 1 : 0);
    report.images.push_back(ev);
    mp.push_back(&maps[i]);
    lp.push_back(&img.labels);
    kp.push_back(&img.fovMask);
  }
  report.pixelRoc = roc_curve(mp, lp, kp);
  const long positives = std::count(imageTruth.begin(), imageTruth.end(), 1);
  if (positives > 0 && positives < static_cast<long>(imageTruth.size())) {
    report.imageAuc = roc_curve(imageScores, imageTruth).auc;
  }
  std::vector<double> thresholds = cfg.frocThresholds;
  std::sort(thresholds.begin(), thresholds.end());
  std::vector<std::vector<std::vector<Region>>> detections(thresholds.size());
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    PostprocessConfig pc = cfg.postprocess;
    pc.probThreshold = thresholds[t];
    for (const ProbabilityMap& m : maps) detections[t].push_back(postprocess(m, pc));
  }
  report.froc = froc(thresholds, detections, lp);
  return report;
}

std::string format_report(const EvaluationReport& report, const RunConfig& cfg) {
  std::ostringstream out;
  const MetricsReport m = metrics(report.pooled);
  char buf[160];
  out << "images: " << report.images.size() << '\n';
  out << "pixel-level (threshold " << cfg.postprocess.probThreshold << ", accepted regions)\n";
  out << "  TP " << report.pooled.tp << "  FP " << report.pooled.fp << "  FN " << report.pooled.fn << "  TN "
      << report.pooled.tn << '\n';
  out << "  SE " << format_metric(m.sensitivity) << "  SP " << format_metric(m.specificity) << "  PRED "
      << format_metric(m.predictivity) << "  AC " << format_metric(m.accuracy) << '\n';
  std::snprintf(buf, sizeof buf, "pixel-level AUC %.4f\n", report.pixelRoc.auc);
  out << buf;
  out << "image-level AUC " << format_metric(report.imageAuc) << '\n';
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& im : report.images) {
    if (im.decision && im.truth) ++tp;
    else if (im.decision) ++fp;
    else if (im.truth) ++fn;
    else ++tn;
  }
  const MetricsReport im = metrics({tp, fp, tn, fn});
  out << "image-level decisions (DR iff >= " << cfg.minRegions << " regions): SE " << format_metric(im.sensitivity)
      << "  SP " << format_metric(im.specificity) << "  AC " << format_metric(im.accuracy) << '\n';
  out << "FROC (threshold, avg FP/image, SE)\n";
  for (const auto& p : report.froc) {
    std::snprintf(buf, sizeof buf, "  %.4f  %.4f  %.4f\n", p.threshold, p.averageFalsePositives, p.sensitivity);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "FROC SE at <= 2 FP/image: %.4f\n", sensitivity_at(report.froc, 2.0));
  out << buf;
  return out.str();
}

void write_report(const EvaluationReport& report, const RunConfig& cfg, const fs::path& dir) {
  ensure_dir(dir);
  {
    std::ofstream out(dir / "metrics.txt", std::ios::trunc);
    out << format_report(report, cfg);
    if (!out) throw DataError("cannot write metrics.txt");
  }
  write_roc_csv(dir / "roc.csv", report.pixelRoc);
  write_froc_csv(dir / "froc.csv", report.froc);
  std::ofstream out(dir / "per_image.csv", std::ios::trunc);
  out << "image,tp,fp,fn,tn,se,sp,pred,ac,regions,decision,truth\n";
  for (const auto& im : report.images) {
    const MetricsReport m = metrics(im.counts);
    out << im.name << ',' << im.counts.tp << ',' << im.counts.fp << ',' << im.counts.fn << ',' << im.counts.tn << ','
        << format_metric(m.sensitivity) << ',' << format_metric(m.specificity) << ',' << format_metric(m.predictivity)
        << ',' << format_metric(m.accuracy) << ',' << im.regions << ',' << (im.decision ? "DR" : "noDR") << ','
        << (im.truth ? "DR" : "noDR") << '\n';
  }
  if (!out) throw DataError("cannot write per_image.csv");
}

namespace {

std::pair<std::vector<AnnotatedImage>, std::vector<ProbabilityMap>> detect_corpus(const RunConfig& cfg,
                                                                                    const Checkpoint& ck,
                                                                                    std::ostream& log) {
  const auto entries = read_manifest(require_manifest(cfg));
  if (entries.empty()) throw DataError("manifest lists no images");
  std::vector<AnnotatedImage> images = load_corpus(entries, cfg.mask, true);
  std::vector<ProbabilityMap> maps;
  DetectionConfig dc = detection_config(cfg, ck.spec.input_side());
  for (const AnnotatedImage& img : images) {
    const BinaryRaster candidates = color_prefilter(img.rgb, img.fovMask, dc.prefilter);
    maps.push_back(sliding_window_inference(img.rgb, candidates, ck.state, ck.spec, dc.inference));
    log << img.name << ": map done\n";
  }
  return {std::move(images), std::move(maps)};
}

}  // namespace

EvaluationReport run_evaluate(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  const Checkpoint ck = load_for(cfg, checkpoint);
  const auto [images, maps] = detect_corpus(cfg, ck, log);
  EvaluationReport report = evaluate_maps(images, maps, cfg);
  write_report(report, cfg, cfg.out);
  log << format_report(report, cfg);
  return report;
}

double run_roc(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  const Checkpoint ck = load_for(cfg, checkpoint);
  const auto [images, maps] = detect_corpus(cfg, ck, log);
  std::vector<const ProbabilityMap*> mp;
  std::vector<const BinaryRaster*> lp;
  std::vector<const BinaryRaster*> kp;
  for (std::size_t i = 0; i < images.size(); ++i) {
    mp.push_back(&maps[i]);
    lp.push_back(&images[i].labels);
    kp.push_back(&images[i].fovMask);
  }
  const RocCurve roc = roc_curve(mp, lp, kp);
  ensure_dir(cfg.out);
  write_roc_csv(cfg.out / "roc.csv", roc);
  char buf[64];
  std::snprintf(buf, sizeof buf, "pixel-level AUC %.4f\n", roc.auc);
  log << buf;
  return roc.auc;
}

}  // namespace madnet
