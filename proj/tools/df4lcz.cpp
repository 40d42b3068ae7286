// df4lcz command-line tool.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "df4lcz/df4lcz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace df4lcz;

namespace {

/// Raised for configuration problems that are the caller's fault.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Gradient check ran fine but found a mismatch.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json default_config() {
  const TrainConfig t;
  const ExtractOptions e;
  return {
      {"format_version", 1},
      {"seed", 0},
      {"threads", 1},
      {"data", {{"manifest", ""}, {"classes", 0}, {"reflectance_scale", kReflectanceScale}}},
      {"graph", {{"k", 8}, {"bandwidth", nullptr}}},
      {"synth", {{"task", "spectral"}, {"classes", 4}, {"samples_per_class", 100}, {"noise_sigma", 0.05}}},
      {"train",
       {{"batch_size", t.batch_size},
        {"max_epochs", t.max_epochs},
        {"lr", t.lr},
        {"lr_decay_factor", t.lr_decay_factor},
        {"lr_patience", t.lr_patience},
        {"early_stop_patience", t.early_stop_patience},
        {"alpha", t.alpha},
        {"augment", t.augment}}},
      {"model", {{"resnet", {{"stem", 64}, {"blocks", {64, 128, 256}}}}, {"gcn", {{"hidden", 32}, {"layers", 3}}}}},
      {"extract",
       {{"per_polygon", e.per_polygon},
        {"overlap_min", e.overlap_min},
        {"city", e.city},
        {"attempts_per_sample", e.attempts_per_sample}}},
      {"split", {{"strategy", "sample_pool"}, {"ratios", {0.7, 0.2, 0.1}}}},
      {"fusion", {{"step", 0.1}, {"f1_average", "unweighted"}}},
  };
}

void merge_config(json& base, const json& in, const std::string& where) {
  if (!in.is_object()) throw UsageError("config" + where + " must be an object");
  for (const auto& [k, v] : in.items()) {
    const std::string path = where + "/" + k;
    if (!base.contains(k)) throw UsageError("unknown config key " + path);
    if (base[k].is_object()) {
      merge_config(base[k], v, path);
    } else {
      base[k] = v;
    }
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Flags shared by every subcommand, plus the overrides each one registers.
struct Run {
  std::string name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  std::vector<std::function<void(json&)>> overrides;
  json inputs = json::object();
  json cfg;

  template <class T>
  void flag(CLI::App* app, const std::string& flags, const std::string& pointer, std::optional<T>& slot,
            const std::string& help) {
    app->add_option(flags, slot, help);
    overrides.push_back([pointer, &slot](json& c) {
      if (slot) c[json::json_pointer(pointer)] = *slot;
    });
  }

  fs::path out_dir() const { return fs::path(out); }

  /// Defaults, then the config file, then flags; written to resolved_config.json.
  void resolve() {
    cfg = default_config();
    if (!config_path.empty()) merge_config(cfg, read_json_file(config_path), "");
    if (seed) cfg["seed"] = *seed;
    if (threads) cfg["threads"] = *threads;
    for (const auto& o : overrides) o(cfg);
    if (cfg["threads"].get<std::size_t>() < 1) throw UsageError("--threads must be at least 1");
    json resolved = cfg;
    resolved["command"] = {{"name", name}, {"inputs", inputs}};
    resolved["meta"] = {{"created_utc", utc_now()}};
    fs::create_directories(out_dir());
    write_json(out_dir() / "resolved_config.json", resolved);
  }

  std::uint64_t seed_value() const { return cfg["seed"].get<std::uint64_t>(); }

  TrainConfig train_config() const {
    const auto& t = cfg["train"];
    TrainConfig c;
    c.batch_size = t["batch_size"].get<std::size_t>();
    c.max_epochs = t["max_epochs"].get<std::size_t>();
    c.lr = t["lr"].get<double>();
    c.lr_decay_factor = t["lr_decay_factor"].get<double>();
    c.lr_patience = t["lr_patience"].get<std::size_t>();
    c.early_stop_patience = t["early_stop_patience"].get<std::size_t>();
    c.alpha = t["alpha"].get<double>();
    c.augment = t["augment"].get<bool>();
    c.seed = seed_value();
    c.validate();
    return c;
  }

  LoadOptions load_options() const {
    LoadOptions o;
    o.reflectance_scale = cfg["data"]["reflectance_scale"].get<double>();
    o.graph.k = cfg["graph"]["k"].get<std::size_t>();
    if (!cfg["graph"]["bandwidth"].is_null()) o.graph.bandwidth = cfg["graph"]["bandwidth"].get<double>();
    return o;
  }

  F1Average f1_average() const {
    const auto s = cfg["fusion"]["f1_average"].get<std::string>();
    if (s == "unweighted") return F1Average::unweighted;
    if (s == "support_weighted") return F1Average::support_weighted;
    throw UsageError("fusion.f1_average must be unweighted or support_weighted");
  }

  fs::path manifest() const {
    const auto m = cfg["data"]["manifest"].get<std::string>();
    if (m.empty()) throw UsageError("no manifest given (--data or data.manifest)");
    return m;
  }

  /// Loads the manifest's samples; a class count of 0 means max label + 1.
  Dataset dataset(std::size_t classes = 0) const {
    if (classes == 0) classes = cfg["data"]["classes"].get<std::size_t>();
    if (classes == 0) {
      std::size_t top = 0;
      for (const auto& r : read_manifest(manifest(), {kNumClasses, false})) {
        top = std::max(top, static_cast<std::size_t>(r.lcz_class) + 1);
      }
      classes = std::max<std::size_t>(top, 2);
    }
    return load_dataset(manifest(), classes, load_options());
  }
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n' || c == '\r') {
      out += ' ';
      continue;
    }
    out += c;
  }
  return out;
}

int fail(const std::string& kind, const std::string& msg, int code) {
  std::cerr << "error: kind=" << kind << " msg=\"" << escape(msg) << "\"\n";
  return code;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::domain: return 2;
    case ErrorKind::numeric: return 4;
    case ErrorKind::dimension:
    case ErrorKind::index:
    case ErrorKind::format:
    case ErrorKind::input:
    case ErrorKind::consistency: return 3;
    default: return 1;
  }
}

Split split_flag(const std::string& s) {
  const auto v = parse_split(s);
  if (v == Split::unassigned) throw UsageError("--split must be train, val or test");
  return v;
}

std::vector<const Sample*> nonempty(const Dataset& d, Split s) {
  auto v = d.subset(s);
  if (v.empty()) throw InputError(to_string(s) + " split is empty");
  return v;
}

// ---- subcommands ----------------------------------------------------------

struct SynthArgs {
  std::optional<std::string> task;
  std::optional<std::size_t> classes, samples;
  std::optional<double> noise;
};

void cmd_make_synthetic(Run& run) {
  const auto& s = run.cfg["synth"];
  SynthConfig c;
  c.task = parse_synth_task(s["task"].get<std::string>());
  c.classes = s["classes"].get<std::size_t>();
  c.samples_per_class = s["samples_per_class"].get<std::size_t>();
  c.noise_sigma = s["noise_sigma"].get<double>();
  c.seed = run.seed_value();
  const auto records = synth_generate(c, run.out_dir());
  std::cout << "wrote " << records.size() << " samples to " << (run.out_dir() / "manifest.jsonl").string() << '\n';
}

struct TrainArgs {
  std::string stream;
};

template <class Model>
void train_and_save(Run& run, Model model, const Dataset& data) {
  const auto cfg = run.train_config();
  auto result = train_stream(std::move(model), data, cfg, [](const EpochLog& e) {
    std::printf("epoch %zu train_loss %.6f val_loss %.6f val_oa %.4f lr %.6g\n", e.epoch, e.train_loss, e.val_loss,
                e.val_oa, e.lr);
    std::fflush(stdout);
  });
  write_checkpoint(run.out_dir() / "checkpoint.lczk", to_checkpoint(result.model));
  write_text(run.out_dir() / "train_log.csv", train_log_csv(result.log));
  write_json(run.out_dir() / "train_summary.json", train_summary_json(result.log));
  std::cout << "stop " << to_string(result.log.stop_reason) << " best_epoch " << result.log.best_epoch << '\n';
}

void cmd_train(Run& run, const TrainArgs& a) {
  const auto stream = parse_stream(a.stream);
  const auto data = run.dataset();
  Rng rng = Rng::derive(run.seed_value(), std::string("init/") + to_string(stream));
  const auto& m = run.cfg["model"];
  if (stream == StreamKind::sentinel) {
    ResNet3dConfig rc;
    rc.widths.stem = m["resnet"]["stem"].get<std::size_t>();
    rc.widths.blocks = m["resnet"]["blocks"].get<std::array<std::size_t, 3>>();
    rc.num_classes = data.classes;
    ResNet3d<float> model(rc);
    model.init(rng);
    train_and_save(run, std::move(model), data);
  } else {
    GcnConfig gc;
    gc.hidden = m["gcn"]["hidden"].get<std::size_t>();
    gc.layers = m["gcn"]["layers"].get<std::size_t>();
    gc.num_classes = data.classes;
    GcnModel<float> model(gc);
    model.init(rng);
    train_and_save(run, std::move(model), data);
  }
}

struct EvalArgs {
  std::string checkpoint;
  std::string split = "test";
};

void cmd_eval(Run& run, const EvalArgs& a) {
  const auto ck = read_checkpoint(fs::path(a.checkpoint));
  const auto data = run.dataset(ck.num_classes());
  const auto samples = nonempty(data, split_flag(a.split));
  const Tensor probs = ck.stream == StreamKind::sentinel ? predict_samples(resnet_from_checkpoint(ck), samples)
                                                         : predict_samples(gcn_from_checkpoint(ck), samples);
  const std::size_t C = ck.num_classes();
  ConfusionMatrix cm(C);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    cm.add(samples[i]->label, classify(ProbVector::from_span<float>(probs.data().subspan(i * C, C))));
  }
  const auto report = metrics(cm, run.f1_average());
  json j = to_json(report, cm);
  j["stream"] = to_string(ck.stream);
  j["split"] = a.split;
  write_json(run.out_dir() / "eval.json", j);
  std::printf("oa %.6f kappa %.6f avg_f1 %.6f\n", report.oa, report.kappa, report.avg_f1);
}

struct FuseArgs {
  std::string google, sentinel;
  std::string split = "val";
};

void cmd_fuse_eval(Run& run, const FuseArgs& a) {
  const auto gck = read_checkpoint(fs::path(a.google));
  const auto sck = read_checkpoint(fs::path(a.sentinel));
  if (gck.num_classes() != sck.num_classes()) {
    throw ConsistencyError("class-count mismatch: google checkpoint has " + std::to_string(gck.num_classes()) +
                           ", sentinel checkpoint has " + std::to_string(sck.num_classes()));
  }
  const auto data = run.dataset(gck.num_classes());
  const auto samples = nonempty(data, split_flag(a.split));
  const auto cache = cache_predictions(gcn_from_checkpoint(gck), resnet_from_checkpoint(sck), samples);
  const auto alpha = run.train_config().alpha;
  const auto report = fusion_report(cache, alpha, run.cfg["fusion"]["step"].get<double>(), run.f1_average());
  json j = to_json(report);
  j["split"] = a.split;
  write_json(run.out_dir() / "fusion_report.json", j);
  write_text(run.out_dir() / "sweep.csv", sweep_csv(report.sweep));
  write_json(run.out_dir() / "predictions.json", to_json(cache));
  std::printf("alpha %.3f fused_oa %.6f google_oa %.6f sentinel_oa %.6f\n", alpha, report.fused.oa, report.google.oa,
              report.sentinel.oa);
}

struct SweepArgs {
  std::string predictions;
};

void cmd_sweep_alpha(Run& run, const SweepArgs& a) {
  const auto cache = prediction_cache_from_json(read_json_file(a.predictions));
  const auto rows = sweep_alpha(cache.c_g, cache.c_s, cache.labels, run.cfg["fusion"]["step"].get<double>(),
                                cache.classes, run.f1_average());
  const auto csv = sweep_csv(rows);
  write_text(run.out_dir() / "sweep.csv", csv);
  std::cout << csv;
}

struct GradArgs {
  std::size_t seeds = 10;
};

void cmd_gradcheck(Run& run, const GradArgs& a) {
  if (a.seeds < 1) throw UsageError("--seeds must be at least 1");
  const auto reports = run_gradcheck_suite(a.seeds, run.seed_value());
  json j = json::array();
  bool ok = true;
  for (const auto& r : reports) {
    const bool pass = r.max_rel_error < 1e-4;
    ok = ok && pass;
    std::printf("%-15s max_rel_error %.3e %s\n", r.name.c_str(), r.max_rel_error, pass ? "ok" : "FAIL");
    j.push_back({{"layer", r.name},
                 {"max_rel_error", r.max_rel_error},
                 {"worst_entry", r.worst_entry},
                 {"checked", r.checked},
                 {"skipped_kinks", r.skipped_kinks},
                 {"pass", pass}});
  }
  write_json(run.out_dir() / "gradcheck.json", {{"seeds", a.seeds}, {"tolerance", 1e-4}, {"layers", j}});
  if (!ok) throw CheckFailed("at least one layer exceeds max relative error 1e-4");
}

struct IngestArgs {
  std::string mask, rgb, id;
};

void cmd_ingest_masks(Run& run, const IngestArgs& a) {
  const auto mask = read_lczt_as<std::uint16_t>(fs::path(a.mask));
  const auto rgb = read_lczt_as<std::uint8_t>(fs::path(a.rgb));
  const auto set = ingest_masks(mask, rgb, a.id.empty() ? fs::path(a.mask).stem().string() : a.id);
  const auto graph = build_graph(set, run.load_options().graph);
  write_json(run.out_dir() / "instances.json", to_json(set));
  const std::size_t n = graph.num_nodes();
  json g;
  g["num_nodes"] = n;
  g["features"] = json::array();
  g["adjacency"] = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> f(graph.features.data().begin() + static_cast<long>(i * kNodeFeatures),
                          graph.features.data().begin() + static_cast<long>((i + 1) * kNodeFeatures));
    std::vector<double> row(graph.adjacency.data().begin() + static_cast<long>(i * n),
                            graph.adjacency.data().begin() + static_cast<long>((i + 1) * n));
    g["features"].push_back(f);
    g["adjacency"].push_back(row);
  }
  write_json(run.out_dir() / "graph.json", g);
  std::cout << set.instances.size() << " instances\n";
}

struct ExtractArgs {
  std::string sentinel, google, masks, polygons;
};

void cmd_extract_patches(Run& run, const ExtractArgs& a) {
  const auto& e = run.cfg["extract"];
  ExtractOptions opt;
  opt.per_polygon = e["per_polygon"].get<std::size_t>();
  opt.overlap_min = e["overlap_min"].get<double>();
  opt.city = e["city"].get<std::string>();
  opt.attempts_per_sample = e["attempts_per_sample"].get<std::size_t>();
  RasterPair rasters;
  rasters.sentinel = read_lczt_as<float>(fs::path(a.sentinel));
  rasters.google = read_lczt_as<std::uint8_t>(fs::path(a.google));
  std::optional<U16Tensor> masks;
  if (!a.masks.empty()) {
    masks = read_lczt_as<std::uint16_t>(fs::path(a.masks));
    rasters.masks = &*masks;
  }
  const auto polygons = read_polygons(a.polygons);
  Rng rng = Rng::derive(run.seed_value(), "extract");
  const auto result = extract_patches(rasters, polygons, opt, rng, run.out_dir());
  write_manifest(run.out_dir() / "manifest.jsonl", result.records);
  write_json(run.out_dir() / "extract_report.json", {{"samples", result.records.size()}, {"warnings", result.warnings}});
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "extracted " << result.records.size() << " samples\n";
}

struct SplitArgs {
  std::optional<std::string> strategy;
};

void cmd_split(Run& run, const SplitArgs&) {
  const auto src = run.manifest();
  auto records = read_manifest(src, {kNumClasses, false});
  const auto strategy = parse_split_strategy(run.cfg["split"]["strategy"].get<std::string>());
  const auto r = run.cfg["split"]["ratios"].get<std::array<double, 3>>();
  Rng rng = Rng::derive(run.seed_value(), "split");
  auto result = split_records(std::move(records), strategy, rng, SplitRatios{r[0], r[1], r[2]});
  const auto base = fs::absolute(src).parent_path();
  const auto out = fs::absolute(run.out_dir());
  for (auto& rec : result.records) {
    for (auto* p : {&rec.sentinel_path, &rec.google_path, &rec.mask_path}) {
      if (!p->empty()) *p = fs::proximate(base / *p, out).generic_string();
    }
  }
  write_manifest(run.out_dir() / "manifest.jsonl", result.records);
  json counts = json::object();
  for (const auto s : {Split::train, Split::val, Split::test}) {
    counts[to_string(s)] = std::count_if(result.records.begin(), result.records.end(),
                                         [&](const SampleRecord& x) { return x.split == s; });
  }
  write_json(run.out_dir() / "split_report.json", {{"counts", counts}, {"warnings", result.warnings}});
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "train " << counts["train"] << " val " << counts["val"] << " test " << counts["test"] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-stream local climate zone classifier"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Run>> runs;
  auto sub = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    runs.push_back(std::make_unique<Run>());
    Run& r = *runs.back();
    r.name = name;
    cmd->add_option("--config", r.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", r.seed, "master seed");
    cmd->add_option("--threads", r.threads, "worker cap");
    cmd->add_option("--out", r.out, "output directory")->required();
    return std::pair<CLI::App*, Run*>{cmd, &r};
  };

  SynthArgs synth;
  auto [c_synth, r_synth] = sub("make-synthetic", "generate a synthetic dataset");
  r_synth->flag(c_synth, "--task", "/synth/task", synth.task, "spectral, layout or product");
  c_synth->get_option("--task")->required();
  r_synth->flag(c_synth, "--classes", "/synth/classes", synth.classes, "number of classes");
  r_synth->flag(c_synth, "--samples", "/synth/samples_per_class", synth.samples, "samples per class");
  r_synth->flag(c_synth, "--noise", "/synth/noise_sigma", synth.noise, "spectral noise sigma");

  TrainArgs train;
  std::optional<std::string> data_train;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr;
  auto [c_train, r_train] = sub("train", "train one stream");
  c_train->add_option("--stream", train.stream, "google or sentinel")->required();
  r_train->flag(c_train, "--data", "/data/manifest", data_train, "manifest.jsonl");
  r_train->flag(c_train, "--epochs", "/train/max_epochs", epochs, "maximum epochs");
  r_train->flag(c_train, "--batch-size", "/train/batch_size", batch, "mini-batch size");
  r_train->flag(c_train, "--lr", "/train/lr", lr, "initial learning rate");

  EvalArgs eval;
  std::optional<std::string> data_eval;
  auto [c_eval, r_eval] = sub("eval", "evaluate one frozen stream");
  r_eval->flag(c_eval, "--data", "/data/manifest", data_eval, "manifest.jsonl");
  c_eval->add_option("--checkpoint", eval.checkpoint, "stream checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--split", eval.split, "train, val or test");

  FuseArgs fuse;
  std::optional<std::string> data_fuse;
  std::optional<double> alpha_fuse, step_fuse;
  auto [c_fuse, r_fuse] = sub("fuse-eval", "evaluate the fusion of two frozen streams");
  r_fuse->flag(c_fuse, "--data", "/data/manifest", data_fuse, "manifest.jsonl");
  c_fuse->add_option("--google", fuse.google, "google stream checkpoint")->required()->check(CLI::ExistingFile);
  c_fuse->add_option("--sentinel", fuse.sentinel, "sentinel stream checkpoint")->required()->check(CLI::ExistingFile);
  r_fuse->flag(c_fuse, "--alpha", "/train/alpha", alpha_fuse, "weight of the google stream");
  r_fuse->flag(c_fuse, "--step", "/fusion/step", step_fuse, "alpha sweep step");
  c_fuse->add_option("--split", fuse.split, "train, val or test");

  SweepArgs sweep;
  std::optional<double> step_sweep;
  auto [c_sweep, r_sweep] = sub("sweep-alpha", "alpha sweep from cached predictions");
  c_sweep->add_option("--predictions", sweep.predictions, "predictions.json from fuse-eval")
      ->required()
      ->check(CLI::ExistingFile);
  r_sweep->flag(c_sweep, "--step", "/fusion/step", step_sweep, "alpha step");

  GradArgs grad;
  auto [c_grad, r_grad] = sub("gradcheck", "finite-difference check of every layer");
  c_grad->add_option("--seeds", grad.seeds, "random cases per layer");

  IngestArgs ingest;
  auto [c_ingest, r_ingest] = sub("ingest-masks", "instances and scene graph from one mask raster");
  c_ingest->add_option("--mask", ingest.mask, "u16 instance raster")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--rgb", ingest.rgb, "u8 RGB patch")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--id", ingest.id, "patch id");

  ExtractArgs extract;
  std::optional<double> overlap;
  std::optional<std::size_t> per_polygon;
  auto [c_extract, r_extract] = sub("extract-patches", "cut aligned patches around labelled polygons");
  c_extract->add_option("--sentinel", extract.sentinel, "f32 [H,W,10] raster")->required()->check(CLI::ExistingFile);
  c_extract->add_option("--google", extract.google, "u8 [10H,10W,3] raster")->required()->check(CLI::ExistingFile);
  c_extract->add_option("--masks", extract.masks, "u16 [10H,10W] instance raster")->check(CLI::ExistingFile);
  c_extract->add_option("--polygons", extract.polygons, "polygon JSON")->required()->check(CLI::ExistingFile);
  r_extract->flag(c_extract, "--overlap-min", "/extract/overlap_min", overlap, "minimum polygon coverage");
  r_extract->flag(c_extract, "--per-polygon", "/extract/per_polygon", per_polygon, "samples per polygon");

  SplitArgs split;
  std::optional<std::string> data_split;
  auto [c_split, r_split] = sub("split", "assign train/val/test splits");
  r_split->flag(c_split, "--data", "/data/manifest", data_split, "manifest.jsonl");
  r_split->flag(c_split, "--strategy", "/split/strategy", split.strategy, "sample_pool or polygon_pool");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  Run* run = nullptr;
  for (auto& r : runs) {
    if (app.got_subcommand(r->name)) run = r.get();
  }

  try {
    run->inputs = json::object();
    for (const auto* opt : app.get_subcommand(run->name)->get_options()) {
      if (opt->count() > 0 && opt->get_name() != "--help" && opt->get_name() != "--out") {
        run->inputs[opt->get_name()] = opt->as<std::string>();
      }
    }
    try {
      run->resolve();
    } catch (const json::exception& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
    try {
      const auto& n = run->name;
      if (n == "make-synthetic") cmd_make_synthetic(*run);
      else if (n == "train") cmd_train(*run, train);
      else if (n == "eval") cmd_eval(*run, eval);
      else if (n == "fuse-eval") cmd_fuse_eval(*run, fuse);
      else if (n == "sweep-alpha") cmd_sweep_alpha(*run, sweep);
      else if (n == "gradcheck") cmd_gradcheck(*run, grad);
      else if (n == "ingest-masks") cmd_ingest_masks(*run, ingest);
      else if (n == "extract-patches") cmd_extract_patches(*run, extract);
      else if (n == "split") cmd_split(*run, split);
    } catch (const json::exception& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
  } catch (const UsageError& e) {
    return fail("usage", e.what(), 2);
  } catch (const CheckFailed& e) {
    return fail("gradcheck", e.what(), 1);
  } catch (const Error& e) {
    return fail(std::string(to_string(e.kind())), e.what(), exit_code(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("other", e.what(), 1);
  }
  return 0;
}
