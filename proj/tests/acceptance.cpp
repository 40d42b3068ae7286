// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "df4lcz/df4lcz.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace df4lcz;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class T>
BasicTensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += (x = -std::log(1.0 - rng.uniform()));
  for (auto& x : v) x /= s;
  return v;
}

InstanceSet random_instances(Rng& rng, std::size_t n) {
  InstanceSet set;
  set.patch_id = "p";
  for (std::size_t i = 0; i < n; ++i) {
    Instance in;
    in.id = static_cast<std::uint32_t>(i + 1);
    const int w = 2 + static_cast<int>(rng.uniform_int(20)), h = 2 + static_cast<int>(rng.uniform_int(20));
    in.bbox = BBox{static_cast<int>(rng.uniform_int(320 - w)), static_cast<int>(rng.uniform_int(320 - h)), w, h};
    in.centroid = {in.bbox.x + w / 2.0, in.bbox.y + h / 2.0};
    in.mean_rgb = {rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255)};
    set.instances.push_back(in);
  }
  return set;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Test-split accuracy of a trained stream.
template <class Model>
double test_accuracy(const Model& m, const Dataset& d) {
  return evaluate(m, d.subset(Split::test)).oa;
}

EpochCallback progress(const std::string& tag) {
  return [tag](const EpochLog& e) {
    std::printf("  [%s] epoch %zu train_loss %.4f val_loss %.4f val_oa %.4f lr %.3g\n", tag.c_str(), e.epoch,
                e.train_loss, e.val_loss, e.val_oa, e.lr);
    std::fflush(stdout);
  };
}

ResNet3d<float> reduced_resnet(std::size_t classes, std::uint64_t seed) {
  ResNet3dConfig rc;
  rc.widths.stem = 4;
  rc.widths.blocks = {4, 8, 16};
  rc.num_classes = classes;
  ResNet3d<float> m(rc);
  Rng rng = Rng::derive(seed, "init/sentinel");
  m.init(rng);
  return m;
}

GcnModel<float> gcn(std::size_t classes, std::uint64_t seed) {
  GcnConfig gc;
  gc.num_classes = classes;
  GcnModel<float> m(gc);
  Rng rng = Rng::derive(seed, "init/google");
  m.init(rng);
  return m;
}

TrainConfig spectral_train_config(std::uint64_t seed) {
  TrainConfig c;
  c.max_epochs = 30;
  c.seed = seed;
  return c;
}

// ---- criteria ---------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto reports = run_gradcheck_suite(10, 0);
  const double t = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : reports) {
    if (r.max_rel_error >= worst) worst = r.max_rel_error, worst_name = r.name;
  }
  return {worst < 1e-4 && t < 120.0 && reports.size() == 6,
          std::to_string(reports.size()) + " ops x 10 seeds, worst " + fmt("%.2e", worst) + " (" + worst_name + "), " +
              fmt("%.2f", t) + " s"};
}

Outcome conv3d_oracle() {
  double worst = 0.0;
  const std::size_t cases = 12;
  for (std::uint64_t seed = 0; seed < cases; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t kk = 1 + rng.uniform_int(3), s = 1 + rng.uniform_int(2), p = rng.uniform_int(2);
    Shape xs{1 + rng.uniform_int(2), 0, 0, 0, 1 + rng.uniform_int(3)};
    for (int a = 1; a <= 3; ++a) xs[a] = std::max<std::size_t>(kk, 3 + rng.uniform_int(5));
    const auto x = random_tensor<float>(xs, rng);
    const auto k = random_tensor<float>({kk, kk, kk, xs[4], 1 + rng.uniform_int(3)}, rng);
    const auto b = random_tensor<float>({k.dim(4)}, rng);
    const auto y = conv3d_forward(x, k, b, Conv3dGeometry{{s, s, s}, {p, p, p}});
    const auto ref = oracle::conv3d(x, k, b, {long(s), long(s), long(s)}, {long(p), long(p), long(p)});
    if (y.shape() != ref.shape()) return {false, "shape mismatch at case " + std::to_string(seed)};
    worst = std::max(worst, max_abs_diff(y.cast<double>(), ref));
  }
  return {worst < 1e-5, std::to_string(cases) + " shape/stride/padding cases, max abs diff " + fmt("%.2e", worst)};
}

Outcome metric_oracle() {
  double worst = 0.0;
  bool defined_match = true;
  auto cmp = [&](const std::optional<double>& got, double want) {
    if (std::isnan(want) || !got) {
      defined_match = defined_match && std::isnan(want) == !got;
      return;
    }
    worst = std::max(worst, std::abs(*got - want));
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(2000 + seed);
    std::vector<std::vector<std::int64_t>> rows(17, std::vector<std::int64_t>(17));
    for (std::size_t i = 0; i < 17; ++i)
      for (std::size_t j = 0; j < 17; ++j) rows[i][j] = static_cast<std::int64_t>(rng.uniform_int(i == j ? 200 : 30));
    if (seed % 4 == 1) {  // a class never present and never predicted
      const std::size_t c = rng.uniform_int(17);
      for (std::size_t j = 0; j < 17; ++j) rows[c][j] = rows[j][c] = 0;
    }
    const auto got = metrics(ConfusionMatrix::from_rows(rows));
    const auto want = oracle::metrics(rows);
    worst = std::max({worst, std::abs(got.oa - want.oa), std::abs(got.kappa - want.kappa),
                      std::abs(got.avg_f1 - want.avg_f1)});
    for (std::size_t c = 0; c < 17; ++c) {
      cmp(got.per_class[c].precision, want.precision[c]);
      cmp(got.per_class[c].recall, want.recall[c]);
      cmp(got.per_class[c].f1, want.f1[c]);
    }
  }
  const double hand = metrics(ConfusionMatrix::from_rows({{40, 10}, {20, 30}})).kappa;
  return {worst <= 1e-12 && defined_match && hand == 0.4,
          "20 random 17x17 matrices, max abs diff " + fmt("%.2e", worst) + ", hand-case kappa " + fmt("%.15g", hand) + (hand == 0.4 ? " (exact)" : " (inexact)")};
}

Outcome fusion_identities() {
  bool endpoints = true;
  double worst_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(3000 + seed);
    const std::size_t n = 2 + rng.uniform_int(16);
    const ProbVector g(random_simplex(rng, n)), s(random_simplex(rng, n));
    endpoints = endpoints && weighted_fuse(g, s, 1.0).values() == g.values();
    endpoints = endpoints && weighted_fuse(g, s, 0.0).values() == s.values();
    for (int k = 0; k < 5; ++k) {
      const double a = k == 0 ? 0.5 : rng.uniform();
      worst_sum = std::max(worst_sum, std::abs(weighted_fuse(g, s, a).sum() - 1.0));
    }
  }
  return {endpoints && worst_sum <= 1e-9, std::string("100 simplex pairs, endpoints ") +
                                              (endpoints ? "bitwise equal" : "DIFFER") + ", max |sum-1| " +
                                              fmt("%.2e", worst_sum)};
}

Outcome graph_invariances() {
  GcnModel<float> m;
  Rng init(4);
  m.init(init);
  double worst_perm = 0.0, worst_rigid = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(4000 + seed);
    const auto set = random_instances(rng, 1 + rng.uniform_int(30));
    const auto g = build_graph(set);
    const std::size_t n = g.num_nodes();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    SceneGraph p{Tensor64(g.features.shape()), Tensor64(g.adjacency.shape())};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < kNodeFeatures; ++f) p.features(i, f) = g.features(perm[i], f);
      for (std::size_t j = 0; j < n; ++j) p.adjacency(i, j) = g.adjacency(perm[i], perm[j]);
    }
    const auto a = gcn_forward(g, m), b = gcn_forward(p, m);
    for (std::size_t c = 0; c < a.size(); ++c) worst_perm = std::max(worst_perm, std::abs(a[c] - b[c]));

    std::vector<std::array<double, 2>> c, moved;
    for (const auto& in : set.instances) c.push_back(in.centroid);
    const double th = rng.uniform(0, 2 * std::numbers::pi), tx = rng.uniform(-500, 500), ty = rng.uniform(-500, 500);
    for (const auto& q : c) {
      moved.push_back({std::cos(th) * q[0] - std::sin(th) * q[1] + tx, std::sin(th) * q[0] + std::cos(th) * q[1] + ty});
    }
    worst_rigid = std::max(worst_rigid, max_abs_diff(knn_gaussian_adjacency(c, {}), knn_gaussian_adjacency(moved, {})));
  }
  return {worst_perm < 1e-5 && worst_rigid < 1e-9, "50 graphs, permutation max diff " + fmt("%.2e", worst_perm) +
                                                       ", rigid-motion adjacency max diff " + fmt("%.2e", worst_rigid)};
}

Outcome spectral_learnability() {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.task = SynthTask::spectral;
  sc.classes = 4;
  sc.samples_per_class = 500;
  sc.noise_sigma = 0.05;
  sc.seed = 11;
  const auto data = synth_dataset(sc);
  const auto cfg = spectral_train_config(11);
  const auto r = train_stream(reduced_resnet(4, 11), data, cfg, progress("spectral"));
  const double acc = test_accuracy(r.model, data);
  const double t = seconds_since(t0);
  return {acc >= 0.95 && r.log.epochs.size() <= 30 && t < 900.0,
          "2000 samples, ResNet widths 4/4-8-16, " + std::to_string(r.log.epochs.size()) + " epochs (" +
              to_string(r.log.stop_reason) + "), test accuracy " + fmt("%.4f", acc) + ", " + fmt("%.0f", t) + " s"};
}

Outcome layout_learnability() {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.task = SynthTask::layout;
  sc.classes = 3;
  sc.samples_per_class = 500;
  sc.seed = 12;
  const auto data = synth_dataset(sc);
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.seed = 12;
  const auto r = train_stream(gcn(3, 12), data, cfg, progress("layout"));
  const double acc = test_accuracy(r.model, data);
  return {acc >= 0.80 && r.log.epochs.size() <= 50,
          "1500 samples, " + std::to_string(r.log.epochs.size()) + " epochs (" + to_string(r.log.stop_reason) +
              "), test accuracy " + fmt("%.4f", acc) + ", " + fmt("%.0f", seconds_since(t0)) + " s"};
}

/// OA rises (weakly) to a peak and then falls (weakly); a flat curve passes.
bool unimodal_or_flat(const std::vector<double>& v) {
  std::size_t i = 0;
  while (i + 1 < v.size() && v[i + 1] >= v[i]) ++i;
  while (i + 1 < v.size() && v[i + 1] <= v[i]) ++i;
  return i + 1 == v.size();
}

Outcome fusion_synergy() {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.task = SynthTask::product;
  sc.classes = 4;
  sc.samples_per_class = 500;
  sc.seed = 13;
  const auto data = synth_dataset(sc);
  auto sentinel = train_stream(reduced_resnet(4, 13), data, spectral_train_config(13), progress("product/sentinel"));
  TrainConfig gcfg;
  gcfg.max_epochs = 50;
  gcfg.seed = 13;
  auto google = train_stream(gcn(4, 13), data, gcfg, progress("product/google"));
  const auto cache = cache_predictions(google.model, sentinel.model, data.subset(Split::test));
  const auto report = fusion_report(cache, 0.5, 0.1);
  std::vector<double> oa;
  std::ostringstream curve;
  for (const auto& row : report.sweep) {
    oa.push_back(row.metrics.oa);
    curve << (curve.tellp() ? " " : "") << fmt("%.3f", row.metrics.oa);
  }
  const bool shape = unimodal_or_flat(oa);
  std::printf("  [product] alpha sweep OA: %s\n", curve.str().c_str());
  return {report.google.oa <= 0.60 && report.sentinel.oa <= 0.60 && report.fused.oa >= 0.90 && shape,
          "test split: google " + fmt("%.4f", report.google.oa) + ", sentinel " + fmt("%.4f", report.sentinel.oa) +
              ", fused(0.5) " + fmt("%.4f", report.fused.oa) + ", sweep " + (shape ? "unimodal-or-flat" : "NOT unimodal") +
              ", " + fmt("%.0f", seconds_since(t0)) + " s"};
}

Outcome determinism(const fs::path& cli, const fs::path& work) {
  if (cli.empty() || !fs::exists(cli)) return {false, "command-line tool not found: " + cli.string()};
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"model": {"resnet": {"stem": 4, "blocks": [4, 8, 8]}}, "train": {"max_epochs": 3, "batch_size": 16}})";
  }
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli.string() + "\" " + args + " > \"" + (dir / "log.txt").string() + "\" 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const std::string data = (dir / "data").string(), manifest = (dir / "data" / "manifest.jsonl").string();
  if (!run("make-synthetic --task product --classes 4 --samples 30 --seed 7 --out \"" + data + "\"")) {
    return {false, "make-synthetic failed"};
  }
  std::size_t identical = 0, compared = 0;
  for (const std::string stream : {"sentinel", "google"}) {
    std::string bytes[2][2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / (stream + std::to_string(k));
      if (!run("train --stream " + stream + " --seed 7 --data \"" + manifest + "\" --config \"" +
               (dir / "config.json").string() + "\" --out \"" + out.string() + "\"")) {
        return {false, "train --stream " + stream + " failed"};
      }
      bytes[k][0] = slurp(out / "train_log.csv");
      bytes[k][1] = slurp(out / "checkpoint.lczk");
    }
    for (int f = 0; f < 2; ++f) {
      ++compared;
      identical += !bytes[0][f].empty() && bytes[0][f] == bytes[1][f];
    }
  }
  return {identical == compared, "train --seed 7 twice per stream: " + std::to_string(identical) + "/" +
                                     std::to_string(compared) + " log/checkpoint pairs byte-identical"};
}

Outcome split_contracts() {
  std::size_t violations = 0, records_seen = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng gen(5000 + seed);
    std::vector<SampleRecord> records;
    const std::size_t classes = 2 + gen.uniform_int(6);
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t polygons = 3 + gen.uniform_int(10);
      for (std::size_t p = 0; p < polygons; ++p) {
        const std::size_t n = 1 + gen.uniform_int(12);
        for (std::size_t k = 0; k < n; ++k) {
          SampleRecord r;
          r.polygon_id = "c" + std::to_string(c) + "p" + std::to_string(p);
          r.sample_id = r.polygon_id + "_" + std::to_string(k);
          r.lcz_class = static_cast<int>(c);
          r.sentinel_path = r.google_path = "x";
          records.push_back(r);
        }
      }
    }
    records_seen += records.size();

    Rng r1(seed);
    const auto a = split_records(records, SplitStrategy::sample_pool, r1).records;
    std::map<int, std::array<double, 4>> per_class;
    for (const auto& r : a) {
      per_class[r.lcz_class][static_cast<int>(r.split)] += 1;
      per_class[r.lcz_class][0] += 1;
    }
    for (const auto& [c, n] : per_class) {
      const double tot = n[0];
      violations += std::abs(n[1] - 0.7 * tot) > 1.0 || std::abs(n[2] - 0.2 * tot) > 1.0 || std::abs(n[3] - 0.1 * tot) > 1.0;
    }

    Rng r2(seed);
    const auto b = split_records(records, SplitStrategy::polygon_pool, r2).records;
    std::map<std::string, std::set<Split>> seen;
    for (const auto& r : b) seen[r.polygon_id].insert(r.split);
    for (const auto& [p, s] : seen) violations += s.size() != 1 || s.count(Split::unassigned);
  }
  return {violations == 0, "10 seeded datasets (" + std::to_string(records_seen) + " records), " +
                               std::to_string(violations) + " ratio or polygon violations"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  std::string workdir = "acceptance_work", cli;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory");
  app.add_option("--cli", cli, "path of the df4lcz tool");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"conv3d oracle", conv3d_oracle},
      {"metric oracle", metric_oracle},
      {"fusion identities", fusion_identities},
      {"graph invariances", graph_invariances},
      {"spectral learnability", spectral_learnability},
      {"layout learnability", layout_learnability},
      {"fusion synergy", fusion_synergy},
      {"determinism", [&] { return determinism(cli, workdir); }},
      {"split contracts", split_contracts},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
