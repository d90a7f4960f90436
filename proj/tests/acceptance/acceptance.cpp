// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "oracles.hpp"
#include "support.hpp"

#include "xferod/cli.hpp"
#include "xferod/evaluation.hpp"
#include "xferod/metrics.hpp"
#include "xferod/pooling.hpp"
#include "xferod/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

using namespace xferod;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += "; over the time limit";
  }
  char timing[64];
  if (limit_s > 0)
    std::snprintf(timing, sizeof timing, " [%.2fs, limit %.0fs]", secs, limit_s);
  else
    std::snprintf(timing, sizeof timing, " [%.2fs]", secs);
  std::printf("%s %d %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), timing);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double max_abs_diff(const Tensor& got, const std::vector<double>& want) {
  double worst = 0;
  for (std::size_t i = 0; i < want.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(got.values()[i]) - want[i]));
  return worst;
}

// ---------------------------------------------------------------------------

// Boxes whose two samples per bin side are exact midpoints of sub-intervals
// lying inside single map cells: start on the 1/m lattice (feature
// coordinates), bin width 2/m. There the two-sample average is the exact bin
// integral, which the dense oracle approximates.
Box lattice_box(std::size_t h, std::size_t w, int p, double s, std::mt19937_64& rng) {
  const auto axis = [&](std::size_t cells, double& start, double& extent) {
    std::vector<int> fits;
    for (int m : {1, 2, 4, 8})
      if (p * 2.0 / m <= static_cast<double>(cells) - 1.0) fits.push_back(m);
    const int m = fits[std::uniform_int_distribution<std::size_t>(0, fits.size() - 1)(rng)];
    extent = p * 2.0 / m;
    // start in [-0.5, cells - 0.5 - extent] keeps the box inside the image
    const int lo = static_cast<int>(std::ceil(-0.5 * m));
    const int hi = static_cast<int>(std::floor((static_cast<double>(cells) - 0.5 - extent) * m));
    start = std::uniform_int_distribution<int>(lo, hi)(rng) / static_cast<double>(m);
  };
  double u0, uw, v0, vh;
  axis(w, u0, uw);
  axis(h, v0, vh);
  return {(u0 + 0.5) * s, (v0 + 0.5) * s, uw * s, vh * s};
}

Box any_box(std::size_t h, std::size_t w, double s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  const double iw = static_cast<double>(w) * s, ih = static_cast<double>(h) * s;
  const double bw = (0.05 + 0.9 * u(rng)) * iw, bh = (0.05 + 0.9 * u(rng)) * ih;
  return {u(rng) * (iw - bw), u(rng) * (ih - bh), bw, bh};
}

Outcome roi_align_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> channels(1, 8), side(4, 16);
  const double scales[] = {1, 2, 4};
  const int sizes[] = {1, 2, 7};
  RoiAlignConfig cfg;
  double worst = 0, worst_general = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t c = channels(rng), h = side(rng), w = side(rng);
    const double s = scales[i % 3];
    cfg.output_size = sizes[(i / 3) % 3];
    const Tensor map = testing::random_tensor({c, h, w}, rng);
    const Box box = lattice_box(h, w, cfg.output_size, s, rng);
    worst = std::max(worst, max_abs_diff(roi_align(map, box, s, cfg),
                                         oracle::dense_roi_align(map, box, s, cfg.output_size, true)));
    const Box general = any_box(h, w, s, rng);
    worst_general = std::max(worst_general, max_abs_diff(roi_align(map, general, s, cfg),
                                                         oracle::dense_roi_align(map, general, s, cfg.output_size, true)));
  }

  // Constant and linear-ramp maps, boxes well inside the map.
  double analytic = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t h = side(rng), w = side(rng);
    const double s = scales[i % 3];
    cfg.output_size = sizes[(i / 3) % 3];
    std::uniform_real_distribution<double> u(0, 1), coef(-0.2, 0.2);
    const double a = coef(rng), by = coef(rng), bx = coef(rng);
    Tensor constant({2, h, w}), ramp({1, h, w});
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        constant.at(0, y, x) = 0.75f;
        constant.at(1, y, x) = -2.5f;
        ramp.at(0, y, x) = static_cast<float>(a + by * static_cast<double>(y) + bx * static_cast<double>(x));
      }
    // feature-space box inside [0, h-1] x [0, w-1]
    const double fx0 = u(rng) * (static_cast<double>(w) - 1) * 0.5, fy0 = u(rng) * (static_cast<double>(h) - 1) * 0.5;
    const double fw = (0.1 + 0.9 * u(rng)) * (static_cast<double>(w) - 1 - fx0);
    const double fh = (0.1 + 0.9 * u(rng)) * (static_cast<double>(h) - 1 - fy0);
    const Box box{(fx0 + 0.5) * s, (fy0 + 0.5) * s, fw * s, fh * s};

    const Tensor flat = roi_align(constant, box, s, cfg);
    for (std::size_t k = 0; k < flat.values().size(); ++k) {
      const double want = k < flat.values().size() / 2 ? 0.75 : -2.5;
      analytic = std::max(analytic, std::abs(flat.values()[k] - want));
    }
    const Tensor lin = roi_align(ramp, box, s, cfg);
    const int p = cfg.output_size;
    for (int by_i = 0; by_i < p; ++by_i)
      for (int bx_i = 0; bx_i < p; ++bx_i) {
        const double yc = fy0 + (by_i + 0.5) * fh / p, xc = fx0 + (bx_i + 0.5) * fw / p;
        const double want = a + by * yc + bx * xc;
        analytic = std::max(analytic, std::abs(lin.at(0, static_cast<std::size_t>(by_i), static_cast<std::size_t>(bx_i)) - want));
      }
  }
  const bool pass = worst <= 1e-3 && analytic <= 1e-6;
  return {pass, "lattice-aligned boxes max|d| " + num(worst) + " (tol 1e-3), constant/ramp max|d| " + num(analytic) +
                    " (tol 1e-6); info: arbitrary boxes at 2 samples/bin max|d| " + num(worst_general)};
}

// ---------------------------------------------------------------------------

Outcome logme_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> n_dist(10, 200), d_dist(1, 16);
  std::uniform_real_distribution<double> noise(0.3, 2.0);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const int n = n_dist(rng), d = d_dist(rng);
    const Eigen::MatrixXd f = testing::gaussian(n, d, rng);
    const Eigen::VectorXd y = f * testing::gaussian(d, 1, rng) + testing::gaussian(n, 1, rng, noise(rng));
    const double got = logme_single(f, y).log_evidence_per_sample;
    worst = std::max(worst, std::abs(got - oracle::logme_grid_search(f, y).log_evidence_per_sample));
  }
  Eigen::VectorXd y(8);
  y << 1, -1, 1, -1, -1, 1, -1, 1;
  const double zero = logme_single(Eigen::MatrixXd::Zero(8, 4), y).log_evidence_per_sample;
  const double zero_err = std::abs(zero + (1 + std::log(2 * std::numbers::pi)) / 2);
  return {worst <= 1e-3 && zero_err <= 1e-6,
          "50 instances max|d| " + num(worst) + " (tol 1e-3), zero-feature |d| " + num(zero_err) + " (tol 1e-6)"};
}

// ---------------------------------------------------------------------------

Outcome evidence_bound() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n_dist(5, 150), d_dist(1, 16);
  int violations = 0;
  double min_gap = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const int n = n_dist(rng), d = d_dist(rng);
    const Eigen::MatrixXd f = testing::gaussian(n, d, rng);
    const Eigen::VectorXd y = f * testing::gaussian(d, 1, rng) + testing::gaussian(n, 1, rng);
    const double gap = prop1_gap(f, y).gap();
    min_gap = std::min(min_gap, gap);
    if (gap < -1e-9) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations in 100, min gap " + num(min_gap) + " (tol 1e-9)"};
}

// ---------------------------------------------------------------------------

Outcome null_case() {
  std::mt19937_64 rng(4);
  int bad = 0;
  for (int i = 0; i < 20; ++i) {
    FeatureMatrix fm;
    if (i % 2 == 0) {
      SynthSpec s;
      s.classes = 1;
      s.objects = 50 + static_cast<std::size_t>(i);
      s.seed = static_cast<std::uint64_t>(i);
      fm = generate(s).features;
    } else {
      fm = testing::make_fm(testing::gaussian(30 + i, 1 + i % 7, rng, 2.0), std::vector<int>(30 + i, 0), 1, rng);
    }
    testing::CaptureWarnings quiet;
    const auto s = score_all(fm);
    const bool ok = s.at("hscore").value == 0.0 && s.at("transrate").value == 0.0 &&
                    s.at("logme_pos").value && std::isfinite(*s.at("logme_pos").value);
    if (!ok) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " of 20 single-class inputs break hscore = transrate = 0 / finite logme_pos"};
}

// ---------------------------------------------------------------------------

Outcome dense_algebra() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> n_dist(20, 80), d_dist(1, 8), k_dist(2, 5);
  double worst = 0;
  bool lambda_ok = true;
  for (int i = 0; i < 50; ++i) {
    const int n = n_dist(rng), d = d_dist(rng), k = k_dist(rng);
    Eigen::MatrixXd x = testing::gaussian(n, d, rng);
    const auto labels = testing::round_robin_labels(static_cast<std::size_t>(n), k);
    for (int r = 0; r < n; ++r) x(r, labels[static_cast<std::size_t>(r)] % d) += 1.5;
    const auto fm = testing::make_fm(x, labels, k, rng);
    const Eigen::MatrixXd xf = fm.features.cast<double>();  // the library sees float features
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    worst = std::max({worst, rel(hscore(fm), oracle::hscore(xf, labels)),
                      rel(hscore_regularized(fm), oracle::hscore_regularized(xf, labels)),
                      rel(transrate(fm), oracle::transrate(xf, labels, 1e-4))});
    const Eigen::MatrixXd centered = xf.rowwise() - xf.colwise().mean();
    const double lambda = ledoit_wolf(centered).lambda;
    lambda_ok = lambda_ok && lambda >= 0 && lambda <= 1;
  }
  const bool degenerate = ledoit_wolf(Eigen::MatrixXd::Zero(10, 4)).lambda == 1.0 &&
                          ledoit_wolf(Eigen::MatrixXd::Zero(3, 1)).lambda == 1.0;
  return {worst <= 1e-6 && lambda_ok && degenerate,
          "max rel|d| " + num(worst) + " (tol 1e-6), lambda in [0,1]: " + (lambda_ok ? "yes" : "no") +
              ", lambda = 1 on degenerate data: " + (degenerate ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

Outcome correlation_suite() {
  const std::vector<double> x{1, 2, 3}, y{3, 1, 2};
  const double tau_err = std::abs(kendall(x, y).statistic + 1.0 / 3.0);
  const double rho_err = std::abs(spearman(x, y).statistic + 0.5);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  double invariance = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(12), b(12), affine(12), warped(12), neg(12);
    for (std::size_t i = 0; i < 12; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      affine[i] = 4 * a[i] + 3;
      warped[i] = std::exp(2 * a[i]);
      neg[i] = -b[i];
    }
    const auto base = correlate(a, b);
    const auto aff = correlate(affine, b), warp = correlate(warped, b), flip = correlate(a, neg);
    invariance = std::max({invariance, std::abs(aff.pearson.statistic - base.pearson.statistic),
                           std::abs(warp.spearman.statistic - base.spearman.statistic),
                           std::abs(warp.kendall.statistic - base.kendall.statistic),
                           std::abs(flip.pearson.statistic + base.pearson.statistic),
                           std::abs(flip.spearman.statistic + base.spearman.statistic),
                           std::abs(flip.kendall.statistic + base.kendall.statistic)});
  }

  // p against |statistic| on a grid of noise levels at fixed M
  const std::size_t m = 15;
  std::vector<double> base(m), noise(m);
  for (std::size_t i = 0; i < m; ++i) {
    base[i] = static_cast<double>(i);
    noise[i] = u(rng);
  }
  std::vector<std::vector<Correlation>> series(3);
  for (double t = 0; t <= 60; t += 0.25) {
    std::vector<double> yy(m);
    for (std::size_t i = 0; i < m; ++i) yy[i] = base[i] + t * noise[i];
    series[0].push_back(pearson(base, yy));
    series[1].push_back(spearman(base, yy));
    series[2].push_back(kendall(base, yy));
  }
  int inversions = 0;
  for (auto& s : series) {
    std::sort(s.begin(), s.end(), [](auto& l, auto& r) { return std::abs(l.statistic) < std::abs(r.statistic); });
    for (std::size_t i = 1; i < s.size(); ++i)
      if (std::abs(s[i].statistic) > std::abs(s[i - 1].statistic) && s[i].p_value > s[i - 1].p_value) ++inversions;
  }
  const bool pass = tau_err <= 1e-15 && rho_err <= 1e-15 && invariance <= 1e-12 && inversions == 0;
  return {pass, "tau err " + num(tau_err) + ", rho err " + num(rho_err) + ", invariance max|d| " + num(invariance) +
                    " (tol 1e-12), p-value inversions " + std::to_string(inversions)};
}

// ---------------------------------------------------------------------------

Outcome synth_end_to_end() {
  const SweepGrid grid{{0, 1, 2, 4}, {0, 0.05, 0.1, 0.2, 0.4}};
  const auto& names = all_metric_names();
  std::vector<double> regret_sum(names.size(), 0.0);
  double rho_sum = 0;
  const int seeds = 10;
  std::size_t tlogme_col = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    SynthSpec base;
    base.seed = static_cast<std::uint64_t>(seed);
    const auto table = scenario_sweep(base, grid);
    if (table.size() != 20) return {false, "sweep returned " + std::to_string(table.size()) + " rows"};
    for (std::size_t c = 0; c < names.size(); ++c)
      if (names[c] == "tlogme") tlogme_col = c;
    std::vector<double> scores;
    for (const auto& row : table.rows) scores.push_back(*row.scores[tlogme_col]);
    rho_sum += spearman(scores, table.maps()).statistic;
    const auto ranks = rank_report(table);
    for (std::size_t c = 0; c < names.size(); ++c) regret_sum[c] += ranks[c].regret;
  }
  const double rho = rho_sum / seeds;
  std::vector<double> mean_regret;
  for (double r : regret_sum) mean_regret.push_back(r / seeds);
  auto sorted = mean_regret;
  std::sort(sorted.begin(), sorted.end());
  const double median = (sorted[2] + sorted[3]) / 2;  // six metrics
  const double mine = mean_regret[tlogme_col];
  std::string detail = "mean rho(tlogme, map_proxy) " + num(rho) + " (>= 0.8), mean tlogme regret " + num(mine) +
                       " vs median " + num(median) + "; regrets:";
  for (std::size_t c = 0; c < names.size(); ++c) detail += " " + names[c] + "=" + num(mean_regret[c]);
  return {rho >= 0.8 && mine <= median, detail};
}

// ---------------------------------------------------------------------------

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "xferod");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// A synthetic manifest with pyramid maps and fc rows attached to its images.
fs::path write_container(const testing::TempDir& dir) {
  SynthSpec s;
  s.objects = 24;
  s.dims = 5;
  s.classes = 3;
  s.images = 3;
  s.image_width = s.image_height = 256;
  s.seed = 8;
  auto data = generate(s);
  auto& m = data.manifest;
  std::mt19937_64 rng(8);
  const auto by_image = m.objects_by_image();
  for (const auto& [key, scale] : std::vector<std::pair<std::string, double>>{{"p3", 8}, {"p4", 16}, {"p5", 32}})
    m.meta.scales[key] = scale;
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    auto& image = m.images[i];
    for (const auto& [key, scale] : m.meta.scales) {
      const auto side = static_cast<std::size_t>(256 / scale);
      image.levels[key] = image.id + "_" + key + ".npy";
      write_tensor(testing::random_tensor({6, side, side}, rng), dir / image.levels[key]);
    }
    image.fc = image.id + "_fc.npy";
    write_tensor(testing::random_tensor({by_image[i].size(), 4}, rng), dir / *image.fc);
  }
  save_manifest(m, dir / "manifest.json");
  return dir / "manifest.json";
}

Outcome determinism() {
  testing::TempDir dir;
  const std::string manifest = write_container(dir).string();
  std::ofstream(dir / "table.csv", std::ios::binary)
      << "scenario_id,map,tlogme,hscore\na,0.2,1.5,NA\nb,0.6,2.5,0.3\nc,0.4,2,0.1\nd,0.1,0.5,0.2\n";

  std::vector<std::string> mismatched;
  const auto twice = [&](const std::string& label, const std::vector<std::string>& args,
                         const std::vector<fs::path>& files) {
    std::vector<std::string> first, second;
    for (auto* snapshot : {&first, &second}) {
      for (const auto& f : files) fs::remove_all(f);
      const auto r = cli_run(args);
      snapshot->push_back(std::to_string(r.code));
      snapshot->push_back(r.out);
      snapshot->push_back(r.err);
      for (const auto& f : files) snapshot->push_back(slurp(f));
    }
    if (first != second || first[0] != "0") mismatched.push_back(label);
  };

  int commands = 0;
  for (const char* ex : {"ms", "fc", "roi:p3", "global:p4"}) {
    const fs::path out = dir / "features";
    twice(std::string("extract ") + ex, {"extract", manifest, "--extractor", ex, "--out", out.string()},
          {out / "features.npy", out / "meta.json"});
    ++commands;
  }
  const std::string feats = (dir / "features").string();
  twice("score", {"score", feats, "--scenario-id", "s1", "--map", "0.5"}, {});
  twice("score --out", {"score", feats, "--scenario-id", "s1", "--out", (dir / "rows.csv").string()},
        {dir / "rows.csv"});
  twice("evaluate", {"evaluate", (dir / "table.csv").string(), "--out", (dir / "report.csv").string()},
        {dir / "report.csv"});
  twice("synth", {"synth", "--grid", "sep=0,1,2 noise=0.1,0.3", "--seed", "3", "--objects", "100", "--out",
                  (dir / "sweep.csv").string()},
        {dir / "sweep.csv"});
  commands += 4;

  std::string detail = std::to_string(commands) + " command lines run twice, " +
                       std::to_string(mismatched.size()) + " differ or fail";
  for (const auto& m : mismatched) detail += " [" + m + "]";
  return {mismatched.empty(), detail};
}

}  // namespace

int main() {
  report(1, "roi-align vs dense oracle", 30, roi_align_oracle);
  report(2, "logme vs grid search", 120, logme_oracle);
  report(3, "evidence bound", 0, evidence_bound);
  report(4, "single-class contract", 0, null_case);
  report(5, "h-score family vs dense algebra", 0, dense_algebra);
  report(6, "correlation suite", 0, correlation_suite);
  report(7, "synthetic sweep tracks transfer", 300, synth_end_to_end);
  report(8, "cli determinism", 0, determinism);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
