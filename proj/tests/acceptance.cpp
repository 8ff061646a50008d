// Acceptance checks, one per criterion: `acceptance --criterion N`.
// Each prints PASS/FAIL lines and exits nonzero if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sstempo/calibrate.hpp"
#include "sstempo/harness.hpp"
#include "sstempo/nn.hpp"
#include "sstempo/pipeline.hpp"
#include "sstempo/pretext.hpp"
#include "sstempo/synth.hpp"
#include "sstempo/tempogram.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace sstempo;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(bool ok, const std::string& what) {
  std::printf("%s  %s\n", ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt_num(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ExperimentSpec desk_spec(const std::string& name, const TempoDistribution& dist, TempogramKind kind,
                         const fs::path& root) {
  ExperimentSpec spec;
  spec.apply_profile(Profile::Desk);
  spec.name = name;
  spec.distribution = dist;
  spec.kind = kind;
  spec.seed = 1;
  spec.output_dir = root / name;
  return spec;
}

void criterion1() {
  const auto c = log_bin_centers(25.0, 40, 146);
  report(std::abs(c[11] - 30.2) <= 0.05, "log bin 11 = " + fmt_num(c[11]) + " (30.2 +/- 0.05)");
  report(std::abs(c[18] - 34.1) <= 0.05, "log bin 18 = " + fmt_num(c[18]) + " (34.1 +/- 0.05)");
  report(std::abs(c[138] - 273.2) <= 0.1, "log bin 138 = " + fmt_num(c[138]) + " (273.2 +/- 0.1)");
  report(std::abs(c[145] - 308.4) <= 0.1, "log bin 145 = " + fmt_num(c[145]) + " (308.4 +/- 0.1)");
}

void criterion2() {
  report(huber(0.25) == 0.03125, "huber(0.25) = " + fmt_num(huber(0.25), 17) + " (exactly 0.03125)");
  report(huber(1.0) == 0.21875, "huber(1) = " + fmt_num(huber(1.0), 17) + " (exactly 0.21875)");
  const double s = sigma_of(30.0, 240.0, 40);
  report(s == 1.0 / 120.0, "sigma_of(30, 240, 40) = " + fmt_num(s, 17) + " (exactly 1/120)");
  const double total = total_loss(0.001, 2.0, LossConfig{});
  report(total == 12.0, "total_loss(0.001, 2) = " + fmt_num(total, 17) + " (exactly 12)");
}

void criterion3() {
  const auto t0 = Clock::now();
  nn::ModelParams<double> p = nn::init_params<double>(nn::ModelConfig::with_width(2, 16), 11);
  // Nonzero biases so every bias path carries gradient.
  for (std::size_t i = 1; i < p.size(); i += 2) p.tensors[i].setConstant(0.01);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nn::Mat<double> x1(16, 4);
  nn::Mat<double> x2(16, 4);
  for (Eigen::Index i = 0; i < x1.size(); ++i) {
    x1.data()[i] = u(rng);
    x2.data()[i] = u(rng);
  }
  const std::vector<int> k1{11, 12, 18, 14};
  const std::vector<int> k2{18, 11, 13, 14};
  const LossConfig cfg = LossConfig::for_range(30.0, 240.0);
  nn::ModelParams<double> g = p.zeros_like();
  pretext_loss_and_grad<double>(p, x1, x2, k1, k2, cfg, &g);

  const double h = 1e-6;
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Eigen::Index j = 0; j < p.tensors[i].size(); ++j) {
      auto a = p;
      auto b = p;
      a.tensors[i].data()[j] += h;
      b.tensors[i].data()[j] -= h;
      const double num = (pretext_loss_and_grad<double>(a, x1, x2, k1, k2, cfg, nullptr).total -
                          pretext_loss_and_grad<double>(b, x1, x2, k1, k2, cfg, nullptr).total) /
                         (2 * h);
      const double ana = g.tensors[i].data()[j];
      const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-8});
      if (rel > worst) {
        worst = rel;
        worst_name = p.names[i] + "[" + std::to_string(j) + "]";
      }
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  report(worst < 1e-4, "max relative gradient error " + fmt_num(worst) + " at " + worst_name + " over " +
                           std::to_string(checked) + " parameters (< 1e-4)");
  report(secs < 30.0, "gradient check runtime " + fmt_num(secs, 3) + " s (< 30 s)");
}

void criterion4() {
  const auto t0 = Clock::now();
  for (double bpm : {60.0, 90.0, 120.0, 180.0}) {
    const LogTempogram tg = log_tempogram_from_audio(synth_click_track(bpm, 30.0), TempogramKind::Fourier);
    const auto centers = tg.centers();
    // Interior: the 10 s analysis window lies entirely inside the track.
    const auto margin = static_cast<Eigen::Index>(std::ceil(5.0 * tg.frame_rate));
    Eigen::Index total = 0;
    Eigen::Index hits = 0;
    for (Eigen::Index f = margin; f < tg.frames() - margin; ++f) {
      Eigen::Index best = 0;
      tg.values.row(f).maxCoeff(&best);
      const double bins_off = std::abs(std::log2(centers[static_cast<std::size_t>(best)] / bpm)) * 40.0;
      ++total;
      if (bins_off <= 1.0 + 1e-9) ++hits;
    }
    const double frac = total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
    report(total > 0 && frac >= 0.9, "Fourier log-tempogram argmax within one bin of " + fmt_num(bpm) + " BPM in " +
                                         fmt_num(100.0 * frac, 4) + "% of " + std::to_string(total) +
                                         " interior frames (>= 90%)");
  }
  const NoveltyCurve nov = compute_novelty(synth_click_track(90.0, 30.0));
  const auto axis = default_tempo_axis();
  const LinearTempogram ta = autocorr_tempogram(nov, 10.0, axis);
  const LinearTempogram tf = fourier_tempogram(nov, 10.0, axis);
  const auto col = [&](double bpm) {
    return static_cast<Eigen::Index>(std::find(axis.begin(), axis.end(), bpm) - axis.begin());
  };
  const auto margin = static_cast<Eigen::Index>(std::ceil(5.0 * ta.frame_rate));
  double a45 = 0.0, a180 = 0.0, f45 = 0.0, f180 = 0.0;
  for (Eigen::Index f = margin; f < ta.frames() - margin; ++f) {
    a45 += ta.values(f, col(45.0));
    a180 += ta.values(f, col(180.0));
    f45 += tf.values(f, col(45.0));
    f180 += tf.values(f, col(180.0));
  }
  report(a45 > a180, "autocorrelation at 90 BPM: salience(45) = " + fmt_num(a45) + " > salience(180) = " + fmt_num(a180));
  report(f180 > f45, "Fourier at 90 BPM: salience(180) = " + fmt_num(f180) + " > salience(45) = " + fmt_num(f45));
  const double secs = seconds_since(t0);
  report(secs < 120.0, "DSP oracle runtime " + fmt_num(secs, 3) + " s (< 120 s)");
}

void criterion5() {
  const auto axis = default_tempo_axis();
  bool identical = true;
  std::size_t cells = 0;
  for (double bpm : {60.0, 90.0, 137.0}) {
    const NoveltyCurve nov = compute_novelty(synth_click_track(bpm, 20.0));
    const LinearTempogram ta = autocorr_tempogram(nov, 10.0, axis);
    const LinearTempogram tf = fourier_tempogram(nov, 10.0, axis);
    const LinearTempogram th = compute_linear_tempogram(TempogramKind::Hybrid, nov, 10.0, axis);
    if (th.values.rows() != ta.values.rows() || th.values.cols() != ta.values.cols() || th.tempo_axis != ta.tempo_axis) {
      identical = false;
      continue;
    }
    for (Eigen::Index r = 0; r < th.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < th.values.cols(); ++c) {
        const float expect = ta.values(r, c) * tf.values(r, c);
        if (std::memcmp(&expect, &th.values(r, c), sizeof(float)) != 0) identical = false;
        ++cells;
      }
    }
  }
  report(identical, "hybrid tempogram equals autocorrelation x Fourier bit-for-bit over " + std::to_string(cells) +
                        " cells");
}

void criterion6() {
  testing::TempDir dir("accept6");
  const auto t0 = Clock::now();
  const ExperimentSpec spec =
      desk_spec("fourier_loguniform", TempoDistribution::log_uniform(), TempogramKind::Fourier, dir.path());
  const ExperimentReport r = run_experiment(spec);
  const double secs = seconds_since(t0);
  report(r.ok, "desk experiment completed" + (r.ok ? std::string() : ": " + r.error));
  report(static_cast<int>(r.history.size()) == spec.train.epochs,
         std::to_string(r.history.size()) + " of " + std::to_string(spec.train.epochs) + " epochs recorded");
  bool finite = true;
  for (const EpochLoss& e : r.history) {
    std::printf("      epoch %2d  L_T %.6g  L_R %.6g\n", e.epoch, e.l_t, e.l_r);
    finite = finite && std::isfinite(e.l_t) && std::isfinite(e.l_r) && std::isfinite(e.total);
  }
  report(finite && !r.history.empty(), "all epoch losses finite");
  if (!r.history.empty()) {
    const double first = r.history.front().l_t;
    const double last = r.history.back().l_t;
    report(last <= 0.5 * first,
           "final L_T " + fmt_num(last) + " <= 50% of first L_T " + fmt_num(first) + " (ratio " + fmt_num(last / first, 3) + ")");
  }
  report(secs < 900.0, "desk training runtime " + fmt_num(secs, 4) + " s (< 900 s)");
}

double curve_spearman(const CalibrationCurve& curve) {
  const CalibrationCurve c = restrict_curve(curve, 40.0, 240.0);
  return spearman(c.bpms(), c.outputs());
}

void criterion7() {
  testing::TempDir dir("accept7");
  const auto t0 = Clock::now();
  const auto run = [&](const std::string& name, const TempoDistribution& dist, TempogramKind kind) {
    ExperimentReport r = run_experiment(desk_spec(name, dist, kind, dir.path()));
    std::printf("      %s: %s, %.0f s elapsed\n", name.c_str(), r.ok ? "trained" : r.error.c_str(), seconds_since(t0));
    std::fflush(stdout);
    return r;
  };
  const ExperimentReport fourier = run("fourier_loguniform", TempoDistribution::log_uniform(), TempogramKind::Fourier);
  const ExperimentReport acf = run("acf_loguniform", TempoDistribution::log_uniform(), TempogramKind::Autocorrelation);
  const ExperimentReport ln170 = run("fourier_lognormal170", TempoDistribution::log_normal(170.0), TempogramKind::Fourier);
  const ExperimentReport ln70 = run("fourier_lognormal70", TempoDistribution::log_normal(70.0), TempogramKind::Fourier);
  for (const ExperimentReport* r : {&fourier, &acf, &ln170, &ln70}) {
    report(r->ok && !r->curve.points.empty(), r->spec.name + " produced a calibration curve");
  }
  if (failures > 0) return;

  const double rho_f = curve_spearman(fourier.curve);
  const double rho_a = curve_spearman(acf.curve);
  report(rho_f >= 0.9, "Fourier model Spearman rho over [40, 240] BPM = " + fmt_num(rho_f, 4) + " (>= 0.9; |rho| = " +
                           fmt_num(std::abs(rho_f), 4) + ")");
  report(rho_f > rho_a, "Fourier rho " + fmt_num(rho_f, 4) + " > autocorrelation rho " + fmt_num(rho_a, 4) +
                            " (|rho| " + fmt_num(std::abs(rho_f), 4) + " vs " + fmt_num(std::abs(rho_a), 4) + ")");

  const CalibrationCurve slow170 = restrict_curve(ln170.curve, 0.0, 80.0);
  const CalibrationCurve slow70 = restrict_curve(ln70.curve, 0.0, 80.0);
  const double sat170 = saturation_metric(slow170);
  const double sat70 = saturation_metric(slow70);
  report(sat170 > sat70, "saturation below 80 BPM: lognormal mu=170 " + fmt_num(sat170, 4) + " > mu=70 " +
                             fmt_num(sat70, 4) + " over " + std::to_string(slow170.points.size()) + " tempi");
  const auto span = [](const CalibrationCurve& c) {
    const auto t = c.outputs();
    return t.empty() ? 0.0 : *std::max_element(t.begin(), t.end()) - *std::min_element(t.begin(), t.end());
  };
  std::printf("      output span below 80 BPM: mu=170 %.4f, mu=70 %.4f\n", span(slow170), span(slow70));
  std::printf("      total runtime %.0f s\n", seconds_since(t0));
}

void criterion8() {
  testing::TempDir dir("accept8");
  const auto make = [&](const std::string& name) {
    ExperimentSpec spec;
    spec.name = name;
    spec.distribution = TempoDistribution::log_uniform();
    spec.kind = TempogramKind::Fourier;
    spec.n_tracks = 4;
    spec.track_seconds = 12.0;
    spec.d = 4;
    spec.train.epochs = 2;
    spec.train.batch_size = 16;
    spec.train.frame_stride = 4;
    spec.seed = 42;
    spec.calibration_tempi = log_spaced_tempi(40.0, 240.0, 10);
    spec.output_dir = dir / name;
    return spec;
  };
  const ExperimentReport a = run_experiment(make("first"));
  const ExperimentReport b = run_experiment(make("second"));
  report(a.ok && b.ok, "both runs completed" + (a.ok ? std::string() : ": " + a.error) +
                           (b.ok ? std::string() : ": " + b.error));
  for (const char* file : {"loss_history.csv", "calibration_curve.csv"}) {
    const fs::path pa = a.spec.output_dir / file;
    const fs::path pb = b.spec.output_dir / file;
    const bool exist = fs::exists(pa) && fs::exists(pb);
    const std::string sa = exist ? testing::slurp(pa) : "";
    const std::string sb = exist ? testing::slurp(pb) : "";
    report(exist && !sa.empty() && sa == sb,
           std::string(file) + " byte-identical across runs (" + std::to_string(sa.size()) + " bytes)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  int criterion = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--criterion") criterion = std::atoi(argv[i + 1]);
  }
  std::printf("criterion %d\n", criterion);
  try {
    switch (criterion) {
      case 1: criterion1(); break;
      case 2: criterion2(); break;
      case 3: criterion3(); break;
      case 4: criterion4(); break;
      case 5: criterion5(); break;
      case 6: criterion6(); break;
      case 7: criterion7(); break;
      case 8: criterion8(); break;
      default:
        std::fprintf(stderr, "usage: acceptance --criterion N (1..8)\n");
        return 2;
    }
  } catch (const std::exception& e) {
    report(false, std::string("unexpected exception: ") + e.what());
  }
  return failures == 0 ? 0 : 1;
}
