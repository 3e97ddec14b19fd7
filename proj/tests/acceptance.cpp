// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,5,...] [--expect-fail 13,...]
//
// Expected failures are still printed as FAIL (marked "known"); they do not
// change the exit status. Anything else that fails makes the run exit 1.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bands.hpp"
#include "devices.hpp"
#include "elasticity.hpp"
#include "error.hpp"
#include "network.hpp"
#include "oracles.hpp"

using namespace phononet;

namespace {

constexpr double um = kMicron;
constexpr double GHz = 1e9;
constexpr double MHz = 1e6;

// Tolerances.
constexpr double kDeltaTol1 = 0.2 * MHz;
constexpr double kG1 = 5.02 * MHz, kGTol1 = 0.05 * MHz;
constexpr double kRoundTrip = 1e-10;
constexpr double kLameTol = 1e-12;
constexpr double kPatchTol = 1e-10;
constexpr double kRigidTol = 1e-6;
constexpr double kDenseTol = 1e-8;
constexpr double kBarSpeed = 17225.0, kBarTol = 0.01;
constexpr double kGridStep = 10e3;
constexpr double kConvergence = 0.005;
constexpr double kScaleTol = 1e-4;
constexpr double kRegionTol = 0.10;
constexpr double kSpacingTol = 0.30;
constexpr double kSplitting = 7.1 * MHz, kSplittingTol = 0.30;  // 1.3397 - 1.3326 GHz
constexpr double kGRef = 5.0 * MHz;
constexpr double kTuneTol = 0.05 * MHz;
constexpr double kShieldLo = 0.85 * GHz, kShieldHi = 2.35 * GHz, kShieldTol = 0.15;
constexpr double kSweep = 0.1 * um;
constexpr int kSweepSteps = 9;
constexpr double kStubLimit = 0.01;

const double kTargets[4] = {1.7339 * GHz, 0.9634 * GHz, 1.3388 * GHz, 1.1691 * GHz};  // a..d
const Region kExpected[4] = {Region::I, Region::II, Region::III, Region::IV};
// Span of the four mode frequencies, widened by the region tolerance.
const Interval kOperating{0.9634 * GHz * (1 - kRegionTol), 1.7339 * GHz * (1 + kRegionTol)};

const Material kDiamond = Material::diamond();
const std::array<WaveguideSpec, 3> kWaveguides = {
    WaveguideSpec{6 * um, 3 * um, 1.1 * um, 0.3 * um, HoleAxis::Across},
    WaveguideSpec{4 * um, 3 * um, 1.1 * um, 0.3 * um, HoleAxis::Across},
    WaveguideSpec{7.6 * um, 2 * um, 0.8 * um, 0.76 * um, HoleAxis::Across}};
const ResonatorSpec kResonator{21 * um, 3.15 * um};
const double kLengths[3] = {86.3 * um, 86.3 * um, 91.2 * um};
const ShieldSpec kShield{3.8 * um, 3.5 * um, 1.0 * um, ShieldStyle::CrossHole};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

NetworkSpec reference_network(int rows, int cols) {
  NetworkSpec s;
  s.L_A = kLengths[0];
  s.L_B = kLengths[1];
  s.L_C = kLengths[2];
  s.rows = rows;
  s.cols = cols;
  s.resonator = kResonator;
  s.waveguides = kWaveguides;
  return s;
}

Mesh square_plate(double side, double h) {
  PolyRegion r;
  r.outer = {{0, 0}, {side, 0}, {side, side}, {0, side}};
  return triangulate(r, h, 25);
}

bool in_any(const IntervalSet& s, double f) {
  return std::any_of(s.begin(), s.end(), [f](const Interval& i) { return i.contains(f); });
}

// ---------------------------------------------------------------- exact tier

Outcome c1() {
  const auto c = extract_coupling({1.3326 * GHz, 1.3397 * GHz, 1.3468 * GHz});
  return {std::abs(c.delta) < kDeltaTol1 && std::abs(c.g - kG1) <= kGTol1,
          fmt("delta = %.4f MHz, g = %.4f MHz", c.delta / MHz, c.g / MHz)};
}

Outcome c2() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> dd(-20 * MHz, 20 * MHz), dg(0.1 * MHz, 20 * MHz);
  double worst_g = 0, worst_d = 0;
  for (int i = 0; i < 1000; ++i) {
    const double delta = dd(rng), g = dg(rng);
    const auto t = oracle::coupled_triplet(1.3 * GHz, delta, g);
    const auto c = extract_coupling({t[0], t[1], t[2]});
    worst_g = std::max(worst_g, std::abs(c.g - g) / g);
    worst_d = std::max(worst_d, std::abs(c.delta - delta) / std::abs(delta));
  }
  return {worst_g <= kRoundTrip && worst_d <= kRoundTrip,
          fmt("worst relative error g %.2e, delta %.2e (limit %.0e)", worst_g, worst_d, kRoundTrip)};
}

Outcome c3() {
  const auto l = lame_constants(kDiamond);
  const double lambda = 0.2 * 1050e9 / (1.2 * 0.6), mu = 1050e9 / 2.4;
  const double el = std::abs(l.lambda / lambda - 1), em = std::abs(l.mu / mu - 1);
  const bool ref_ok = std::abs(l.lambda / 1e9 - 291.67) < 0.005 && std::abs(l.mu / 1e9 - 437.5) < 0.005;
  return {el <= kLameTol && em <= kLameTol && ref_ok,
          fmt("lambda = %.4f GPa, mu = %.4f GPa (relative errors %.1e, %.1e)", l.lambda / 1e9,
              l.mu / 1e9, el, em)};
}

Outcome c4() {
  // Patch test: linear displacement imposed on the boundary is reproduced inside.
  const Mesh m = square_plate(1 * um, 0.3 * um);
  const auto ops = assemble(m, kDiamond);
  const Eigen::MatrixXd K(ops.K.real());
  const Eigen::Index n = K.rows();
  std::vector<char> fixed(n, 0);
  Eigen::VectorXd exact(n);
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const Vec2 p = m.nodes[i] * (1.0 / um);
    exact(2 * i) = 1e-3 * p.x - 2e-3 * p.y;
    exact(2 * i + 1) = 0.5e-3 * p.x + 1.5e-3 * p.y;
  }
  for (const auto& e : m.boundary_edges)
    for (int v : {e.n0, e.n1, e.mid}) fixed[2 * v] = fixed[2 * v + 1] = 1;
  std::vector<int> fr, fx;
  for (Eigen::Index i = 0; i < n; ++i) (fixed[i] ? fx : fr).push_back(int(i));
  Eigen::MatrixXd Kff(fr.size(), fr.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(fr.size());
  for (std::size_t a = 0; a < fr.size(); ++a) {
    for (std::size_t b = 0; b < fr.size(); ++b) Kff(a, b) = K(fr[a], fr[b]);
    for (int f : fx) rhs(a) -= K(fr[a], f) * exact(f);
  }
  const Eigen::VectorXd u = Kff.ldlt().solve(rhs);
  double err = 0, ref = 0;
  for (std::size_t a = 0; a < fr.size(); ++a) {
    err = std::max(err, std::abs(u(a) - exact(fr[a])));
    ref = std::max(ref, std::abs(exact(fr[a])));
  }
  const double patch = err / ref;

  // Free plate: three rigid modes.
  const auto plate = assemble(square_plate(10 * um, 2 * um), kDiamond);
  const auto modes = eigs(plate, 0.0, 6);
  double rigid = 0;
  int near_zero = 0;
  for (int i = 0; i < 6; ++i) {
    const double r = std::abs(modes[i].eigenvalue) / modes[3].eigenvalue;
    if (r <= kRigidTol) ++near_zero;
    if (i < 3) rigid = std::max(rigid, r);
  }

  // Krylov shift-invert against a dense generalized eigensolve.
  const auto small = assemble(square_plate(3 * um, 1.2 * um), kDiamond);
  const Eigen::MatrixXd Kd(small.K.real()), Md(small.M.real());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> dense(Kd, Md);
  const auto& ev = dense.eigenvalues();
  const double sigma = 0.5 * (ev(10) + ev(11));
  EigsOptions opt;
  opt.krylov_dim = 20;
  const auto got = eigs(small, std::sqrt(sigma) / (2 * kPi), 6, opt);
  std::vector<double> want(ev.data(), ev.data() + ev.size());
  std::sort(want.begin(), want.end(),
            [&](double a, double b) { return std::abs(a - sigma) < std::abs(b - sigma); });
  want.resize(6);
  std::sort(want.begin(), want.end());
  double dense_err = 0;
  for (int i = 0; i < 6; ++i) dense_err = std::max(dense_err, std::abs(got[i].eigenvalue / want[i] - 1));

  return {patch <= kPatchTol && near_zero == 3 && dense_err <= kDenseTol,
          fmt("patch %.1e; %d near-zero modes (max %.1e of first elastic); dense oracle %.1e",
              patch, near_zero, rigid, dense_err)};
}

Outcome c5() {
  DispersionOptions o;
  o.n_k = 13;
  const WaveguideSpec plain{6 * um, 3 * um, 0, 0};
  const auto bs = dispersion(plain, kDiamond, o);
  double slope = 0;
  for (std::size_t j = 0; j < 2; ++j) slope = std::max(slope, 2 * kPi * bs.bands[1][j] / bs.k[1]);
  const double strip_gaps = detect_gaps(bs).gaps.size();
  o.n_k = 9;
  const auto solid = dispersion_2d({3.8 * um, 3.8 * um, 1.0 * um}, kDiamond, o);
  const double solid_gaps = detect_gaps(solid).gaps.size();
  const double c = std::sqrt(kDiamond.youngs_modulus / kDiamond.density);
  return {std::abs(slope / kBarSpeed - 1) <= kBarTol && std::abs(c / kBarSpeed - 1) <= kBarTol &&
              strip_gaps == 0 && solid_gaps == 0,
          fmt("extensional slope %.0f m/s (sqrt(E/rho) %.0f); gaps: plain strip %.0f, solid lattice %.0f",
              slope, c, strip_gaps, solid_gaps)};
}

Outcome c6() {
  std::mt19937_64 rng(6);
  int mismatched_structures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    BandStructure bs;
    bs.bands = oracle::random_bands(rng, 25, 6, 0.35 * GHz, trial % 2 ? 1.0 : 2.5);
    for (std::size_t i = 0; i < bs.bands.size(); ++i) {
      bs.k.push_back(double(i));
      bs.kvec.push_back({double(i), 0.0});
    }
    bs.f_max = 2.5 * GHz;
    const auto gaps = detect_gaps(bs);
    std::size_t n = 0;
    const auto scan = oracle::grid_scan(bs.bands, bs.f_max, kGridStep, &n);
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same &= in_any(gaps.gaps, i * kGridStep) == bool(scan[i]);
    mismatched_structures += !same;
  }
  const auto r = classify_regions({{{1.0, 1.5}}}, {{{0.8, 1.3}}}, {{{0.9, 1.1}, {1.4, 1.6}}});
  auto one = [](const IntervalSet& s, double lo, double hi) {
    return s.size() == 1 && std::abs(s[0].lo - lo) < 1e-12 && std::abs(s[0].hi - hi) < 1e-12;
  };
  const bool worked = one(r.region_IV, 1.0, 1.1) && one(r.region_III, 1.1, 1.3) &&
                      one(r.region_II, 1.4, 1.5) && one(r.region_I, 0.9, 1.0);
  return {mismatched_structures == 0 && worked,
          fmt("%d of 100 synthetic structures differ from the %.0f kHz scan; worked region example %s",
              mismatched_structures, kGridStep / 1e3, worked ? "matches" : "differs")};
}

Outcome c7() {
  // Waveguide C cell at k = pi/2d: every band below 2.5 GHz.
  const auto& wc = kWaveguides[2];
  const double k = 0.5 * kPi / wc.period_d;
  std::vector<std::vector<double>> f;
  for (double h : {wc.period_d / 12, wc.period_d / 24}) {
    MeshOptions mo;
    mo.target_h = h;
    mo.mirrored = {{"periodic_minus", "periodic_plus", Isometry::shift({wc.period_d, 0})}};
    const Mesh m = triangulate(waveguide_cell(wc), mo);
    const auto map = periodic_pair(m, "periodic_minus", "periodic_plus", {wc.period_d, 0});
    f.emplace_back();
    for (const auto& md : eigs(apply_bloch(assemble(m, kDiamond), map, k), 0.0, 12))
      if (md.frequency < 2.5 * GHz) f.back().push_back(md.frequency);
  }
  double worst = 0;
  const std::size_t nb = std::min(f[0].size(), f[1].size());
  for (std::size_t i = 0; i < nb; ++i) worst = std::max(worst, std::abs(f[1][i] / f[0][i] - 1));

  // Resonator modes nearest the four targets, default mesh vs half.
  DeviceOptions fine;
  fine.target_h = kResonator.side_s / 84;
  const auto coarse = resonator_modes(kResonator, kDiamond, 0.85 * GHz, 1.85 * GHz);
  const auto refined = resonator_modes(kResonator, kDiamond, 0.85 * GHz, 1.85 * GHz, fine);
  double worst_res = 0;
  for (double t : kTargets) {
    auto nearest = [t](const ModeCatalog& c) {
      double best = 0, d = 1e300;
      for (const auto& m : c.modes)
        if (std::abs(m.mode.frequency - t) < d) d = std::abs(m.mode.frequency - t), best = m.mode.frequency;
      return best;
    };
    worst_res = std::max(worst_res, std::abs(nearest(refined) / nearest(coarse) - 1));
  }

  // Scale invariance c = 2.
  const auto a = resonator_modes(kResonator, kDiamond, 0.9 * GHz, 1.0 * GHz);
  const auto b = resonator_modes({42 * um, 6.3 * um}, kDiamond, 0.45 * GHz, 0.5 * GHz);
  double scale = a.modes.size() == b.modes.size() && !a.modes.empty() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(a.modes.size(), b.modes.size()); ++i)
    scale = std::max(scale, std::abs(2 * b.modes[i].mode.frequency / a.modes[i].mode.frequency - 1));

  return {nb >= 6 && worst < kConvergence && worst_res < kConvergence && scale <= kScaleTol,
          fmt("mesh halving: %zu C bands max %.3f%%, resonator modes max %.3f%%; scale c=2 %.1e", nb,
              100 * worst, 100 * worst_res, scale)};
}

// ---------------------------------------------------------------- soft tier

Outcome c8() {
  std::array<GapSet, 3> gaps;
  for (int p = 0; p < 3; ++p) gaps[p] = detect_gaps(dispersion(kWaveguides[p], kDiamond));
  int count[3] = {0, 0, 0};
  std::string listing;
  for (int p = 0; p < 3; ++p) {
    listing += fmt(" %c:", "ABC"[p]);
    for (const auto& g : gaps[p].gaps) {
      if (g.hi <= kOperating.lo || g.lo >= kOperating.hi) continue;
      ++count[p];
      listing += fmt(" %.4f-%.4f", g.lo / GHz, g.hi / GHz);
    }
  }
  const bool counts = count[0] == 1 && count[1] == 1 && count[2] == 2;
  const auto regions = classify_regions(gaps[0], gaps[1], gaps[2]);
  bool classified = true;
  std::string labels;
  for (int i = 0; i < 4; ++i) {
    const Region r = classify_frequency(kTargets[i], regions);
    // The expected region must hold within the tolerance: some frequency within
    // +-10 % of the target classifies as expected.
    bool near = r == kExpected[i];
    for (int s = -100; s <= 100 && !near; ++s)
      near = classify_frequency(kTargets[i] * (1 + kRegionTol * s / 100.0), regions) == kExpected[i];
    classified &= near;
    labels += fmt(" %.4f->%s", kTargets[i] / GHz, region_name(r));
  }
  return {counts && classified,
          fmt("gaps in [%.3f, %.3f] GHz: A %d, B %d, C %d (want 1/1/2);%s; regions:%s", kOperating.lo / GHz,
              kOperating.hi / GHz, count[0], count[1], count[2], listing.c_str(), labels.c_str())};
}

Outcome c9() {
  const double ref[3] = {31 * MHz, 37 * MHz, 28 * MHz};
  bool ok = true;
  std::string d;
  for (int p = 0; p < 3; ++p) {
    const double t = kTargets[p];
    const auto w = finite_waveguide_modes(kWaveguides[p], kLengths[p], kDiamond, t - 60 * MHz, t + 60 * MHz);
    const double s = w.catalog.modes.empty() ? 0.0 : w.spacing_near(t);
    ok &= std::abs(s / ref[p] - 1) <= kSpacingTol;
    d += fmt("%s%c %.1f MHz (ref %.0f)", p ? ", " : "", "ABC"[p], s / MHz, ref[p] / MHz);
  }
  return {ok, d};
}

Outcome c10() {
  SubsystemLayout lay;
  lay.resonator = kResonator;
  lay.waveguide = kWaveguides[2];
  lay.length_L = kLengths[2];
  lay.link = Port::C;
  const auto raw = coupled_triplet(lay, kDiamond, kTargets[2], 40 * MHz);
  const auto raw_c = extract_coupling(raw.triplet);
  const auto t = tune_subsystem(lay, kDiamond, kTargets[2], 40 * MHz, 0.5 * kWaveguides[2].period_d, {},
                                kTuneTol, 12);
  const double lower = t.result.triplet.zero - t.result.triplet.minus;
  const double upper = t.result.triplet.plus - t.result.triplet.zero;
  const bool split = std::abs(lower / kSplitting - 1) <= kSplittingTol &&
                     std::abs(upper / kSplitting - 1) <= kSplittingTol;
  const bool g = t.coupling.g >= kGRef / 2 && t.coupling.g <= 2 * kGRef;
  return {split && g && t.converged,
          fmt("tuned L_C = %.2f um: splittings -%.2f/+%.2f MHz (ref 7.1), g = %.2f MHz, delta = %.2f MHz; "
              "at L_C = 91.2 um: -%.2f/+%.2f MHz, g = %.2f MHz, delta = %.2f MHz",
              t.layout.length_L / um, lower / MHz, upper / MHz, t.coupling.g / MHz, t.coupling.delta / MHz,
              (raw.triplet.zero - raw.triplet.minus) / MHz, (raw.triplet.plus - raw.triplet.zero) / MHz,
              raw_c.g / MHz, raw_c.delta / MHz)};
}

Outcome c11() {
  const auto gaps = detect_gaps(dispersion_2d(kShield, kDiamond));
  if (gaps.gaps.empty()) return {false, "no shield gap"};
  const auto dom = *std::max_element(gaps.gaps.begin(), gaps.gaps.end(),
                                     [](const Interval& a, const Interval& b) { return a.width() < b.width(); });
  const bool overlaps = dom.lo < kShieldHi && dom.hi > kShieldLo;
  const double elo = std::abs(dom.lo / kShieldLo - 1), ehi = std::abs(dom.hi / kShieldHi - 1);
  return {overlaps && elo <= kShieldTol && ehi <= kShieldTol,
          fmt("dominant gap %.4f-%.4f GHz (edge errors %.1f%%, %.1f%%), %zu gaps in total", dom.lo / GHz,
              dom.hi / GHz, 100 * elo, 100 * ehi, gaps.gaps.size())};
}

Outcome c12() {
  // Each step's gap is the one overlapping the nominal lower/upper gap most.
  // Spread of a gap = largest max-min range of its two edges over the sweep.
  bool ok = true;
  std::string d;
  for (SweepParam p : {SweepParam::a, SweepParam::b}) {
    const auto sweep = robustness_sweep(kWaveguides[2], kDiamond, p, kSweep, kSweepSteps);
    const auto& nominal = sweep[sweep.size() / 2].gaps.gaps;
    std::vector<Interval> base;
    for (const auto& g : nominal)
      if (g.hi > kOperating.lo && g.lo < kOperating.hi) base.push_back(g);
    if (base.size() != 2) return {false, fmt("nominal C has %zu gaps in the window", base.size())};
    double lo_min[2] = {1e300, 1e300}, lo_max[2] = {-1e300, -1e300};
    double hi_min[2] = {1e300, 1e300}, hi_max[2] = {-1e300, -1e300};
    bool both = true;
    for (const auto& e : sweep) {
      for (int i = 0; i < 2; ++i) {
        const Interval* best = nullptr;
        double overlap = 0;
        for (const auto& g : e.gaps.gaps) {
          const double o = std::min(g.hi, base[i].hi) - std::max(g.lo, base[i].lo);
          if (o > overlap) overlap = o, best = &g;
        }
        if (!e.valid || !best) {
          both = false;
          continue;
        }
        lo_min[i] = std::min(lo_min[i], best->lo), lo_max[i] = std::max(lo_max[i], best->lo);
        hi_min[i] = std::min(hi_min[i], best->hi), hi_max[i] = std::max(hi_max[i], best->hi);
      }
    }
    const double lower = std::max(lo_max[0] - lo_min[0], hi_max[0] - hi_min[0]);
    const double upper = std::max(lo_max[1] - lo_min[1], hi_max[1] - hi_min[1]);
    ok &= both && lower < upper;
    d += fmt("%s%s: lower %.1f MHz, upper %.1f MHz%s", d.empty() ? "" : "; ", sweep_param_name(p),
             lower / MHz, upper / MHz, both ? "" : " (a step lost a gap)");
  }
  return {ok, "C over +-100 nm, 9 steps, " + d};
}

Outcome c13() {
  const auto g = honeycomb_layout(reference_network(2, 2));
  const int e = g.pick_edge(Port::C);
  const auto p = patch_confinement(g, e, 3, kDiamond, kTargets[2], 40 * MHz);
  return {p.stub_fraction[1] < kStubLimit,
          fmt("C patch, 3-period A/B stubs: dark mode %.2f%% in stubs (outer modes %.2f%%, %.2f%%); "
              "beyond the first stub period %.2f%%",
              100 * p.stub_fraction[1], 100 * p.stub_fraction[0], 100 * p.stub_fraction[2],
              100 * p.tail_fraction[1])};
}

std::set<int> parse_list(const char* s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.insert(std::atoi(item.c_str()));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, expect_fail;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string a = argv[i];
    if (a == "--only") only = parse_list(argv[i + 1]);
    else if (a == "--expect-fail") expect_fail = parse_list(argv[i + 1]);
    else {
      std::fprintf(stderr, "usage: acceptance [--only N,...] [--expect-fail N,...]\n");
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"coupling regression", c1},     {"coupling inversion", c2},     {"Lame constants", c3},
      {"FEM correctness", c4},         {"dispersion oracles", c5},     {"gap detection and regions", c6},
      {"convergence and scaling", c7}, {"waveguide gaps and regions", c8}, {"finite waveguide spacing", c9},
      {"coupled C triplet", c10},      {"shield gap", c11},            {"sweep stability", c12},
      {"patch confinement", c13}};
  int failed = 0, known = 0, passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool expected = expect_fail.count(id) > 0;
    std::printf("%s %2d %-28s %s [%.1f s]%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), s, !o.pass && expected ? " (known)" : "");
    std::fflush(stdout);
    if (o.pass) ++passed;
    else if (expected) ++known;
    else ++failed;
  }
  std::printf("summary: %d passed, %d failed, %d known failures\n", passed, failed + known, known);
  return failed ? 1 : 0;
}
