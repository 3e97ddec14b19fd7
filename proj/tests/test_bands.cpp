#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "bands.hpp"
#include "elasticity.hpp"
#include "error.hpp"
#include "mesh.hpp"
#include "oracles.hpp"

using namespace phononet;

namespace {

constexpr double um = kMicron;
constexpr double GHz = 1e9;

BandStructure synthetic(std::vector<std::vector<double>> rows, double f_max) {
  BandStructure bs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bs.k.push_back(double(i));
    bs.kvec.push_back({double(i), 0.0});
  }
  bs.bands = std::move(rows);
  bs.f_max = f_max;
  return bs;
}

DispersionOptions quick() {
  DispersionOptions o;
  o.n_k = 13;
  return o;
}

}  // namespace

TEST_CASE("synthetic gap detection") {
  auto flat = synthetic({{1.0 * GHz, 1.2 * GHz}, {1.0 * GHz, 1.2 * GHz}}, 2.5 * GHz);
  auto g = detect_gaps(flat);
  REQUIRE(g.gaps.size() == 1);
  CHECK(g.gaps[0].lo == 1.0 * GHz);
  CHECK(g.gaps[0].hi == 1.2 * GHz);

  auto crossing = synthetic({{1.3 * GHz, 1.4 * GHz}, {1.0 * GHz, 1.1 * GHz}}, 2.5 * GHz);
  CHECK(detect_gaps(crossing).gaps.empty());

  // Gaps reaching above f_max are not reported.
  auto high = synthetic({{1.0 * GHz, 3.0 * GHz}}, 2.5 * GHz);
  CHECK(detect_gaps(high).gaps.empty());
}

TEST_CASE("gap detection matches a grid scan") {
  std::mt19937_64 rng(2024);
  const double f_max = 2.5 * GHz, step = 10e3;
  int with_gaps = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto rows = oracle::random_bands(rng, 25, 6, 0.35 * GHz, trial % 2 ? 1.0 : 2.5);
    const auto bs = synthetic(rows, f_max);
    const auto gaps = detect_gaps(bs);
    with_gaps += !gaps.gaps.empty();
    std::size_t n = 0;
    const auto scan = oracle::grid_scan(rows, f_max, step, &n);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = i * step;
      const bool in = std::any_of(gaps.gaps.begin(), gaps.gaps.end(),
                                  [f](const Interval& x) { return x.contains(f); });
      mismatches += in != bool(scan[i]);
    }
    CHECK(mismatches == 0);
  }
  CHECK(with_gaps > 10);
  CHECK(with_gaps < 100);
}

TEST_CASE("interval algebra and regions") {
  const GapSet A{{{1.0, 1.5}}}, B{{{0.8, 1.3}}}, C{{{0.9, 1.1}, {1.4, 1.6}}};
  const auto r = classify_regions(A, B, C);
  auto same = [](const IntervalSet& s, std::vector<std::pair<double, double>> want) {
    REQUIRE(s.size() == want.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].lo == doctest::Approx(want[i].first));
      CHECK(s[i].hi == doctest::Approx(want[i].second));
    }
  };
  same(r.region_IV, {{1.0, 1.1}});
  same(r.region_III, {{1.1, 1.3}});
  same(r.region_II, {{1.4, 1.5}});
  same(r.region_I, {{0.9, 1.0}});

  const auto empty = classify_regions({}, {}, {});
  CHECK(empty.region_I.empty());
  CHECK(empty.region_IV.empty());

  CHECK(classify_frequency(1.05, r) == Region::IV);
  CHECK(classify_frequency(1.1, r) == Region::None);  // open boundary
  CHECK(classify_frequency(0.95, r) == Region::I);
  CHECK(classify_frequency(2.0, r) == Region::None);

  CHECK(interval_subtract({{0, 10}}, {{2, 3}, {5, 6}}).size() == 3);
  CHECK(interval_union({{0, 1}}, {{0.5, 2}}).size() == 1);
}

TEST_CASE("hole-free strip: thin-bar wave speed and no gaps") {
  const WaveguideSpec plain{6 * um, 3 * um, 0, 0};
  const auto mat = Material::diamond();
  const auto bs = dispersion(plain, mat, quick());
  CHECK(detect_gaps(bs).gaps.empty());
  // Extensional band: the faster of the two acoustic bands at the first nonzero k.
  const double k1 = bs.k[1];
  double slope = 0;
  for (std::size_t j = 0; j < 2; ++j) slope = std::max(slope, 2 * kPi * bs.bands[1][j] / k1);
  const double c = std::sqrt(mat.youngs_modulus / mat.density);
  CHECK(std::abs(slope / c - 1) < 0.01);
}

TEST_CASE("band completeness and time reversal") {
  const WaveguideSpec a{6 * um, 3 * um, 1.1 * um, 0.3 * um, HoleAxis::Across};
  DispersionOptions o = quick();
  o.refine_edges = false;
  const auto bs = dispersion(a, Material::diamond(), o);
  CHECK_NOTHROW(bs.validate());
  for (const auto& row : bs.bands) CHECK(row.back() > o.f_max);

  // Independent re-solve of one k with three surplus modes.
  MeshOptions mo;
  mo.target_h = a.period_d / 12;
  mo.mirrored = {{"periodic_minus", "periodic_plus", Isometry::shift({a.period_d, 0})}};
  const Mesh m = triangulate(waveguide_cell(a), mo);
  const auto map = periodic_pair(m, "periodic_minus", "periodic_plus", {a.period_d, 0});
  const auto ops = assemble(m, Material::diamond());
  const std::size_t i = 5;
  const int n = static_cast<int>(bs.n_bands());
  const auto plus = eigs(apply_bloch(ops, map, bs.k[i]), 0.0, n + 3);
  const auto minus = eigs(apply_bloch(ops, map, -bs.k[i]), 0.0, n + 3);
  int below = 0;
  for (const auto& md : plus) below += md.frequency <= o.f_max;
  int listed = 0;
  for (double f : bs.bands[i]) listed += f <= o.f_max;
  CHECK(below == listed);
  for (int j = 0; j < n; ++j) {
    CHECK(std::abs(plus[j].frequency - bs.bands[i][j]) <= 1e-6 * bs.bands[i][j] + 1.0);
    CHECK(std::abs(plus[j].frequency - minus[j].frequency) <= 1e-8 * plus[j].frequency + 1.0);
  }
}

TEST_CASE("solid square lattice has no gaps") {
  DispersionOptions o;
  o.n_k = 9;
  const auto bs = dispersion_2d({3.8 * um, 3.8 * um, 1.0 * um}, Material::diamond(), o);
  CHECK(detect_gaps(bs).gaps.empty());
  CHECK(bs.bands[0][0] < 1e6);
  CHECK(bs.bands[0][1] < 1e6);
  CHECK(bs.bands[0][2] > 1e8);
  CHECK(bs.ticks.size() == 4);
}

TEST_CASE("robustness sweep bookkeeping") {
  const WaveguideSpec c{7.6 * um, 2 * um, 0.8 * um, 0.76 * um, HoleAxis::Across};
  DispersionOptions o = quick();
  o.refine_edges = false;
  const auto base = robustness_sweep(c, Material::diamond(), SweepParam::a, 0.0, 9, o);
  REQUIRE(base.size() == 1);
  CHECK(base[0].value == c.semi_major_a);
  const auto ref = detect_gaps(dispersion(c, Material::diamond(), o));
  REQUIRE(base[0].gaps.gaps.size() == ref.gaps.size());
  for (std::size_t i = 0; i < ref.gaps.size(); ++i) CHECK(base[0].gaps.gaps[i].lo == ref.gaps[i].lo);

  // A step that breaches the strip is reported and the sweep continues.
  const auto wide = robustness_sweep(c, Material::diamond(), SweepParam::a, 0.25 * um, 3, o);
  REQUIRE(wide.size() == 3);
  CHECK(wide[0].valid);
  CHECK(wide[1].valid);
  CHECK_FALSE(wide[2].valid);
  CHECK(wide[2].error.find("2a") != std::string::npos);
}

TEST_CASE("exports") {
  auto bs = synthetic({{0.0, 1.0 * GHz, 1.2 * GHz}, {0.1 * GHz, 0.9 * GHz, 1.4 * GHz}}, 2.5 * GHz);
  bs.period = 6 * um;
  bs.ticks = {{0.0, "G"}, {1.0, "X"}};
  std::stringstream ss;
  write_bands_csv(ss, bs);
  const auto back = read_bands_csv(ss);
  REQUIRE(back.bands.size() == 2);
  CHECK(back.bands[1][2] == doctest::Approx(1.4 * GHz));
  CHECK(back.f_max == doctest::Approx(2.5 * GHz));
  CHECK(back.ticks.size() == 2);

  const auto gaps = detect_gaps(bs);
  const std::string a = band_diagram_svg(bs, gaps), b = band_diagram_svg(bs, gaps);
  CHECK(a == b);
  CHECK(a.find("<rect x=") != std::string::npos);
  const std::string none = band_diagram_svg(bs, GapSet{});
  CHECK(none.find("#c6dbef") == std::string::npos);
  CHECK(gaps_json(gaps).find("\"gaps\"") != std::string::npos);
  std::stringstream bad("x,y\n1,2\n");
  CHECK_THROWS_AS(read_bands_csv(bad), Error);
}
