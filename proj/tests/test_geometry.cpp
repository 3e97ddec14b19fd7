#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <sstream>

#include "error.hpp"
#include "geometry.hpp"

using namespace phononet;

namespace {

constexpr double um = kMicron;

WaveguideSpec wg(double d, double w, double a, double b) { return {d * um, w * um, a * um, b * um}; }

double hole_area(const PolyRegion& r) {
  double s = 0;
  for (const auto& h : r.holes) s += -signed_area(h);
  return s;
}

}  // namespace

TEST_CASE("material validation") {
  CHECK_NOTHROW(Material::diamond().validate());
  Material m = Material::diamond();
  m.poisson_ratio = 0.5;
  try {
    m.validate();
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Material);
    CHECK(std::string(e.what()).find("Lam") != std::string::npos);
  }
  m = Material::diamond();
  m.density = 0;
  CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("waveguide cell") {
  const auto r = waveguide_cell(wg(6, 3, 1.1, 0.3), 64);
  CHECK_NOTHROW(r.validate());
  REQUIRE(r.holes.size() == 1);
  CHECK(r.holes[0].size() == 64);
  const double exact = kPi * 1.1 * 0.3 * um * um;
  const double poly = 0.5 * 64 * std::sin(2 * kPi / 64) * 1.1 * 0.3 * um * um;
  CHECK(hole_area(r) == doctest::Approx(poly).epsilon(1e-12));
  CHECK(hole_area(r) < exact);
  CHECK(r.area() == doctest::Approx(18 * um * um - poly).epsilon(1e-12));
  const auto tags = r.tag_names();
  CHECK(std::find(tags.begin(), tags.end(), "periodic_minus") != tags.end());
  CHECK(std::find(tags.begin(), tags.end(), "periodic_plus") != tags.end());

  // Mirror symmetry about both axes.
  for (const auto& p : r.holes[0]) {
    for (Vec2 q : {Vec2{-p.x, p.y}, Vec2{p.x, -p.y}}) {
      double best = 1e9;
      for (const auto& s : r.holes[0]) best = std::min(best, norm(s - q));
      CHECK(best < 1e-12 * um);
    }
  }

  const auto plain = waveguide_cell(wg(6, 3, 0, 0));
  CHECK(plain.holes.empty());
  CHECK(plain.area() == doctest::Approx(18 * um * um));

  CHECK_THROWS_AS(waveguide_cell(wg(6, 3, 3.1, 0.3)), Error);
  CHECK_THROWS_AS(waveguide_cell(wg(6, 3, 1.1, 1.6)), Error);
  CHECK_THROWS_AS(waveguide_cell(wg(6, 3, 1.1, 0.3), 8), Error);
}

TEST_CASE("ellipse area converges quadratically") {
  double prev = 0;
  for (int n : {32, 64, 128, 256}) {
    const auto loop = ellipse_polygon({0, 0}, 1.0, 0.5, n);
    const double err = kPi * 0.5 - signed_area(loop);
    if (prev > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.02));
    prev = err;
  }
}

TEST_CASE("waveguide strip") {
  const auto c = wg(7.6, 2.0, 0.8, 0.76);
  CHECK(strip_hole_count(c, 91.2 * um) == 12);
  const auto r = waveguide_strip(c, 91.2 * um);
  CHECK(r.holes.size() == 12);
  CHECK_NOTHROW(r.validate());
  // Symmetric about the midpoint.
  double sx = 0;
  for (const auto& h : r.holes)
    for (const auto& p : h) sx += p.x;
  CHECK(std::abs(sx) < 1e-9 * um);

  const auto a = wg(6, 3, 1.1, 0.3);
  CHECK(waveguide_strip(a, 6 * um).holes.size() == 1);
  CHECK_THROWS_AS(waveguide_strip(a, 3 * um), Error);
}

TEST_CASE("resonator outline") {
  const ResonatorSpec spec{21 * um, 3.15 * um};
  const auto r = resonator_outline(spec);
  CHECK(r.outer.size() == 6);
  CHECK_NOTHROW(r.validate());
  const double tri = std::sqrt(3.0) / 4.0;
  const double expected = tri * 21 * 21 - 3 * tri * 3.15 * 3.15;
  CHECK(r.area() == doctest::Approx(expected * um * um).epsilon(1e-12));

  // 120 degree rotation about the centroid maps the vertex set onto itself.
  Vec2 c{0, 0};
  for (const auto& p : r.outer) c = c + p * (1.0 / r.outer.size());
  for (const auto& p : r.outer) {
    const Vec2 q = rotate(p - c, 2 * kPi / 3) + c;
    double best = 1e9;
    for (const auto& s : r.outer) best = std::min(best, norm(s - q));
    CHECK(best <= 1e-12 * spec.side_s);
  }
  const auto tags = r.tag_names();
  for (const char* t : {"port_A", "port_B", "port_C"})
    CHECK(std::find(tags.begin(), tags.end(), t) != tags.end());

  const auto triangle = resonator_outline({21 * um, 0});
  CHECK(triangle.outer.size() == 3);
  CHECK(triangle.area() == doctest::Approx(tri * 21 * 21 * um * um).epsilon(1e-12));
  CHECK_THROWS_AS(resonator_outline({21 * um, 11 * um}), Error);
}

TEST_CASE("shield cell") {
  const ShieldSpec s{3.8 * um, 3.5 * um, 1.0 * um};
  const auto r = shield_cell(s);
  CHECK_NOTHROW(r.validate());
  const double solid = 3.5 * 3.5 + 2 * 1.0 * (3.8 - 3.5);
  CHECK(r.area() == doctest::Approx(solid * um * um).epsilon(1e-12));
  const double void_fraction = 1 - r.area() / (3.8 * 3.8 * um * um);
  CHECK(void_fraction == doctest::Approx(1 - solid / (3.8 * 3.8)).epsilon(1e-12));

  const auto full = shield_cell({3.8 * um, 3.8 * um, 1.0 * um});
  CHECK(full.area() == doctest::Approx(3.8 * 3.8 * um * um).epsilon(1e-12));
  CHECK(full.holes.empty());
  CHECK_THROWS_AS(shield_cell({3.8 * um, 3.5 * um, 0.0}), Error);
}

TEST_CASE("region validation rejects bad loops") {
  PolyRegion bow;
  bow.outer = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  CHECK_THROWS_AS(bow.validate(), Error);
  PolyRegion cw;
  cw.outer = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
  CHECK_THROWS_AS(cw.validate(), Error);
  PolyRegion outside;
  outside.outer = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  outside.holes = {{{2, 2}, {2, 3}, {3, 3}, {3, 2}}};
  CHECK_THROWS_AS(outside.validate(), Error);
}

TEST_CASE("polygon text round trip") {
  const auto r = waveguide_cell(wg(6, 3, 1.1, 0.3), 32);
  std::stringstream ss;
  r.write(ss);
  const auto back = PolyRegion::read(ss);
  REQUIRE(back.holes.size() == 1);
  REQUIRE(back.outer.size() == r.outer.size());
  for (std::size_t i = 0; i < r.outer.size(); ++i)
    CHECK(norm(back.outer[i] - r.outer[i]) < 1e-12 * um);
  CHECK(back.area() == doctest::Approx(r.area()).epsilon(1e-12));
}

TEST_CASE("subsystem assembly") {
  SubsystemLayout lay;
  lay.resonator = {21 * um, 3.15 * um};
  lay.waveguide = wg(7.6, 2.0, 0.8, 0.76);
  lay.length_L = 91.2 * um;
  lay.link = Port::C;
  const auto r = subsystem_assembly(lay);
  CHECK_NOTHROW(r.validate());
  CHECK(r.holes.size() == 12);
  const double res = resonator_outline(lay.resonator).area();
  const auto strip = waveguide_strip(lay.waveguide, lay.length_L);
  // The strip butts flush against the port edges: no overlap.
  CHECK(r.area() == doctest::Approx(2 * res + strip.area()).epsilon(1e-9));

  // Stubs on the remaining ports add their own area.
  SubsystemLayout stubbed = lay;
  const auto a = wg(6, 3, 1.1, 0.3), b = wg(4, 3, 1.1, 0.3);
  stubbed.stubs = {{a, 3}, {b, 3}};
  const auto rs = subsystem_assembly(stubbed);
  CHECK_NOTHROW(rs.validate());
  const double stub_area =
      2 * (waveguide_strip(a, 18 * um).area() + waveguide_strip(b, 12 * um).area());
  CHECK(rs.area() == doctest::Approx(r.area() + stub_area).epsilon(1e-9));
  CHECK(rs.holes.size() == 12 + 2 * 6);
}

TEST_CASE("hole orientation") {
  WaveguideSpec c = wg(7.6, 2, 0.8, 0.76);
  CHECK(c.hole_rx() == c.semi_major_a);
  c.hole_axis = HoleAxis::Across;
  CHECK(c.hole_ry() == c.semi_major_a);
  CHECK(c.hole_rx() == c.semi_minor_b);
  const auto cell = waveguide_cell(c, 256);
  REQUIRE(cell.holes.size() == 1);
  double x0 = 1, x1 = -1, y0 = 1, y1 = -1;
  for (auto p : cell.holes[0]) {
    x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
  }
  CHECK(0.5 * (y1 - y0) == doctest::Approx(c.semi_major_a).epsilon(1e-9));
  CHECK(0.5 * (x1 - x0) == doctest::Approx(c.semi_minor_b).epsilon(1e-3));
  CHECK(hole_area(cell) == doctest::Approx(kPi * 0.8 * 0.76 * um * um).epsilon(1e-3));

  // Across, 2a must fit in the width.
  WaveguideSpec bad = wg(7.6, 1.5, 0.8, 0.3);
  bad.hole_axis = HoleAxis::Across;
  try {
    bad.validate();
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("2a") != std::string::npos);
  }
  bad.hole_axis = HoleAxis::Along;
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("cross-hole shield cell") {
  ShieldSpec s{3.8 * um, 3.5 * um, 1.0 * um, ShieldStyle::CrossHole};
  CHECK_NOTHROW(s.validate());
  const auto cell = shield_cell(s);
  REQUIRE(cell.holes.size() == 1);
  CHECK(cell.holes[0].size() == 12);
  const double hole = 2 * 3.5 * 1.0 - 1.0 * 1.0;
  CHECK(hole_area(cell) == doctest::Approx(hole * um * um));
  CHECK(cell.area() == doctest::Approx((3.8 * 3.8 - hole) * um * um));
  const auto tags = cell.tag_names();
  CHECK(tags.size() == 4);
  CHECK(std::string(shield_style_name(s.style)) == "cross_hole");

  s.block_h_prime = 3.8 * um;
  CHECK_THROWS_AS(s.validate(), Error);
  s.block_h_prime = 0.9 * um;
  CHECK_THROWS_AS(s.validate(), Error);
}
