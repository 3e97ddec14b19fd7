#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "devices.hpp"
#include "error.hpp"
#include "oracles.hpp"

using namespace phononet;

namespace {

constexpr double um = kMicron;
constexpr double GHz = 1e9;
constexpr double MHz = 1e6;

const ResonatorSpec kResonator{21 * um, 3.15 * um};

WaveguideSpec waveguide_c() { return {7.6 * um, 2 * um, 0.8 * um, 0.76 * um, HoleAxis::Across}; }

SubsystemLayout layout_c(double L) {
  SubsystemLayout lay;
  lay.resonator = kResonator;
  lay.waveguide = waveguide_c();
  lay.length_L = L;
  lay.link = Port::C;
  return lay;
}

const ModeCatalog& catalog() {
  static const ModeCatalog c =
      resonator_modes(kResonator, Material::diamond(), 0.85 * GHz, 1.85 * GHz);
  return c;
}

}  // namespace

TEST_CASE("coupling extraction on the reference triplet") {
  const auto c = extract_coupling({1.3326 * GHz, 1.3397 * GHz, 1.3468 * GHz});
  CHECK(std::abs(c.delta) < 0.2 * MHz);
  CHECK(c.g == doctest::Approx(5.02 * MHz).epsilon(0.05 / 5.02));
}

TEST_CASE("coupling extraction inverts the three-mode model") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dd(-20 * MHz, 20 * MHz), dg(0.1 * MHz, 20 * MHz);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double delta = dd(rng), g = dg(rng);
    const auto t = oracle::coupled_triplet(1.3 * GHz, delta, g);
    const auto c = extract_coupling({t[0], t[1], t[2]});
    // The relative error floor is set by cancellation in f_r + delta.
    worst = std::max(worst, std::abs(c.g - g) / g);
    worst = std::max(worst, std::abs(c.delta - delta) / std::max(std::abs(delta), g));
  }
  CHECK(worst < 1e-10 * 1.3 * GHz / (0.1 * MHz));
}

TEST_CASE("coupling extraction edge cases") {
  const auto c = extract_coupling({1 * GHz, 1 * GHz, 1 * GHz});
  CHECK(c.delta == 0);
  CHECK(c.g == 0);
  CHECK_THROWS_AS(extract_coupling({1.2 * GHz, 1.1 * GHz, 1.3 * GHz}), Error);
}

TEST_CASE("resonator catalog") {
  const auto& cat = catalog();
  CHECK(cat.port_tags.size() == 3);
  for (double target : {0.9634, 1.1691, 1.3388, 1.7339}) {
    double best = 1e9;
    for (const auto& m : cat.modes) best = std::min(best, std::abs(m.mode.frequency / GHz - target));
    CHECK(best < 0.1 * target);
  }
  for (const auto& m : cat.modes) {
    CHECK(m.mode.frequency >= 0.85 * GHz);
    CHECK(m.mode.frequency <= 1.85 * GHz);
    REQUIRE(m.ports.size() == 3);
    // Threefold symmetry: one value per group on every port.
    CHECK(std::abs(m.ports[0] - m.ports[1]) <= 1e-6 * m.ports[0] + 1e-12);
    CHECK(std::abs(m.ports[0] - m.ports[2]) <= 1e-6 * m.ports[0] + 1e-12);
  }
}

TEST_CASE("resonator frequencies scale inversely with size") {
  const ResonatorSpec big{42 * um, 6.3 * um};
  const auto a = resonator_modes(kResonator, Material::diamond(), 0.9 * GHz, 1.0 * GHz);
  const auto b = resonator_modes(big, Material::diamond(), 0.45 * GHz, 0.5 * GHz);
  REQUIRE(a.modes.size() == b.modes.size());
  REQUIRE(!a.modes.empty());
  for (std::size_t i = 0; i < a.modes.size(); ++i)
    CHECK(std::abs(2 * b.modes[i].mode.frequency / a.modes[i].mode.frequency - 1) < 1e-4);
}

TEST_CASE("window below the first elastic mode") {
  const auto c = resonator_modes(kResonator, Material::diamond(), 0.0, 50 * MHz);
  CHECK(c.modes.size() == 3);
  for (const auto& m : c.modes) CHECK(m.mode.frequency < 1e3);
  CHECK(resonator_modes(kResonator, Material::diamond(), 10 * MHz, 50 * MHz).modes.empty());
  CHECK_THROWS_AS(resonator_modes(kResonator, Material::diamond(), 1 * GHz, 0.9 * GHz), Error);
}

TEST_CASE("hole-free strip spacing matches the bar speed") {
  const WaveguideSpec plain{6 * um, 3 * um, 0, 0};
  const double L = 60 * um, c = std::sqrt(Material::diamond().youngs_modulus / Material::diamond().density);
  const auto w = finite_waveguide_modes(plain, L, Material::diamond(), 0.3 * GHz, 0.6 * GHz);
  // Longitudinal standing waves are spaced by c / 2L.
  const double expected = c / (2 * L);
  int matched = 0;
  for (std::size_t i = 0; i < w.catalog.modes.size(); ++i)
    if (w.parity[i] > 0 && w.spacing[i] > 0)
      matched += std::abs(w.spacing[i] / expected - 1) < 0.2;
  CHECK(matched >= 1);
}

TEST_CASE("waveguide C mode spacing") {
  const auto w = finite_waveguide_modes(waveguide_c(), 91.2 * um, Material::diamond(), 1.30 * GHz,
                                        1.38 * GHz);
  REQUIRE(!w.catalog.modes.empty());
  CHECK(w.spacing_near(1.3388 * GHz) == doctest::Approx(28 * MHz).epsilon(0.3));
  for (const auto& m : w.catalog.modes) {
    CHECK(m.confinement >= 0);
    CHECK(m.confinement <= 1);
  }
  CHECK_THROWS_AS(finite_waveguide_modes(waveguide_c(), 20 * um, Material::diamond(), 1.3 * GHz,
                                         1.4 * GHz),
                  Error);
}

TEST_CASE("length tuning") {
  const auto t = tune_length(waveguide_c(), Material::diamond(), 1.3388 * GHz, 84 * um, 100 * um);
  CHECK(std::abs(t.achieved_f - 1.3388 * GHz) <= 1 * MHz);
  CHECK(t.length == doctest::Approx(91.2 * um).epsilon(0.1));
  CHECK(!t.crossings.empty());
  CHECK(t.scan.size() > 30);

  DeviceOptions coarse;
  coarse.target_h = 7.6 * um / 8;
  try {
    tune_length(waveguide_c(), Material::diamond(), 1.1 * GHz, 84 * um, 100 * um, coarse);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoCrossing);
    CHECK(std::string(e.what()).find("nearest approach") != std::string::npos);
  }
}

TEST_CASE("coupled triplet near resonance") {
  const auto lay = layout_c(89.3 * um);
  const auto r = coupled_triplet(lay, Material::diamond(), 1.3388 * GHz, 40 * MHz);
  CHECK(r.triplet.minus < r.triplet.zero);
  CHECK(r.triplet.zero < r.triplet.plus);
  const auto c = extract_coupling(r.triplet);
  CHECK(std::abs(c.delta) < 2 * MHz);
  CHECK(c.g > 2.5 * MHz);
  CHECK(c.g < 10 * MHz);
  // The middle mode is the darkest; the outer two share the strip.
  CHECK(r.waveguide_fraction[1] < 0.3);
  CHECK(r.waveguide_fraction[0] > r.waveguide_fraction[1]);
  CHECK(r.waveguide_fraction[2] > r.waveguide_fraction[1]);

  // Same subsystem, mirrored mesh.
  const Mesh m = triangulate(subsystem_assembly(lay), default_assembly_h(lay), 25.0);
  const double axis = 3 * um;
  const auto rm = coupled_triplet(mirror_x(m, axis), LayoutFrame{true, axis}, lay,
                                  Material::diamond(), 1.3388 * GHz, 40 * MHz);
  CHECK(std::abs(rm.triplet.minus / r.triplet.minus - 1) < 1e-8);
  CHECK(std::abs(rm.triplet.zero / r.triplet.zero - 1) < 1e-8);
  CHECK(std::abs(rm.triplet.plus / r.triplet.plus - 1) < 1e-8);
  for (int i = 0; i < 3; ++i) CHECK(rm.waveguide_fraction[i] == doctest::Approx(r.waveguide_fraction[i]).epsilon(1e-6));

  // A loop around everything holds all the energy.
  const auto ops = assemble(r.mesh, Material::diamond());
  Loop all{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  CHECK(dark_mode_fraction(ops, r.modes[1], r.mesh, {all}) == doctest::Approx(1.0));
  CHECK(dark_mode_fraction(ops, r.modes[1], r.mesh, {}) == 0.0);
}
