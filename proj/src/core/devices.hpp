#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "bands.hpp"
#include "elasticity.hpp"
#include "geometry.hpp"
#include "mesh.hpp"

namespace phononet {

struct DeviceOptions {
  double target_h = 0.0;  // m; 0 = side/42 for resonators, period/12 for strips
  double min_angle_deg = 25.0;
  int ellipse_segments = 64;
  double tol = 1e-9;
  int threads = 0;
};

struct CatalogMode {
  ModeSolution mode;
  /// RMS normal displacement over each port (resonator: A, B, C; strip: minus
  /// and plus ends) relative to the mode's area RMS displacement. Members of a
  /// degenerate group share the group's basis-independent value.
  std::vector<double> ports;
  Region region = Region::None;
  /// Strain-energy fraction away from free ends (strips); 1 for resonators.
  double confinement = 1.0;
  int group = 0;  // degenerate group index
};

struct ModeCatalog {
  Mesh mesh;
  std::vector<std::string> port_tags;
  std::vector<CatalogMode> modes;
};

/// Threefold-symmetric mesh of the truncated triangle, built from one sector.
Mesh resonator_mesh(const ResonatorSpec& spec, const DeviceOptions& options = {});
Mesh strip_mesh(const WaveguideSpec& spec, double length_L, const DeviceOptions& options = {});

/// All modes with f_lo <= f <= f_hi (Hz). f_lo <= 0 includes rigid-body modes.
ModeCatalog resonator_modes(const ResonatorSpec& spec, const Material& material, double f_lo,
                            double f_hi, const DeviceOptions& options = {},
                            const RegionSet* regions = nullptr);

struct WaveguideModes {
  ModeCatalog catalog;
  std::vector<double> wavenumber;  // dominant Bloch wavenumber per mode, rad/m in [0, pi/d]
  std::vector<int> parity;         // +1 / -1 under reflection across the strip axis
  std::vector<double> spacing;     // to the neighbouring modes on the same branch; 0 if none

  /// Branch spacing of the mode nearest f (Hz).
  double spacing_near(double f) const;
  std::size_t nearest(double f) const;
};

WaveguideModes finite_waveguide_modes(const WaveguideSpec& spec, double length_L,
                                      const Material& material, double f_lo, double f_hi,
                                      const DeviceOptions& options = {},
                                      const RegionSet* regions = nullptr);

struct TuneSample {
  double length = 0.0;
  double frequency = 0.0;  // tracked branch
};

struct TuneResult {
  double length = 0.0;
  double achieved_f = 0.0;
  std::vector<double> crossings;  // every bracketed length in range
  std::vector<TuneSample> scan;   // branch nearest the target at each scan length
};

/// Length at which a standing-wave mode of the free strip sits within
/// `tolerance_hz` of f_target. Coarse scan at period/20, then bisection on the
/// crossing branch. Picks the crossing nearest the middle of the range.
TuneResult tune_length(const WaveguideSpec& spec, const Material& material, double f_target,
                       double L_lo, double L_hi, const DeviceOptions& options = {},
                       double tolerance_hz = 1e6);

struct CoupledTriplet {
  double minus = 0.0;  // Hz
  double zero = 0.0;
  double plus = 0.0;
};

struct CouplingEstimate {
  double delta = 0.0;  // Hz
  double g = 0.0;      // Hz
};

CouplingEstimate extract_coupling(const CoupledTriplet& t);

/// How assembly mesh coordinates relate to the layout frame.
struct LayoutFrame {
  bool mirrored = false;  // mesh = mirror_x(layout mesh, axis_x)
  double axis_x = 0.0;
};

struct CoupledResult {
  CoupledTriplet triplet;
  std::array<ModeSolution, 3> modes;
  std::array<double, 3> overlap{};             // projection onto the resonator/waveguide family
  std::array<double, 3> waveguide_fraction{};  // strain energy in the linking strip
  double resonator_f = 0.0;                    // isolated references
  double waveguide_f = 0.0;
  std::vector<double> candidates;  // every assembly mode in the window
  Mesh mesh;
};

/// The three normal modes nearest f_center formed by the resonator mode and the
/// strip mode closest to f_center. window is the half-width (Hz) searched.
CoupledResult coupled_triplet(const SubsystemLayout& layout, const Material& material,
                              double f_center, double window, const DeviceOptions& options = {});
CoupledResult coupled_triplet(const Mesh& assembly, const LayoutFrame& frame,
                              const SubsystemLayout& layout, const Material& material,
                              double f_center, double window, const DeviceOptions& options = {});

struct TuningStep {
  double length = 0.0;
  CouplingEstimate coupling;
};

struct SubsystemTuning {
  SubsystemLayout layout;  // with the final length
  CoupledResult result;
  CouplingEstimate coupling;
  std::vector<TuningStep> history;
  bool converged = false;
};

/// Scans the link length over layout.length_L +- span in steps of period/8 for
/// the triplet with the smallest detuning whose middle mode is the darkest, then
/// refines between sign changes. history lists every resolvable length.
SubsystemTuning tune_subsystem(const SubsystemLayout& layout, const Material& material,
                               double f_center, double window, double span,
                               const DeviceOptions& options = {}, double delta_tol = 0.05e6,
                               int max_steps = 12);

double default_assembly_h(const SubsystemLayout& layout);

/// Strain-energy fraction of elements whose centroid lies inside any loop.
double energy_fraction(const std::vector<double>& element_energy, const Mesh& mesh,
                       const std::vector<Loop>& subregion);
double dark_mode_fraction(const OperatorPair& ops, const ModeSolution& mode, const Mesh& mesh,
                          const std::vector<Loop>& subregion);

std::string catalog_json(const ModeCatalog& catalog);
std::string waveguide_modes_json(const WaveguideModes& w);
std::string tune_json(const TuneResult& t, double f_target);
std::string coupled_json(const CoupledResult& r, const CouplingEstimate* c);
std::string tuning_json(const SubsystemTuning& t);

/// One row per element: corner coordinates (um) and the mean corner
/// displacement magnitude scaled to a maximum of 1.
void write_mode_field_csv(std::ostream& os, const Mesh& mesh, const ModeSolution& mode);
std::string mode_field_svg(std::istream& csv, const std::string& title = "");

}  // namespace phononet
