#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace phononet {

/// Open frequency interval (Hz).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double f) const { return f > lo && f < hi; }
  double width() const { return hi - lo; }
};

using IntervalSet = std::vector<Interval>;

IntervalSet interval_intersect(const IntervalSet& a, const IntervalSet& b);
IntervalSet interval_subtract(const IntervalSet& a, const IntervalSet& b);
IntervalSet interval_union(const IntervalSet& a, const IntervalSet& b);

struct BandStructure {
  std::vector<double> k;                   // rad/m, or path length for 2D paths
  std::vector<std::array<double, 2>> kvec; // wavevector per sample (2D paths)
  std::vector<std::vector<double>> bands;  // bands[i][j], Hz, ascending in j
  double f_max = 0.0;
  double period = 0.0;  // lattice constant used for axis scaling
  /// Gaps narrower than this are discarded by detect_gaps (sampling noise of
  /// refined computed bands); zero for synthetic data.
  double resolution_hz = 0.0;
  std::vector<std::pair<double, std::string>> ticks;  // labelled path points

  std::size_t n_bands() const { return bands.empty() ? 0 : bands.front().size(); }
  void validate() const;
};

struct GapSet {
  IntervalSet gaps;
};

struct RegionSet {
  IntervalSet region_I, region_II, region_III, region_IV;
};

enum class Region { None, I, II, III, IV };
const char* region_name(Region r);

GapSet detect_gaps(const BandStructure& bs);
RegionSet classify_regions(const GapSet& a, const GapSet& b, const GapSet& c);
Region classify_frequency(double f, const RegionSet& regions);

struct DispersionOptions {
  int n_k = 25;
  int n_bands = 12;        // initial guess; raised until complete below f_max
  double f_max = 2.5e9;    // Hz
  double target_h = 0.0;   // m; 0 = period/12
  double min_angle_deg = 25.0;
  int ellipse_segments = 64;
  double tol = 1e-9;
  bool refine_edges = true;
  double refine_tol_hz = 1e6;
  int threads = 0;  // 0 = default_threads()
};

BandStructure dispersion(const WaveguideSpec& spec, const Material& material,
                         const DispersionOptions& options = {});

/// Square lattice path Gamma -> X -> M -> Gamma with n_per_leg samples per leg.
BandStructure dispersion_2d(const ShieldSpec& spec, const Material& material,
                            const DispersionOptions& options = {});

enum class SweepParam { d, w, a, b };
std::optional<SweepParam> parse_sweep_param(const std::string& s);
const char* sweep_param_name(SweepParam p);

struct SweepEntry {
  double value = 0.0;  // m
  WaveguideSpec spec;
  bool valid = true;
  std::string error;
  GapSet gaps;
};

std::vector<SweepEntry> robustness_sweep(const WaveguideSpec& spec, const Material& material,
                                         SweepParam param, double delta_range, int n_steps,
                                         const DispersionOptions& options = {});

// Plain-file exports.
void write_bands_csv(std::ostream& os, const BandStructure& bs);
BandStructure read_bands_csv(std::istream& is);
std::string gaps_json(const GapSet& gaps);
std::string regions_json(const RegionSet& regions);
std::string sweep_json(const std::vector<SweepEntry>& sweep, SweepParam param);
/// Inverse of sweep_json (value, validity and gaps only).
std::vector<SweepEntry> read_sweep_json(const std::string& text, SweepParam* param);

struct BandPlotOptions {
  std::string title;
  std::vector<std::pair<double, std::string>> markers;  // dotted frequency lines (Hz)
  const RegionSet* regions = nullptr;                   // dashed region boundaries
};

std::string band_diagram_svg(const BandStructure& bs, const GapSet& gaps,
                             const BandPlotOptions& options = {});
std::string gap_sweep_svg(const std::vector<SweepEntry>& sweep, SweepParam param);

}  // namespace phononet
