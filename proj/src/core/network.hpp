#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bands.hpp"
#include "devices.hpp"
#include "geometry.hpp"

namespace phononet {

/// Honeycomb network of truncated-triangle resonators. Each unit cell holds an
/// upward and a downward resonator joined by an A edge.
struct NetworkSpec {
  double L_A = 0.0;
  double L_B = 0.0;
  double L_C = 0.0;
  int rows = 1;
  int cols = 1;
  ResonatorSpec resonator;
  std::array<WaveguideSpec, 3> waveguides;  // A, B, C
  std::optional<ShieldSpec> shield;

  void validate() const;
  double length(Port p) const;
};

struct NetworkNode {
  Vec2 centre;
  bool upward = true;
  int row = 0, col = 0;
};

struct NetworkEdge {
  Port label = Port::A;
  int up = -1;    // node index of the upward end
  int down = -1;  // node index of the downward end
  double length = 0.0;  // free strip length between the port edges
  Vec2 start, end;      // port-edge midpoints, up end first
  std::array<Vec2, 4> strip;  // strip rectangle, counterclockwise
  bool interior = false;      // both ends carry all three edges
};

struct NetworkGraph {
  NetworkSpec spec;
  std::vector<NetworkNode> nodes;
  std::vector<NetworkEdge> edges;

  int degree(int node) const;
  /// First edge with this label whose ends both have full degree, else the
  /// first edge with the label, else -1.
  int pick_edge(Port label) const;
};

NetworkGraph honeycomb_layout(const NetworkSpec& spec);
/// Throws a layout error if non-adjacent resonators or strips overlap, or if an
/// edge length disagrees with the spec.
void check_layout(const NetworkGraph& graph);

/// Subsystem for one edge with stub_periods of each other waveguide on the
/// free ports, in the frame where the upward resonator sits at the origin.
SubsystemLayout edge_layout(const NetworkGraph& graph, int edge, int stub_periods);
/// Stub strips of a layout beyond `skip` from their port edges.
std::vector<Loop> stub_loops(const SubsystemLayout& layout, double skip_periods);
PolyRegion patch_region(const NetworkGraph& graph, int edge, int stub_periods);

struct LocalizedMode {
  double frequency = 0.0;
  double outside_fraction = 0.0;  // strain energy outside the extent loops
};

/// Modes of the patch nearest f_center with the strain energy found outside
/// the extent loops. options.target_h = 0 meshes at 0.5 um.
std::vector<LocalizedMode> localization_check(const PolyRegion& patch, const Material& material,
                                              double f_center, const std::vector<Loop>& extent,
                                              int n_modes = 3, const DeviceOptions& options = {});

struct PatchEntry {
  Port label = Port::A;
  int edge = -1;
  CoupledTriplet triplet;
  std::array<double, 3> stub_fraction{};  // beyond the junction line
  std::array<double, 3> tail_fraction{};  // beyond the first stub period
  double max_stub_fraction = 0.0;
  double max_tail_fraction = 0.0;
  std::optional<CouplingEstimate> coupling;
  bool confined = false;
};

/// Triplet of a patch (edge plus stubs) with the stub energy of each mode.
/// confined compares max_stub_fraction with threshold.
PatchEntry patch_confinement(const NetworkGraph& graph, int edge, int stub_periods,
                             const Material& material, double f_center, double window,
                             const DeviceOptions& options = {}, double threshold = 0.01);

struct ModeVerdict {
  std::string name;  // "a".."d"
  double target = 0.0;     // Hz
  double frequency = 0.0;  // nearest catalog mode
  Region expected = Region::None;
  Region region = Region::None;
  bool pass = false;
};

struct StageError {
  std::string stage;
  std::string message;
};

struct AuditOptions {
  DispersionOptions dispersion;
  DeviceOptions devices;
  std::array<double, 4> targets{1.7339e9, 0.9634e9, 1.3388e9, 1.1691e9};  // modes a, b, c, d
  double catalog_lo = 0.8e9;
  double catalog_hi = 1.9e9;
  double patch_window = 40e6;
  int stub_periods = 3;
  double confinement_threshold = 0.01;
};

struct AuditReport {
  std::array<GapSet, 3> gaps;
  RegionSet regions;
  std::vector<ModeVerdict> modes;
  std::vector<PatchEntry> patches;
  std::optional<GapSet> shield_gaps;
  std::optional<bool> shield_covers;
  std::vector<StageError> errors;

  bool passed() const;
};

AuditReport closed_subsystem_audit(const NetworkSpec& spec, const Material& material,
                                   const AuditOptions& options = {});

std::string layout_json(const NetworkGraph& graph);
/// Enough of the graph to redraw it: nodes, edges, resonator and strip widths.
NetworkGraph read_layout_json(const std::string& text);
std::string audit_json(const AuditReport& report);
/// Lattice drawing with edge labels; with a report, edges are coloured by the
/// verdict of their label.
std::string layout_svg(const NetworkGraph& graph, const AuditReport* report = nullptr);

}  // namespace phononet
