#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace phononet {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMicron = 1e-6;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 rotate(Vec2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

/// Isotropic elastic solid with a plate thickness. SI units throughout.
struct Material {
  double youngs_modulus = 0.0;  // Pa
  double poisson_ratio = 0.0;
  double density = 0.0;    // kg/m^3
  double thickness = 0.0;  // m

  void validate() const;

  /// Single-crystal diamond constants used by the network design, 0.3 um plate.
  static Material diamond();
};

/// Which strip direction the semi-axis a points along.
enum class HoleAxis { Along, Across };

/// Strip of width w with one elliptical hole per period d. By default the
/// semi-axis a lies along the strip and b across it; HoleAxis::Across turns
/// the hole by 90 degrees.
struct WaveguideSpec {
  double period_d = 0.0;
  double width_w = 0.0;
  double semi_major_a = 0.0;
  double semi_minor_b = 0.0;
  HoleAxis hole_axis = HoleAxis::Along;

  void validate() const;
  bool has_hole() const { return semi_major_a > 0.0 && semi_minor_b > 0.0; }
  /// Hole semi-axis along the strip axis.
  double hole_rx() const { return hole_axis == HoleAxis::Along ? semi_major_a : semi_minor_b; }
  /// Hole semi-axis across the strip.
  double hole_ry() const { return hole_axis == HoleAxis::Along ? semi_minor_b : semi_major_a; }
};

const char* hole_axis_name(HoleAxis h);

/// Where waveguides attach to the resonator: the middle of each long side, or
/// the cut corner edges.
enum class PortSite { Side, Corner };

/// Equilateral triangle of side s with the three corners cut by s'.
struct ResonatorSpec {
  double side_s = 0.0;
  double corner_cut_s_prime = 0.0;
  PortSite port_site = PortSite::Side;

  void validate() const;
  /// Distance from the centroid to a port edge.
  double port_offset() const;
  /// Length of one port edge.
  double port_width() const;
};

const char* port_site_name(PortSite p);

enum class ShieldStyle {
  BlockTether,  // centred h' x h' block tied to each cell edge by a tether of width l
  CrossHole,    // solid cell with a centred cross-shaped hole of span h' and arm width l
};

/// Square lattice cell of period h.
struct ShieldSpec {
  double period_h = 0.0;
  double block_h_prime = 0.0;
  double tether_l = 0.0;
  ShieldStyle style = ShieldStyle::BlockTether;

  void validate() const;
};

const char* shield_style_name(ShieldStyle s);

using Loop = std::vector<Vec2>;

double signed_area(const Loop& loop);
bool point_in_loop(const Loop& loop, Vec2 p);

/// Polygon with holes. The outer loop is counterclockwise, holes clockwise.
/// edge_tags[l][i] labels the edge from vertex i to i+1 of loop l, where loop
/// 0 is the outer loop and loop 1+j is hole j. An empty string means untagged.
struct PolyRegion {
  Loop outer;
  std::vector<Loop> holes;
  std::vector<std::vector<std::string>> edge_tags;

  const Loop& loop(std::size_t l) const { return l == 0 ? outer : holes[l - 1]; }
  std::size_t loop_count() const { return 1 + holes.size(); }

  double area() const;
  bool contains(Vec2 p) const;
  std::vector<std::string> tag_names() const;
  /// Sets every edge tag, sizing the tag table if necessary.
  void set_tag(std::size_t loop, std::size_t edge, std::string tag);
  void ensure_tag_table();

  /// Throws a Geometry error naming the first violated invariant.
  void validate() const;

  void write(std::ostream& os) const;
  static PolyRegion read(std::istream& is);
};

/// Inscribed polygon of the ellipse centred at c, counterclockwise.
Loop ellipse_polygon(Vec2 c, double a, double b, int segments, double angle = 0.0);

PolyRegion waveguide_cell(const WaveguideSpec& spec, int ellipse_segments = 64);
PolyRegion waveguide_strip(const WaveguideSpec& spec, double length_L,
                           int ellipse_segments = 64);
PolyRegion resonator_outline(const ResonatorSpec& spec);
PolyRegion shield_cell(const ShieldSpec& spec);

/// Number of whole holes a strip of this length carries.
int strip_hole_count(const WaveguideSpec& spec, double length_L);

/// Port directions, counterclockwise from +x (index 0..2 = A, B, C). An
/// upward resonator has a corner at 90 degrees; side ports point away from the
/// corner of the same index. A downward resonator adds pi to each.
std::array<double, 3> port_angles(bool upward, PortSite site = PortSite::Side);

/// Resonator outline vertices (counterclockwise) and, per port, the index of
/// the edge from vertex i to i+1 it occupies (-1 if the port has no edge).
struct ResonatorRing {
  std::vector<Vec2> vertices;
  std::array<int, 3> port_edge{-1, -1, -1};
};
ResonatorRing resonator_ring(const ResonatorSpec& spec, Vec2 centre, bool upward);

enum class Port { A = 0, B = 1, C = 2 };
char port_letter(Port p);

/// A waveguide hanging off one port of a resonator.
struct Attachment {
  Port port = Port::C;
  WaveguideSpec waveguide;
  double length = 0.0;
};

/// Placement of one resonator in a composite region.
struct ResonatorPlacement {
  Vec2 centre;
  bool upward = true;
};

/// Two resonators joined by a waveguide along a shared port axis, optionally
/// with free-ended stubs on the other ports.
struct SubsystemLayout {
  ResonatorSpec resonator;
  Port link = Port::C;
  WaveguideSpec waveguide;
  double length_L = 0.0;
  std::vector<std::pair<WaveguideSpec, int>> stubs;  // one per remaining port label
  int ellipse_segments = 64;

  std::array<ResonatorPlacement, 2> placements() const;
  /// Outlines that make up the closed subsystem (two resonators plus strip),
  /// excluding any stubs.
  std::vector<Loop> extent_loops() const;
};

/// Union of two resonators and the linking strip (plus stubs). Stubs are
/// attached to the non-link ports in port order; each stub entry gives the
/// waveguide and its period count.
PolyRegion subsystem_assembly(const SubsystemLayout& layout);

std::string format_length_um(double meters);

}  // namespace phononet
