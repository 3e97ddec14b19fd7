#include "geometry.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "error.hpp"

namespace phononet {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Material: return "material error";
    case ErrorKind::Geometry: return "geometry error";
    case ErrorKind::Mesh: return "mesh error";
    case ErrorKind::Pairing: return "pairing error";
    case ErrorKind::Assembly: return "assembly error";
    case ErrorKind::Solver: return "solver error";
    case ErrorKind::NoCrossing: return "no crossing";
    case ErrorKind::Coupling: return "coupling error";
    case ErrorKind::Layout: return "layout error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

std::string format_length_um(double meters) {
  std::ostringstream os;
  os << std::setprecision(6) << meters / kMicron << " um";
  return os.str();
}

void Material::validate() const {
  if (!(youngs_modulus > 0.0)) fail(ErrorKind::Material, "youngs_modulus must be > 0");
  if (!(density > 0.0)) fail(ErrorKind::Material, "density must be > 0");
  if (!(thickness > 0.0)) fail(ErrorKind::Material, "thickness must be > 0");
  if (poisson_ratio >= 0.5)
    fail(ErrorKind::Material,
         "poisson_ratio must be < 0.5: the Lame constant lambda = nu*E/((1+nu)(1-2nu)) is "
         "singular at nu = 0.5");
  if (!(poisson_ratio > -1.0)) fail(ErrorKind::Material, "poisson_ratio must be > -1");
}

Material Material::diamond() { return {1050e9, 0.2, 3539.0, 0.3 * kMicron}; }

void WaveguideSpec::validate() const {
  if (!(period_d > 0.0)) fail(ErrorKind::Geometry, "waveguide period_d must be > 0");
  if (!(width_w > 0.0)) fail(ErrorKind::Geometry, "waveguide width_w must be > 0");
  if (semi_major_a < 0.0 || semi_minor_b < 0.0)
    fail(ErrorKind::Geometry, "waveguide hole semi-axes must be >= 0");
  const bool along = hole_axis == HoleAxis::Along;
  const char* ax = along ? "a" : "b";
  const char* ay = along ? "b" : "a";
  if (2.0 * hole_rx() >= period_d)
    fail(ErrorKind::Geometry, std::string("waveguide hole breaches the period: 2") + ax +
                                  " >= d (" + ax + " = " + format_length_um(hole_rx()) +
                                  ", d = " + format_length_um(period_d) + ")");
  if (2.0 * hole_ry() >= width_w)
    fail(ErrorKind::Geometry, std::string("waveguide hole breaches the strip edges: 2") + ay +
                                  " >= w (" + ay + " = " + format_length_um(hole_ry()) +
                                  ", w = " + format_length_um(width_w) + ")");
}

const char* hole_axis_name(HoleAxis h) { return h == HoleAxis::Along ? "along" : "across"; }

void ResonatorSpec::validate() const {
  if (!(side_s > 0.0)) fail(ErrorKind::Geometry, "resonator side_s must be > 0");
  if (corner_cut_s_prime < 0.0 || corner_cut_s_prime >= side_s / 2.0)
    fail(ErrorKind::Geometry, "resonator corner cut must satisfy 0 <= s' < s/2");
}

double ResonatorSpec::port_offset() const {
  if (port_site == PortSite::Side) return side_s / (2.0 * std::sqrt(3.0));
  return side_s / std::sqrt(3.0) - 0.5 * std::sqrt(3.0) * corner_cut_s_prime;
}

double ResonatorSpec::port_width() const {
  return port_site == PortSite::Side ? side_s - 2.0 * corner_cut_s_prime : corner_cut_s_prime;
}

const char* port_site_name(PortSite p) { return p == PortSite::Side ? "side" : "corner"; }

void ShieldSpec::validate() const {
  if (!(period_h > 0.0)) fail(ErrorKind::Geometry, "shield period_h must be > 0");
  if (!(block_h_prime > 0.0)) fail(ErrorKind::Geometry, "shield block_h_prime must be > 0");
  if (!(tether_l > 0.0))
    fail(ErrorKind::Geometry, "shield tether_l must be > 0: the block would be disconnected");
  if (style == ShieldStyle::CrossHole) {
    if (block_h_prime >= period_h)
      fail(ErrorKind::Geometry, "shield cross span h' must be smaller than period_h");
    if (tether_l >= block_h_prime)
      fail(ErrorKind::Geometry, "shield cross arm width l must be smaller than its span h'");
    return;
  }
  if (block_h_prime > period_h)
    fail(ErrorKind::Geometry, "shield block_h_prime must not exceed period_h");
  if (tether_l >= block_h_prime)
    fail(ErrorKind::Geometry, "shield tether must be narrower than the block");
}

const char* shield_style_name(ShieldStyle s) {
  return s == ShieldStyle::CrossHole ? "cross_hole" : "block_tether";
}

double signed_area(const Loop& loop) {
  double a = 0.0;
  const std::size_t n = loop.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(loop[i], loop[(i + 1) % n]);
  return 0.5 * a;
}

bool point_in_loop(const Loop& loop, Vec2 p) {
  bool inside = false;
  const std::size_t n = loop.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = loop[i], b = loop[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double PolyRegion::area() const {
  double a = signed_area(outer);
  for (const auto& h : holes) a += signed_area(h);
  return a;
}

bool PolyRegion::contains(Vec2 p) const {
  if (!point_in_loop(outer, p)) return false;
  for (const auto& h : holes)
    if (point_in_loop(h, p)) return false;
  return true;
}

void PolyRegion::ensure_tag_table() {
  edge_tags.resize(loop_count());
  for (std::size_t l = 0; l < loop_count(); ++l) edge_tags[l].resize(loop(l).size());
}

void PolyRegion::set_tag(std::size_t l, std::size_t edge, std::string tag) {
  ensure_tag_table();
  edge_tags.at(l).at(edge) = std::move(tag);
}

std::vector<std::string> PolyRegion::tag_names() const {
  std::set<std::string> names;
  for (const auto& loop_tags : edge_tags)
    for (const auto& t : loop_tags)
      if (!t.empty()) names.insert(t);
  return {names.begin(), names.end()};
}

namespace {

struct Edge {
  Vec2 a, b;
  std::size_t loop, index;
};

double orient(Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); }

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_touch(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

std::string where(Vec2 p) {
  std::ostringstream os;
  os << "(" << std::setprecision(9) << p.x / kMicron << ", " << p.y / kMicron << ") um";
  return os.str();
}

}  // namespace

void PolyRegion::validate() const {
  if (outer.size() < 3) fail(ErrorKind::Geometry, "outer loop needs at least 3 vertices");
  if (!(signed_area(outer) > 0.0))
    fail(ErrorKind::Geometry, "outer loop must be counterclockwise (positive signed area)");
  for (std::size_t h = 0; h < holes.size(); ++h) {
    if (holes[h].size() < 3) fail(ErrorKind::Geometry, "hole loop needs at least 3 vertices");
    if (!(signed_area(holes[h]) < 0.0))
      fail(ErrorKind::Geometry, "hole loops must be clockwise (negative signed area)");
    for (const Vec2& p : holes[h])
      if (!point_in_loop(outer, p))
        fail(ErrorKind::Geometry, "hole vertex outside the outer loop at " + where(p));
  }

  std::vector<Edge> edges;
  for (std::size_t l = 0; l < loop_count(); ++l) {
    const Loop& lp = loop(l);
    for (std::size_t i = 0; i < lp.size(); ++i) {
      const Vec2 a = lp[i], b = lp[(i + 1) % lp.size()];
      if (a == b) fail(ErrorKind::Geometry, "zero-length edge at " + where(a));
      edges.push_back({a, b, l, i});
    }
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& e, const Edge& f) {
              return std::min(e.a.x, e.b.x) < std::min(f.a.x, f.b.x);
            });
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    const double exmax = std::max(e.a.x, e.b.x);
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const Edge& f = edges[j];
      if (std::min(f.a.x, f.b.x) > exmax) break;
      if (std::max(e.a.y, e.b.y) < std::min(f.a.y, f.b.y) ||
          std::max(f.a.y, f.b.y) < std::min(e.a.y, e.b.y))
        continue;
      if (e.loop == f.loop) {
        const std::size_t n = loop(e.loop).size();
        const bool adjacent = (e.index + 1) % n == f.index || (f.index + 1) % n == e.index;
        if (adjacent) {
          // Adjacent edges may only share their common vertex.
          const Vec2 shared = (e.index + 1) % n == f.index ? e.b : e.a;
          const Vec2 e_other = shared == e.a ? e.b : e.a;
          const Vec2 f_other = shared == f.a ? f.b : f.a;
          if (orient(shared, e_other, f_other) == 0.0 &&
              dot(e_other - shared, f_other - shared) > 0.0)
            fail(ErrorKind::Geometry, "loop folds back on itself at " + where(shared));
          continue;
        }
      }
      if (segments_touch(e.a, e.b, f.a, f.b)) {
        if (e.loop == f.loop)
          fail(ErrorKind::Geometry, "self-intersecting loop near " + where(e.a));
        fail(ErrorKind::Geometry, "loops intersect near " + where(e.a));
      }
    }
  }
  for (std::size_t h = 0; h < holes.size(); ++h)
    for (std::size_t g = 0; g < holes.size(); ++g)
      if (g != h && point_in_loop(holes[g], holes[h].front()))
        fail(ErrorKind::Geometry, "nested holes near " + where(holes[h].front()));
}

void PolyRegion::write(std::ostream& os) const {
  os << std::setprecision(15);
  for (std::size_t l = 0; l < loop_count(); ++l) {
    if (l > 0) os << "\nHOLE\n";
    for (const Vec2& p : loop(l)) os << p.x / kMicron << ' ' << p.y / kMicron << '\n';
  }
}

PolyRegion PolyRegion::read(std::istream& is) {
  PolyRegion r;
  std::vector<Loop> loops(1);
  std::vector<bool> is_hole{false};
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      if (!loops.back().empty()) {
        loops.emplace_back();
        is_hole.push_back(false);
      }
      continue;
    }
    if (line.rfind("HOLE", 0) == 0) {
      if (!loops.back().empty()) {
        loops.emplace_back();
        is_hole.push_back(true);
      } else {
        is_hole.back() = true;
      }
      continue;
    }
    std::istringstream ls(line);
    Vec2 p;
    if (!(ls >> p.x >> p.y)) fail(ErrorKind::Io, "malformed polygon line: " + line);
    loops.back().push_back(p * kMicron);
  }
  if (loops.back().empty()) {
    loops.pop_back();
    is_hole.pop_back();
  }
  if (loops.empty() || is_hole.front()) fail(ErrorKind::Io, "polygon file has no outer loop");
  r.outer = loops.front();
  for (std::size_t i = 1; i < loops.size(); ++i) r.holes.push_back(loops[i]);
  return r;
}

Loop ellipse_polygon(Vec2 c, double a, double b, int segments, double angle) {
  Loop loop;
  loop.reserve(segments);
  for (int k = 0; k < segments; ++k) {
    const double t = 2.0 * kPi * k / segments;
    // Exact zeros on the axes keep mirrored vertices bit-identical.
    const double ct = (4 * k == segments || 4 * k == 3 * segments) ? 0.0 : std::cos(t);
    const double st = (2 * k == segments || k == 0) ? 0.0 : std::sin(t);
    loop.push_back(c + rotate({a * ct, b * st}, angle));
  }
  return loop;
}

namespace {

Loop reversed(Loop l) {
  std::reverse(l.begin(), l.end());
  return l;
}

void check_segments(int ellipse_segments) {
  if (ellipse_segments < 16)
    fail(ErrorKind::InvalidArgument, "ellipse_segments must be >= 16");
}

}  // namespace

PolyRegion waveguide_cell(const WaveguideSpec& spec, int ellipse_segments) {
  spec.validate();
  check_segments(ellipse_segments);
  const double hx = spec.period_d / 2.0, hy = spec.width_w / 2.0;
  PolyRegion r;
  r.outer = {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
  if (spec.has_hole())
    r.holes.push_back(
        reversed(ellipse_polygon({0, 0}, spec.hole_rx(), spec.hole_ry(), ellipse_segments)));
  r.set_tag(0, 0, "edge_bottom");
  r.set_tag(0, 1, "periodic_plus");
  r.set_tag(0, 2, "edge_top");
  r.set_tag(0, 3, "periodic_minus");
  return r;
}

int strip_hole_count(const WaveguideSpec& spec, double length_L) {
  return static_cast<int>(std::floor(length_L / spec.period_d * (1.0 + 1e-12)));
}

PolyRegion waveguide_strip(const WaveguideSpec& spec, double length_L, int ellipse_segments) {
  spec.validate();
  check_segments(ellipse_segments);
  if (length_L < spec.period_d * (1.0 - 1e-12))
    fail(ErrorKind::Geometry, "strip length " + format_length_um(length_L) +
                                  " is shorter than one period " +
                                  format_length_um(spec.period_d));
  const double hx = length_L / 2.0, hy = spec.width_w / 2.0;
  PolyRegion r;
  r.outer = {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
  if (spec.has_hole()) {
    const int n = strip_hole_count(spec, length_L);
    for (int i = 0; i < n; ++i) {
      const double x = (i - 0.5 * (n - 1)) * spec.period_d;
      r.holes.push_back(reversed(
          ellipse_polygon({x, 0}, spec.hole_rx(), spec.hole_ry(), ellipse_segments)));
    }
  }
  r.set_tag(0, 0, "edge_bottom");
  r.set_tag(0, 1, "end_plus");
  r.set_tag(0, 2, "edge_top");
  r.set_tag(0, 3, "end_minus");
  return r;
}

std::array<double, 3> port_angles(bool upward, PortSite site) {
  double base = upward ? kPi / 2.0 : -kPi / 2.0;
  if (site == PortSite::Side) base += kPi;
  return {base, base + 2.0 * kPi / 3.0, base + 4.0 * kPi / 3.0};
}

char port_letter(Port p) { return static_cast<char>('A' + static_cast<int>(p)); }

namespace {

struct HexCorner {
  Vec2 in, out;  // cut edge runs in -> out in counterclockwise order
};

std::array<HexCorner, 3> resonator_corners(const ResonatorSpec& spec, Vec2 centre, bool upward) {
  const double circum = spec.side_s / std::sqrt(3.0);
  const auto angles = port_angles(upward, PortSite::Corner);
  std::array<Vec2, 3> v;
  for (int i = 0; i < 3; ++i)
    v[i] = centre + Vec2{circum * std::cos(angles[i]), circum * std::sin(angles[i])};
  std::array<HexCorner, 3> c;
  const double cut = spec.corner_cut_s_prime;
  for (int i = 0; i < 3; ++i) {
    const Vec2 prev = v[(i + 2) % 3], next = v[(i + 1) % 3];
    c[i].in = v[i] + (prev - v[i]) * (cut / spec.side_s);
    c[i].out = v[i] + (next - v[i]) * (cut / spec.side_s);
  }
  return c;
}

}  // namespace

ResonatorRing resonator_ring(const ResonatorSpec& spec, Vec2 centre, bool upward) {
  const auto corners = resonator_corners(spec, centre, upward);
  ResonatorRing r;
  const bool cut = spec.corner_cut_s_prime > 0.0;
  for (const auto& c : corners) {
    r.vertices.push_back(c.in);
    if (cut) r.vertices.push_back(c.out);
  }
  for (int i = 0; i < 3; ++i) {
    if (spec.port_site == PortSite::Corner) r.port_edge[i] = cut ? 2 * i : -1;
    else r.port_edge[i] = cut ? (2 * i + 3) % 6 : (i + 1) % 3;
  }
  return r;
}

PolyRegion resonator_outline(const ResonatorSpec& spec) {
  spec.validate();
  const auto ring = resonator_ring(spec, {0, 0}, true);
  PolyRegion r;
  r.outer = ring.vertices;
  r.ensure_tag_table();
  for (int i = 0; i < 3; ++i)
    if (ring.port_edge[i] >= 0)
      r.set_tag(0, ring.port_edge[i], std::string("port_") + port_letter(static_cast<Port>(i)));
  return r;
}

PolyRegion shield_cell(const ShieldSpec& spec) {
  spec.validate();
  const double H = spec.period_h / 2.0, B = spec.block_h_prime / 2.0, T = spec.tether_l / 2.0;
  PolyRegion r;
  if (spec.style == ShieldStyle::CrossHole || spec.block_h_prime == spec.period_h) {
    r.outer = {{-H, -H}, {H, -H}, {H, H}, {-H, H}};
    r.ensure_tag_table();
    r.set_tag(0, 0, "periodic_y_minus");
    r.set_tag(0, 1, "periodic_x_plus");
    r.set_tag(0, 2, "periodic_y_plus");
    r.set_tag(0, 3, "periodic_x_minus");
    if (spec.style == ShieldStyle::CrossHole) {
      // Clockwise cross outline.
      r.holes.push_back({{-T, -B}, {-T, -T}, {-B, -T}, {-B, T}, {-T, T}, {-T, B},
                         {T, B},   {T, T},   {B, T},   {B, -T}, {T, -T}, {T, -B}});
      r.ensure_tag_table();
    }
    return r;
  }
  // Block outline with a tether tab centred on each side, counterclockwise
  // starting at the lower-left block corner.
  r.outer = {
      {-B, -B}, {-T, -B}, {-T, -H}, {T, -H}, {T, -B},  // bottom tab
      {B, -B},  {B, -T},  {H, -T},  {H, T},  {B, T},   // right tab
      {B, B},   {T, B},   {T, H},   {-T, H}, {-T, B},  // top tab
      {-B, B},  {-B, T},  {-H, T},  {-H, -T}, {-B, -T} // left tab
  };
  r.ensure_tag_table();
  r.set_tag(0, 2, "periodic_y_minus");
  r.set_tag(0, 7, "periodic_x_plus");
  r.set_tag(0, 12, "periodic_y_plus");
  r.set_tag(0, 17, "periodic_x_minus");
  return r;
}

std::array<ResonatorPlacement, 2> SubsystemLayout::placements() const {
  const double theta = port_angles(true, resonator.port_site)[static_cast<int>(link)];
  const double sep = 2.0 * resonator.port_offset() + length_L;
  return {ResonatorPlacement{{0, 0}, true},
          ResonatorPlacement{{sep * std::cos(theta), sep * std::sin(theta)}, false}};
}

namespace {

struct Branch {
  WaveguideSpec waveguide;
  double length = 0.0;
  int target = -1;  // resonator index at the far end, -1 for a free end
};

class OutlineBuilder {
 public:
  OutlineBuilder(const SubsystemLayout& layout) : layout_(layout), place_(layout.placements()) {}

  std::array<std::array<std::optional<Branch>, 3>, 2> branches;

  PolyRegion build() {
    emit_resonator(0, -1);
    PolyRegion r;
    const double tol = 1e-12 * layout_.resonator.side_s;
    for (const Vec2& p : loop_)
      if (r.outer.empty() || norm(p - r.outer.back()) > tol) r.outer.push_back(p);
    while (r.outer.size() > 1 && norm(r.outer.front() - r.outer.back()) <= tol) r.outer.pop_back();
    r.holes = std::move(holes_);
    r.ensure_tag_table();
    return r;
  }

 private:
  void emit_resonator(int r, int entry_port) {
    const auto ring = resonator_ring(layout_.resonator, place_[r].centre, place_[r].upward);
    const int n = static_cast<int>(ring.vertices.size());
    // Start at the end of the entry port edge so the walk closes on its start.
    const int first = entry_port < 0 ? 0 : ring.port_edge[entry_port] + 1;
    for (int step = 0; step < n; ++step) {
      const int k = (first + step) % n;
      if (entry_port >= 0 && k == ring.port_edge[entry_port]) break;
      loop_.push_back(ring.vertices[k]);
      for (int p = 0; p < 3; ++p)
        if (ring.port_edge[p] == k && branches[r][p])
          emit_branch(r, p, ring.vertices[k], ring.vertices[(k + 1) % n]);
    }
    if (entry_port >= 0) loop_.push_back(ring.vertices[ring.port_edge[entry_port]]);
  }

  void emit_branch(int r, int port, Vec2 in, Vec2 out) {
    const Branch& b = *branches[r][port];
    if (b.waveguide.width_w > layout_.resonator.port_width() * (1.0 + 1e-12))
      fail(ErrorKind::Geometry, "waveguide width exceeds the resonator port width");
    const Vec2 t = (out - in) * (1.0 / norm(out - in));
    const Vec2 u{t.y, -t.x};
    const Vec2 c = (in + out) * 0.5;
    const double hw = b.waveguide.width_w / 2.0;
    loop_.push_back(c - t * hw);
    loop_.push_back(c - t * hw + u * b.length);
    if (b.target >= 0) {
      const auto far = resonator_ring(layout_.resonator, place_[b.target].centre,
                                      place_[b.target].upward);
      const int e = far.port_edge[port];
      loop_.push_back(far.vertices[(e + 1) % far.vertices.size()]);
      emit_resonator(b.target, port);
    }
    loop_.push_back(c + t * hw + u * b.length);
    loop_.push_back(c + t * hw);

    if (b.waveguide.has_hole()) {
      const int n = strip_hole_count(b.waveguide, b.length);
      const double angle = std::atan2(u.y, u.x);
      for (int j = 0; j < n; ++j) {
        const double s = 0.5 * b.length + (j - 0.5 * (n - 1)) * b.waveguide.period_d;
        holes_.push_back(reversed(ellipse_polygon(c + u * s, b.waveguide.hole_rx(),
                                                  b.waveguide.hole_ry(),
                                                  layout_.ellipse_segments, angle)));
      }
    }
  }

  const SubsystemLayout& layout_;
  std::array<ResonatorPlacement, 2> place_;
  Loop loop_;
  std::vector<Loop> holes_;
};

}  // namespace

std::vector<Loop> SubsystemLayout::extent_loops() const {
  const auto place = placements();
  std::vector<Loop> loops;
  for (const auto& p : place) loops.push_back(resonator_ring(resonator, p.centre, p.upward).vertices);
  const auto ring = resonator_ring(resonator, place[0].centre, true);
  const int e = ring.port_edge[static_cast<int>(link)];
  const Vec2 in = ring.vertices[e], out = ring.vertices[(e + 1) % ring.vertices.size()];
  const Vec2 t = (out - in) * (1.0 / norm(out - in));
  const Vec2 u{t.y, -t.x};
  const Vec2 c = (in + out) * 0.5;
  const double hw = waveguide.width_w / 2.0;
  loops.push_back({c - t * hw, c - t * hw + u * length_L, c + t * hw + u * length_L, c + t * hw});
  return loops;
}

PolyRegion subsystem_assembly(const SubsystemLayout& layout) {
  layout.resonator.validate();
  layout.waveguide.validate();
  check_segments(layout.ellipse_segments);
  if (layout.length_L < layout.waveguide.period_d * (1.0 - 1e-12))
    fail(ErrorKind::Geometry, "link length shorter than one waveguide period");
  if (layout.resonator.port_site == PortSite::Corner && layout.resonator.corner_cut_s_prime <= 0.0)
    fail(ErrorKind::Geometry, "resonator without corner cuts has no corner port edge");
  if (layout.stubs.size() > 2)
    fail(ErrorKind::InvalidArgument, "at most two stub waveguides (one per free port label)");

  OutlineBuilder builder(layout);
  const int li = static_cast<int>(layout.link);
  builder.branches[0][li] = Branch{layout.waveguide, layout.length_L, 1};
  int slot = 0;
  for (int p = 0; p < 3; ++p) {
    if (p == li) continue;
    if (slot < static_cast<int>(layout.stubs.size())) {
      const auto& [wg, periods] = layout.stubs[slot];
      wg.validate();
      if (periods < 1) fail(ErrorKind::InvalidArgument, "stub period count must be >= 1");
      const Branch stub{wg, periods * wg.period_d, -1};
      builder.branches[0][p] = stub;
      builder.branches[1][p] = stub;
    }
    ++slot;
  }
  PolyRegion r = builder.build();
  r.validate();
  return r;
}

}  // namespace phononet
