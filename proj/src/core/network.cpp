#include "network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "mesh.hpp"
#include "svg.hpp"

namespace phononet {

using ojson = nlohmann::ordered_json;

void NetworkSpec::validate() const {
  resonator.validate();
  for (const auto& w : waveguides) w.validate();
  if (shield) shield->validate();
  if (std::abs(L_A - L_B) > 1e-12 * std::max(std::abs(L_A), std::abs(L_B)))
    fail(ErrorKind::InvalidArgument, "L_A must equal L_B (waveguides A and B share one length)");
  for (int p = 0; p < 3; ++p) {
    const double L = length(static_cast<Port>(p));
    if (!(L >= waveguides[p].period_d * (1.0 - 1e-12)))
      fail(ErrorKind::InvalidArgument,
           std::string("L_") + port_letter(static_cast<Port>(p)) + " shorter than one period");
  }
  if (rows < 0 || cols < 0) fail(ErrorKind::InvalidArgument, "rows and cols must be >= 0");
}

double NetworkSpec::length(Port p) const {
  switch (p) {
    case Port::A: return L_A;
    case Port::B: return L_B;
    default: return L_C;
  }
}

int NetworkGraph::degree(int node) const {
  int n = 0;
  for (const auto& e : edges) n += (e.up == node) + (e.down == node);
  return n;
}

int NetworkGraph::pick_edge(Port label) const {
  int first = -1;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].label != label) continue;
    if (edges[i].interior) return static_cast<int>(i);
    if (first < 0) first = static_cast<int>(i);
  }
  return first;
}

namespace {

using Poly = std::vector<Vec2>;

// Convex polygons overlap by more than tol along every axis.
bool convex_overlap(const Poly& a, const Poly& b, double tol) {
  for (const Poly* p : {&a, &b}) {
    const std::size_t n = p->size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e = (*p)[(i + 1) % n] - (*p)[i];
      const Vec2 ax{-e.y / norm(e), e.x / norm(e)};
      double a0 = 1e300, a1 = -1e300, b0 = 1e300, b1 = -1e300;
      for (auto q : a) a0 = std::min(a0, dot(q, ax)), a1 = std::max(a1, dot(q, ax));
      for (auto q : b) b0 = std::min(b0, dot(q, ax)), b1 = std::max(b1, dot(q, ax));
      if (std::min(a1, b1) - std::max(a0, b0) <= tol) return false;
    }
  }
  return true;
}

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace

NetworkGraph honeycomb_layout(const NetworkSpec& spec) {
  spec.validate();
  NetworkGraph g;
  g.spec = spec;
  const auto th = port_angles(true, spec.resonator.port_site);
  const double off = spec.resonator.port_offset();
  std::array<Vec2, 3> bond;
  for (int p = 0; p < 3; ++p) bond[p] = unit(th[p]) * (2.0 * off + spec.length(static_cast<Port>(p)));
  const Vec2 t1 = bond[1] - bond[0], t2 = bond[2] - bond[0];

  auto up_index = [&](int i, int j) { return 2 * (j * spec.cols + i); };
  for (int j = 0; j < spec.rows; ++j)
    for (int i = 0; i < spec.cols; ++i) {
      const Vec2 P = t1 * i + t2 * j;
      g.nodes.push_back({P, true, j, i});
      g.nodes.push_back({P + bond[0], false, j, i});
    }
  auto add_edge = [&](Port label, int up, int down) {
    NetworkEdge e;
    e.label = label;
    e.up = up;
    e.down = down;
    const Vec2 u = unit(th[static_cast<int>(label)]);
    e.start = g.nodes[up].centre + u * off;
    e.end = g.nodes[down].centre - u * off;
    e.length = norm(e.end - e.start);
    const Vec2 n = Vec2{-u.y, u.x} * (0.5 * spec.waveguides[static_cast<int>(label)].width_w);
    e.strip = {e.start - n, e.end - n, e.end + n, e.start + n};
    g.edges.push_back(e);
  };
  for (int j = 0; j < spec.rows; ++j)
    for (int i = 0; i < spec.cols; ++i) {
      const int up = up_index(i, j);
      add_edge(Port::A, up, up + 1);
      if (i + 1 < spec.cols) add_edge(Port::B, up, up_index(i + 1, j) + 1);
      if (j + 1 < spec.rows) add_edge(Port::C, up, up_index(i, j + 1) + 1);
    }
  std::vector<int> deg(g.nodes.size(), 0);
  for (const auto& e : g.edges) ++deg[e.up], ++deg[e.down];
  for (auto& e : g.edges) e.interior = deg[e.up] == 3 && deg[e.down] == 3;
  check_layout(g);
  return g;
}

void check_layout(const NetworkGraph& g) {
  const auto& spec = g.spec;
  for (const auto& e : g.edges) {
    const double L = spec.length(e.label);
    if (std::abs(e.length - L) > 1e-9 * L)
      fail(ErrorKind::Layout, "edge length inconsistent with the network spec");
  }
  std::vector<Poly> res;
  for (const auto& n : g.nodes) res.push_back(resonator_ring(spec.resonator, n.centre, n.upward).vertices);
  const double tol = 1e-9 * spec.resonator.side_s;
  auto where = [&](const char* what, std::size_t a, std::size_t b) {
    std::ostringstream os;
    os << "layout overlap between " << what << " " << a << " and " << b;
    fail(ErrorKind::Layout, os.str());
  };
  for (std::size_t a = 0; a < res.size(); ++a)
    for (std::size_t b = a + 1; b < res.size(); ++b)
      if (convex_overlap(res[a], res[b], tol)) where("resonators", a, b);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const Poly strip(g.edges[e].strip.begin(), g.edges[e].strip.end());
    for (std::size_t r = 0; r < res.size(); ++r) {
      if (static_cast<int>(r) == g.edges[e].up || static_cast<int>(r) == g.edges[e].down) continue;
      if (convex_overlap(strip, res[r], tol)) where("strip/resonator", e, r);
    }
    for (std::size_t f = e + 1; f < g.edges.size(); ++f) {
      const Poly other(g.edges[f].strip.begin(), g.edges[f].strip.end());
      if (convex_overlap(strip, other, tol)) where("strips", e, f);
    }
  }
}

std::vector<Loop> stub_loops(const SubsystemLayout& layout, double skip_periods) {
  std::vector<Loop> out;
  const double off = layout.resonator.port_offset();
  const auto place = layout.placements();
  int slot = 0;
  for (int p = 0; p < 3; ++p) {
    if (p == static_cast<int>(layout.link)) continue;
    if (slot >= static_cast<int>(layout.stubs.size())) break;
    const auto& [wg, periods] = layout.stubs[slot++];
    const double r0 = off + skip_periods * wg.period_d, r1 = off + (periods + 1) * wg.period_d;
    if (r1 <= r0) continue;
    for (const auto& pl : place) {
      const Vec2 u = unit(port_angles(pl.upward, layout.resonator.port_site)[p]);
      const Vec2 n = Vec2{-u.y, u.x} * (0.5 * wg.width_w * (1.0 + 1e-6));
      const Vec2 a = pl.centre + u * r0, b = pl.centre + u * r1;
      out.push_back({a - n, b - n, b + n, a + n});
    }
  }
  return out;
}

SubsystemLayout edge_layout(const NetworkGraph& graph, int edge, int stub_periods) {
  if (edge < 0 || edge >= static_cast<int>(graph.edges.size()))
    fail(ErrorKind::InvalidArgument, "edge index out of range");
  if (stub_periods < 2) fail(ErrorKind::InvalidArgument, "stub_periods must be >= 2");
  const auto& e = graph.edges[edge];
  SubsystemLayout lay;
  lay.resonator = graph.spec.resonator;
  lay.link = e.label;
  lay.waveguide = graph.spec.waveguides[static_cast<int>(e.label)];
  lay.length_L = e.length;
  for (int p = 0; p < 3; ++p)
    if (p != static_cast<int>(e.label)) lay.stubs.push_back({graph.spec.waveguides[p], stub_periods});
  return lay;
}

PolyRegion patch_region(const NetworkGraph& graph, int edge, int stub_periods) {
  return subsystem_assembly(edge_layout(graph, edge, stub_periods));
}

std::vector<LocalizedMode> localization_check(const PolyRegion& patch, const Material& material,
                                              double f_center, const std::vector<Loop>& extent,
                                              int n_modes, const DeviceOptions& options) {
  patch.validate();
  material.validate();
  if (n_modes < 1) fail(ErrorKind::InvalidArgument, "n_modes must be >= 1");
  const double h = options.target_h > 0.0 ? options.target_h : 0.5 * kMicron;
  const Mesh mesh = triangulate(patch, h, options.min_angle_deg);
  const OperatorPair ops = assemble(mesh, material);
  EigsOptions eo;
  eo.tol = options.tol;
  std::vector<LocalizedMode> out;
  for (const auto& m : eigs(ops, f_center, n_modes, eo))
    out.push_back({m.frequency, 1.0 - dark_mode_fraction(ops, m, mesh, extent)});
  return out;
}

PatchEntry patch_confinement(const NetworkGraph& graph, int edge, int stub_periods,
                             const Material& material, double f_center, double window,
                             const DeviceOptions& options, double threshold) {
  const SubsystemLayout lay = edge_layout(graph, edge, stub_periods);
  const CoupledResult r = coupled_triplet(lay, material, f_center, window, options);
  PatchEntry p;
  p.label = lay.link;
  p.edge = edge;
  p.triplet = r.triplet;
  const OperatorPair ops = assemble(r.mesh, material);
  const auto extent = lay.extent_loops();
  const auto tail = stub_loops(lay, 1.0);
  for (int i = 0; i < 3; ++i) {
    const auto e = strain_energy_field(ops, r.modes[i], r.mesh);
    p.stub_fraction[i] = std::max(0.0, 1.0 - energy_fraction(e, r.mesh, extent));
    p.tail_fraction[i] = energy_fraction(e, r.mesh, tail);
    p.max_stub_fraction = std::max(p.max_stub_fraction, p.stub_fraction[i]);
    p.max_tail_fraction = std::max(p.max_tail_fraction, p.tail_fraction[i]);
  }
  try {
    p.coupling = extract_coupling(r.triplet);
  } catch (const Error&) {
  }
  p.confined = p.max_stub_fraction < threshold;
  return p;
}

bool AuditReport::passed() const {
  if (!errors.empty()) return false;
  for (const auto& m : modes)
    if (!m.pass) return false;
  for (const auto& p : patches)
    if (!p.confined) return false;
  return !shield_covers || *shield_covers;
}

AuditReport closed_subsystem_audit(const NetworkSpec& spec, const Material& material,
                                   const AuditOptions& options) {
  AuditReport rep;
  auto stage = [&](const std::string& name, auto&& fn) {
    try {
      fn();
      return true;
    } catch (const std::exception& e) {
      rep.errors.push_back({name, e.what()});
      return false;
    }
  };
  if (!stage("spec", [&] {
        spec.validate();
        material.validate();
      }))
    return rep;

  bool all_gaps = true;
  for (int p = 0; p < 3; ++p)
    all_gaps &= stage(std::string("dispersion_") + port_letter(static_cast<Port>(p)), [&] {
      rep.gaps[p] = detect_gaps(dispersion(spec.waveguides[p], material, options.dispersion));
    });
  if (all_gaps) rep.regions = classify_regions(rep.gaps[0], rep.gaps[1], rep.gaps[2]);

  static const char* names[4] = {"a", "b", "c", "d"};
  static const Region expected[4] = {Region::I, Region::II, Region::III, Region::IV};
  const bool have_catalog = stage("resonator", [&] {
    const auto cat = resonator_modes(spec.resonator, material, options.catalog_lo, options.catalog_hi,
                                     options.devices);
    if (cat.modes.empty()) fail(ErrorKind::Solver, "no resonator modes in the catalog window");
    for (int i = 0; i < 4; ++i) {
      ModeVerdict v;
      v.name = names[i];
      v.target = options.targets[i];
      v.expected = expected[i];
      double best = 1e300;
      for (const auto& m : cat.modes)
        if (std::abs(m.mode.frequency - v.target) < best)
          best = std::abs(m.mode.frequency - v.target), v.frequency = m.mode.frequency;
      if (all_gaps) v.region = classify_frequency(v.frequency, rep.regions);
      v.pass = all_gaps && v.region == v.expected;
      rep.modes.push_back(v);
    }
  });

  if (spec.shield)
    stage("shield", [&] {
      rep.shield_gaps = detect_gaps(dispersion_2d(*spec.shield, material, options.dispersion));
      bool covers = true;
      for (int i = 0; i < 4; ++i) {
        const double f = have_catalog ? rep.modes[i].frequency : options.targets[i];
        covers &= std::any_of(rep.shield_gaps->gaps.begin(), rep.shield_gaps->gaps.end(),
                              [f](const Interval& g) { return g.contains(f); });
      }
      rep.shield_covers = covers;
    });

  if (spec.rows > 0 && spec.cols > 0) {
    NetworkGraph graph;
    if (!stage("layout", [&] { graph = honeycomb_layout(spec); })) return rep;
    for (int p = 0; p < 3; ++p) {
      const Port label = static_cast<Port>(p);
      const int e = graph.pick_edge(label);
      if (e < 0) continue;
      const double f = have_catalog ? rep.modes[p].frequency : options.targets[p];
      stage(std::string("patch_") + port_letter(label), [&] {
        rep.patches.push_back(patch_confinement(graph, e, options.stub_periods, material, f,
                                                options.patch_window, options.devices,
                                                options.confinement_threshold));
      });
    }
  }
  return rep;
}

// ---------------------------------------------------------------- output

namespace {

ojson intervals(const IntervalSet& s) {
  auto a = ojson::array();
  for (const auto& i : s) a.push_back({i.lo * 1e-9, i.hi * 1e-9});
  return a;
}

ojson vec_um(Vec2 v) { return {v.x * 1e6, v.y * 1e6}; }

}  // namespace

std::string layout_json(const NetworkGraph& graph) {
  ojson j;
  j["rows"] = graph.spec.rows;
  j["cols"] = graph.spec.cols;
  j["resonator"] = {{"side_um", graph.spec.resonator.side_s * 1e6},
                    {"corner_cut_um", graph.spec.resonator.corner_cut_s_prime * 1e6},
                    {"port_site", port_site_name(graph.spec.resonator.port_site)}};
  ojson widths;
  for (int p = 0; p < 3; ++p)
    widths[std::string(1, port_letter(static_cast<Port>(p)))] = graph.spec.waveguides[p].width_w * 1e6;
  j["strip_width_um"] = widths;
  j["lengths_um"] = {{"A", graph.spec.L_A * 1e6}, {"B", graph.spec.L_B * 1e6}, {"C", graph.spec.L_C * 1e6}};
  auto nodes = ojson::array();
  for (const auto& n : graph.nodes)
    nodes.push_back({{"centre_um", vec_um(n.centre)}, {"upward", n.upward}, {"row", n.row}, {"col", n.col}});
  j["resonators"] = nodes;
  auto edges = ojson::array();
  for (const auto& e : graph.edges)
    edges.push_back({{"label", std::string(1, port_letter(e.label))},
                     {"up", e.up},
                     {"down", e.down},
                     {"length_um", e.length * 1e6},
                     {"start_um", vec_um(e.start)},
                     {"end_um", vec_um(e.end)},
                     {"interior", e.interior}});
  j["edges"] = edges;
  return j.dump(2);
}

NetworkGraph read_layout_json(const std::string& text) {
  NetworkGraph g;
  try {
    const auto j = nlohmann::json::parse(text);
    auto& spec = g.spec;
    spec.rows = j.at("rows").get<int>();
    spec.cols = j.at("cols").get<int>();
    const auto& r = j.at("resonator");
    spec.resonator.side_s = r.at("side_um").get<double>() * kMicron;
    spec.resonator.corner_cut_s_prime = r.at("corner_cut_um").get<double>() * kMicron;
    spec.resonator.port_site =
        r.at("port_site").get<std::string>() == "corner" ? PortSite::Corner : PortSite::Side;
    const char* L[3] = {"A", "B", "C"};
    for (int p = 0; p < 3; ++p) spec.waveguides[p].width_w = j.at("strip_width_um").at(L[p]).get<double>() * kMicron;
    spec.L_A = j.at("lengths_um").at("A").get<double>() * kMicron;
    spec.L_B = j.at("lengths_um").at("B").get<double>() * kMicron;
    spec.L_C = j.at("lengths_um").at("C").get<double>() * kMicron;
    auto vec = [](const nlohmann::json& v) { return Vec2{v.at(0).get<double>() * kMicron, v.at(1).get<double>() * kMicron}; };
    for (const auto& n : j.at("resonators"))
      g.nodes.push_back({vec(n.at("centre_um")), n.at("upward").get<bool>(), n.at("row").get<int>(), n.at("col").get<int>()});
    for (const auto& x : j.at("edges")) {
      NetworkEdge e;
      const std::string lab = x.at("label").get<std::string>();
      if (lab != "A" && lab != "B" && lab != "C") fail(ErrorKind::Io, "bad edge label in layout file");
      e.label = static_cast<Port>(lab[0] - 'A');
      e.up = x.at("up").get<int>();
      e.down = x.at("down").get<int>();
      e.length = x.at("length_um").get<double>() * kMicron;
      e.start = vec(x.at("start_um"));
      e.end = vec(x.at("end_um"));
      e.interior = x.at("interior").get<bool>();
      const Vec2 d = e.end - e.start;
      const double len = norm(d);
      const Vec2 u = len > 0 ? d * (1.0 / len) : Vec2{1, 0};
      const Vec2 n = Vec2{-u.y, u.x} * (0.5 * spec.waveguides[static_cast<int>(e.label)].width_w);
      e.strip = {e.start - n, e.end - n, e.end + n, e.start + n};
      g.edges.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, std::string("not a layout file: ") + e.what());
  }
  return g;
}

std::string audit_json(const AuditReport& r) {
  ojson j;
  j["passed"] = r.passed();
  ojson gaps;
  for (int p = 0; p < 3; ++p) gaps[std::string(1, port_letter(static_cast<Port>(p)))] = intervals(r.gaps[p].gaps);
  j["gaps_ghz"] = gaps;
  j["regions_ghz"] = {{"I", intervals(r.regions.region_I)},
                      {"II", intervals(r.regions.region_II)},
                      {"III", intervals(r.regions.region_III)},
                      {"IV", intervals(r.regions.region_IV)}};
  auto modes = ojson::array();
  for (const auto& m : r.modes)
    modes.push_back({{"mode", m.name},
                     {"target_ghz", m.target * 1e-9},
                     {"frequency_ghz", m.frequency * 1e-9},
                     {"expected_region", region_name(m.expected)},
                     {"region", region_name(m.region)},
                     {"pass", m.pass}});
  j["modes"] = modes;
  auto patches = ojson::array();
  for (const auto& p : r.patches) {
    ojson e;
    e["label"] = std::string(1, port_letter(p.label));
    e["edge"] = p.edge;
    e["triplet_ghz"] = {p.triplet.minus * 1e-9, p.triplet.zero * 1e-9, p.triplet.plus * 1e-9};
    e["stub_energy_fraction"] = p.stub_fraction;
    e["max_stub_energy_fraction"] = p.max_stub_fraction;
    e["tail_energy_fraction"] = p.tail_fraction;
    e["max_tail_energy_fraction"] = p.max_tail_fraction;
    if (p.coupling) {
      e["delta_mhz"] = p.coupling->delta * 1e-6;
      e["g_mhz"] = p.coupling->g * 1e-6;
    }
    e["confined"] = p.confined;
    patches.push_back(e);
  }
  j["patches"] = patches;
  if (r.shield_gaps) {
    j["shield_gaps_ghz"] = intervals(r.shield_gaps->gaps);
    j["shield_covers_modes"] = r.shield_covers.value_or(false);
  }
  auto errs = ojson::array();
  for (const auto& e : r.errors) errs.push_back({{"stage", e.stage}, {"message", e.message}});
  j["errors"] = errs;
  return j.dump(2);
}

std::string layout_svg(const NetworkGraph& graph, const AuditReport* report) {
  double x0 = 0, x1 = 1e-6, y0 = 0, y1 = 1e-6;
  bool first = true;
  std::vector<std::vector<Vec2>> rings;
  for (const auto& n : graph.nodes) {
    rings.push_back(resonator_ring(graph.spec.resonator, n.centre, n.upward).vertices);
    for (auto p : rings.back()) {
      if (first) x0 = x1 = p.x, y0 = y1 = p.y, first = false;
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
  }
  const double pad = 0.05 * std::max(x1 - x0, y1 - y0) + 1e-6;
  SvgPlot plot((x0 - pad) * 1e6, (x1 + pad) * 1e6, (y0 - pad) * 1e6, (y1 + pad) * 1e6, 720, 720, true);
  plot.no_axes();
  plot.title("Network layout " + std::to_string(graph.spec.rows) + " x " + std::to_string(graph.spec.cols));
  static const char* fill[3] = {"#9ecae1", "#a1d99b", "#fdae6b"};
  auto verdict = [&](Port label) -> int {  // -1 unknown, 0 fail, 1 pass
    if (!report) return -1;
    int v = -1;
    const int p = static_cast<int>(label);
    if (p < static_cast<int>(report->modes.size())) v = report->modes[p].pass;
    for (const auto& e : report->patches)
      if (e.label == label) v = (v != 0) && e.confined;
    return v;
  };
  for (const auto& e : graph.edges) {
    std::vector<std::pair<double, double>> pts;
    for (auto p : e.strip) pts.push_back({p.x * 1e6, p.y * 1e6});
    const int v = verdict(e.label);
    const std::string stroke = v < 0 ? "#555555" : v ? "#2ca02c" : "#d62728";
    plot.polygon(pts, fill[static_cast<int>(e.label)], stroke, v < 0 ? 0.5 : 1.5);
    const Vec2 m = (e.start + e.end) * 0.5;
    plot.text(m.x * 1e6, m.y * 1e6, std::string(1, port_letter(e.label)), "middle", 12);
  }
  for (const auto& r : rings) {
    std::vector<std::pair<double, double>> pts;
    for (auto p : r) pts.push_back({p.x * 1e6, p.y * 1e6});
    plot.polygon(pts, "#d9d9d9", "#333333", 0.8);
  }
  return plot.str();
}

}  // namespace phononet
