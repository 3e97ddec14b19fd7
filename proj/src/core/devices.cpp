#include "devices.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "parallel.hpp"
#include "svg.hpp"

namespace phononet {

namespace {

using ojson = nlohmann::ordered_json;

double resonator_h(const ResonatorSpec& spec, const DeviceOptions& o) {
  return o.target_h > 0.0 ? o.target_h : spec.side_s / 42.0;
}

double strip_h(const WaveguideSpec& spec, const DeviceOptions& o) {
  return o.target_h > 0.0 ? o.target_h : spec.period_d / 12.0;
}

void check_window(double f_lo, double f_hi) {
  if (!(std::isfinite(f_lo) && std::isfinite(f_hi)) || !(f_hi > f_lo) || f_hi <= 0.0)
    fail(ErrorKind::InvalidArgument, "frequency window must satisfy f_lo < f_hi, f_hi > 0");
}

// Every mode in [f_lo, f_hi]: the returned set of an eigs call is contiguous in
// omega^2, so it is complete once it reaches past both ends of the window.
std::vector<ModeSolution> window_modes(const OperatorPair& ops, double f_lo, double f_hi,
                                       double tol) {
  const int N = static_cast<int>(ops.size());
  const double shift = f_lo <= 0.0 ? 0.0 : std::sqrt(0.5 * (f_lo * f_lo + f_hi * f_hi));
  EigsOptions eo;
  eo.tol = tol;
  for (int n = std::min(12, N);; n = std::min(2 * n, N)) {
    auto md = eigs(ops, shift, n, eo);
    const bool low = f_lo <= 0.0 || md.front().frequency < f_lo || n == N;
    const bool high = md.back().frequency > f_hi || n == N;
    if (low && high) {
      std::vector<ModeSolution> out;
      for (auto& m : md)
        if (m.frequency >= f_lo && m.frequency <= f_hi) out.push_back(std::move(m));
      return out;
    }
    if (n == N) return {};
  }
}

// Integral over the tagged edges of conj(u.n) (v.n).
cplx port_form(const Mesh& mesh, const Eigen::VectorXcd& u, const Eigen::VectorXcd& v,
               const std::string& tag, double* length = nullptr) {
  static const double gs[3] = {0.5 - std::sqrt(15.0) / 10.0, 0.5, 0.5 + std::sqrt(15.0) / 10.0};
  static const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  cplx acc = 0.0;
  double len = 0.0;
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != tag) continue;
    const Vec2 a = mesh.nodes[be.n0], b = mesh.nodes[be.n1];
    const double L = norm(b - a);
    const Vec2 n{(b.y - a.y) / L, -(b.x - a.x) / L};
    const int ids[3] = {be.n0, be.mid, be.n1};
    for (int g = 0; g < 3; ++g) {
      const double s = gs[g];
      const double N[3] = {(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)};
      cplx un = 0.0, vn = 0.0;
      for (int i = 0; i < 3; ++i) {
        un += N[i] * (u[2 * ids[i]] * n.x + u[2 * ids[i] + 1] * n.y);
        vn += N[i] * (v[2 * ids[i]] * n.x + v[2 * ids[i] + 1] * n.y);
      }
      acc += gw[g] * L * std::conj(un) * vn;
    }
    len += L;
  }
  if (length) *length = len;
  return acc;
}

double port_rms(const Mesh& mesh, const Eigen::VectorXcd& u, const std::string& tag) {
  double len = 0.0;
  const double num = std::real(port_form(mesh, u, u, tag, &len));
  return len > 0.0 ? std::sqrt(num / len) : 0.0;
}

double area_rms(const OperatorPair& ops, const Mesh& mesh, const Eigen::VectorXcd& u) {
  const double m = std::real(u.dot(ops.M * u));
  return std::sqrt(m / (ops.material.density * ops.material.thickness * mesh.total_area()));
}

ModeCatalog build_catalog(Mesh mesh, const OperatorPair& ops, std::vector<ModeSolution> modes,
                          std::vector<std::string> ports, double f_hi, const RegionSet* regions) {
  ModeCatalog cat;
  cat.port_tags = std::move(ports);
  const std::size_t n = modes.size(), P = cat.port_tags.size();
  std::vector<std::vector<double>> rms(n, std::vector<double>(P));
  std::vector<double> arms(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < P; ++p) rms[i][p] = port_rms(mesh, modes[i].displacement, cat.port_tags[p]);
    arms[i] = area_rms(ops, mesh, modes[i].displacement);
  }
  std::vector<int> group(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    const double scale = std::max(modes[i].frequency, 1e-3 * f_hi);
    group[i] = group[i - 1] + (modes[i].frequency - modes[i - 1].frequency > 1e-6 * scale);
  }
  for (std::size_t i = 0; i < n; ++i) {
    CatalogMode c;
    c.group = group[i];
    c.ports.assign(P, 0.0);
    double ref = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (group[j] != group[i]) continue;
      ref += arms[j] * arms[j];
      for (std::size_t p = 0; p < P; ++p) c.ports[p] += rms[j][p] * rms[j][p];
    }
    for (auto& v : c.ports) v = ref > 0.0 ? std::sqrt(v / ref) : 0.0;
    if (regions) c.region = classify_frequency(modes[i].frequency, *regions);
    c.mode = std::move(modes[i]);
    cat.modes.push_back(std::move(c));
  }
  cat.mesh = std::move(mesh);
  return cat;
}

}  // namespace

// ---------------------------------------------------------------- meshes

Mesh resonator_mesh(const ResonatorSpec& spec, const DeviceOptions& options) {
  spec.validate();
  const auto ring = resonator_ring(spec, {0, 0}, true);
  const auto& v = ring.vertices;
  const int n = static_cast<int>(v.size());
  // One third of the outline: the wedge of +-60 degrees about the port A axis.
  const double axis = port_angles(true, spec.port_site)[0];
  auto rel = [axis](Vec2 p) { return std::remainder(std::atan2(p.y, p.x) - axis, 2.0 * kPi); };
  auto ray_hit = [&](double angle) {
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    for (int k = 0; k < n; ++k) {
      const Vec2 p = v[k], q = v[(k + 1) % n];
      const double den = cross(dir, q - p);
      if (std::abs(den) < 1e-300) continue;
      const double t = cross(p, q - p) / den, u = cross(p, dir) / den;
      if (t > 0.0 && u >= -1e-12 && u <= 1.0 + 1e-12) return dir * t;
    }
    fail(ErrorKind::Geometry, "sector ray misses the resonator outline");
  };
  const double tol = 1e-9;
  std::vector<std::pair<double, Vec2>> inside;
  for (const auto& p : v)
    if (std::abs(rel(p)) < kPi / 3.0 - tol) inside.push_back({rel(p), p});
  std::sort(inside.begin(), inside.end(), [](auto& a, auto& b) { return a.first < b.first; });
  PolyRegion sector;
  sector.outer = {{0, 0}, ray_hit(axis - kPi / 3.0)};
  for (const auto& [a, p] : inside) sector.outer.push_back(p);
  sector.outer.push_back(ray_hit(axis + kPi / 3.0));
  sector.ensure_tag_table();
  const std::size_t m = sector.outer.size();
  sector.set_tag(0, 0, "sector_src");
  sector.set_tag(0, m - 1, "sector_img");
  const bool ports = ring.port_edge[0] >= 0;
  if (ports) {
    const Vec2 a = v[ring.port_edge[0]], b = v[(ring.port_edge[0] + 1) % n];
    for (std::size_t k = 1; k + 1 < m; ++k)
      if (norm(sector.outer[k] - a) < tol * spec.side_s && norm(sector.outer[k + 1] - b) < tol * spec.side_s)
        sector.set_tag(0, k, "port_A");
  }

  MeshOptions mo;
  mo.target_h = resonator_h(spec, options);
  mo.min_angle_deg = options.min_angle_deg;
  mo.mirrored = {{"sector_src", "sector_img", Isometry{2.0 * kPi / 3.0, {0, 0}, {0, 0}}}};
  const Mesh one = triangulate(sector, mo);
  return replicate_rotational(one, 3, {0, 0}, [](const std::string& tag, int k) {
    return tag == "port_A" ? std::string("port_") + port_letter(static_cast<Port>(k)) : std::string();
  });
}

Mesh strip_mesh(const WaveguideSpec& spec, double length_L, const DeviceOptions& options) {
  return triangulate(waveguide_strip(spec, length_L, options.ellipse_segments),
                     strip_h(spec, options), options.min_angle_deg);
}

// ---------------------------------------------------------------- resonator

ModeCatalog resonator_modes(const ResonatorSpec& spec, const Material& material, double f_lo,
                            double f_hi, const DeviceOptions& options, const RegionSet* regions) {
  material.validate();
  check_window(f_lo, f_hi);
  Mesh mesh = resonator_mesh(spec, options);
  const OperatorPair ops = assemble(mesh, material);
  auto modes = window_modes(ops, f_lo, f_hi, options.tol);
  std::vector<std::string> ports;
  if (resonator_ring(spec, {0, 0}, true).port_edge[0] >= 0) ports = {"port_A", "port_B", "port_C"};
  return build_catalog(std::move(mesh), ops, std::move(modes), ports, f_hi, regions);
}

// ---------------------------------------------------------------- strips

namespace {

struct StripSamples {
  std::vector<double> x;                           // station positions
  std::vector<std::vector<std::pair<int, std::array<double, 3>>>> at;  // [station][sample]
  std::vector<double> y;                           // sample ordinates, mirrored pairs
};

// Stations one period apart along the strip, several points per station placed
// identically in every cell and symmetric about the strip axis.
StripSamples strip_samples(const Mesh& mesh, const WaveguideSpec& spec, double L) {
  const double d = spec.period_d, w = spec.width_w;
  const int M = spec.has_hole() ? strip_hole_count(spec, L) - 1 : static_cast<int>(std::floor(L / d));
  StripSamples s;
  for (int n = 0; n < M; ++n) s.x.push_back((n - 0.5 * (M - 1)) * d);
  const double dx[3] = {0.0, -0.25 * d, 0.25 * d};
  const double ys[4] = {0.15 * w, -0.15 * w, 0.4 * w, -0.4 * w};
  PointLocator loc(mesh);
  s.at.assign(M, {});
  for (double ox : dx) {
    for (int q = 0; q < 4; q += 2) {
      std::vector<std::pair<int, std::array<double, 3>>> hits;
      bool ok = true;
      for (int n = 0; n < M && ok; ++n)
        for (int sgn = 0; sgn < 2 && ok; ++sgn) {
          std::array<double, 3> bary;
          const int e = loc.find({s.x[n] + ox, ys[q + sgn]}, &bary, 1e-9);
          ok = e >= 0;
          hits.push_back({e, bary});
        }
      if (!ok) continue;
      for (int n = 0; n < M; ++n) {
        s.at[n].push_back(hits[2 * n]);
        s.at[n].push_back(hits[2 * n + 1]);
      }
      s.y.push_back(ys[q]);
      s.y.push_back(ys[q + 1]);
    }
  }
  return s;
}

void branch_analysis(WaveguideModes& w, const WaveguideSpec& spec, double L) {
  const auto& mesh = w.catalog.mesh;
  const StripSamples s = strip_samples(mesh, spec, L);
  const std::size_t M = s.x.size(), Q = s.y.size(), n = w.catalog.modes.size();
  const double d = spec.period_d;
  w.wavenumber.assign(n, 0.0);
  w.parity.assign(n, 1);
  w.spacing.assign(n, 0.0);
  if (M < 2 || Q == 0) return;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = w.catalog.modes[i].mode.displacement;
    std::vector<std::vector<std::array<cplx, 2>>> v(M, std::vector<std::array<cplx, 2>>(Q));
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t q = 0; q < Q; ++q)
        v[m][q] = interpolate(mesh, u, s.at[m][q].first, s.at[m][q].second);
    double same = 0.0;
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t q = 0; q < Q; q += 2) {
        const auto& a = v[m][q];
        const auto& b = v[m][q + 1];
        same += std::real(std::conj(a[0]) * b[0] - std::conj(a[1]) * b[1]);
      }
    w.parity[i] = same >= 0.0 ? 1 : -1;

    double best = -1.0, kbest = 0.0;
    const int grid = 400;
    for (int g = 0; g <= grid; ++g) {
      const double k = kPi / d * g / grid;
      double p = 0.0;
      for (std::size_t q = 0; q < Q; ++q)
        for (int c = 0; c < 2; ++c) {
          cplx acc = 0.0;
          for (std::size_t m = 0; m < M; ++m) {
            const double win = 0.5 * (1.0 - std::cos(2.0 * kPi * (m + 0.5) / M));
            acc += win * v[m][q][c] * std::exp(cplx(0.0, -k * s.x[m]));
          }
          p += std::norm(acc);
        }
      if (p > best) best = p, kbest = k;
    }
    w.wavenumber[i] = kbest;
  }
  const double dk = kPi / L;
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = w.catalog.modes[i].mode.frequency;
    double below = 0.0, above = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || w.parity[j] != w.parity[i]) continue;
      const double r = std::abs(w.wavenumber[j] - w.wavenumber[i]) / dk;
      if (r < 0.4 || r > 1.6) continue;
      const double df = w.catalog.modes[j].mode.frequency - fi;
      if (df < 0 && (below == 0.0 || -df < below)) below = -df;
      if (df > 0 && (above == 0.0 || df < above)) above = df;
    }
    if (below > 0 && above > 0) w.spacing[i] = 0.5 * (below + above);
    else w.spacing[i] = std::max(below, above);
  }
}

// Strain-energy fraction with |x| < inner.
double interior_fraction(const OperatorPair& ops, const ModeSolution& mode, const Mesh& mesh,
                         double inner) {
  const auto e = strain_energy_field(ops, mode, mesh);
  double in = 0.0, tot = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    tot += e[k];
    if (std::abs(mesh.centroid(k).x) < inner) in += e[k];
  }
  return tot > 0.0 ? in / tot : 1.0;
}

}  // namespace

std::size_t WaveguideModes::nearest(double f) const {
  if (catalog.modes.empty()) fail(ErrorKind::InvalidArgument, "no waveguide modes in the window");
  std::size_t best = 0;
  for (std::size_t i = 1; i < catalog.modes.size(); ++i)
    if (std::abs(catalog.modes[i].mode.frequency - f) < std::abs(catalog.modes[best].mode.frequency - f))
      best = i;
  return best;
}

double WaveguideModes::spacing_near(double f) const { return spacing[nearest(f)]; }

WaveguideModes finite_waveguide_modes(const WaveguideSpec& spec, double length_L,
                                      const Material& material, double f_lo, double f_hi,
                                      const DeviceOptions& options, const RegionSet* regions) {
  spec.validate();
  material.validate();
  check_window(f_lo, f_hi);
  if (length_L < 3.0 * spec.period_d * (1.0 - 1e-12))
    fail(ErrorKind::InvalidArgument, "strip length must be at least three periods");
  Mesh mesh = strip_mesh(spec, length_L, options);
  const OperatorPair ops = assemble(mesh, material);
  auto modes = window_modes(ops, f_lo, f_hi, options.tol);
  WaveguideModes w;
  w.catalog = build_catalog(std::move(mesh), ops, std::move(modes), {"end_minus", "end_plus"},
                            f_hi, regions);
  for (auto& c : w.catalog.modes)
    c.confinement = interior_fraction(ops, c.mode, w.catalog.mesh, 0.5 * length_L - spec.period_d);
  branch_analysis(w, spec, length_L);
  return w;
}

// ---------------------------------------------------------------- tuning

namespace {

std::vector<double> strip_frequencies(const WaveguideSpec& spec, double L, const Material& mat,
                                      double f, const DeviceOptions& o) {
  const Mesh m = strip_mesh(spec, L, o);
  const OperatorPair ops = assemble(m, mat);
  EigsOptions eo;
  eo.tol = o.tol;
  std::vector<double> out;
  // End-localized modes do not tune with length.
  for (const auto& md : eigs(ops, f, 8, eo))
    if (interior_fraction(ops, md, m, 0.5 * L - spec.period_d) >= 0.5) out.push_back(md.frequency);
  return out;
}

double nearest_value(const std::vector<double>& v, double f) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double best = v.front();
  for (double x : v)
    if (std::abs(x - f) < std::abs(best - f)) best = x;
  return best;
}

}  // namespace

TuneResult tune_length(const WaveguideSpec& spec, const Material& material, double f_target,
                       double L_lo, double L_hi, const DeviceOptions& options, double tolerance_hz) {
  spec.validate();
  material.validate();
  const double d = spec.period_d;
  if (!(f_target > 0.0) || !std::isfinite(f_target))
    fail(ErrorKind::InvalidArgument, "target frequency must be positive");
  if (L_lo < 3.0 * d * (1.0 - 1e-12))
    fail(ErrorKind::InvalidArgument, "length range must start at three periods or more");
  if (L_hi - L_lo < 2.0 * d * (1.0 - 1e-12))
    fail(ErrorKind::InvalidArgument, "length range must span at least two periods");

  const int steps = static_cast<int>(std::ceil((L_hi - L_lo) / (d / 20.0) - 1e-9));
  std::vector<double> Ls(steps + 1);
  for (int i = 0; i <= steps; ++i) Ls[i] = L_lo + (L_hi - L_lo) * i / steps;
  std::vector<std::vector<double>> F(Ls.size());
  parallel_for(Ls.size(), options.threads,
               [&](std::size_t i) { F[i] = strip_frequencies(spec, Ls[i], material, f_target, options); });

  TuneResult res;
  struct Bracket {
    double lo, hi, flo, fhi;
  };
  std::vector<Bracket> brackets;
  for (std::size_t i = 0; i < Ls.size(); ++i) {
    res.scan.push_back({Ls[i], nearest_value(F[i], f_target)});
    if (i + 1 == Ls.size()) continue;
    if (strip_hole_count(spec, Ls[i]) != strip_hole_count(spec, Ls[i + 1])) continue;
    for (double a : F[i]) {
      const double b = nearest_value(F[i + 1], a);
      if (!std::isnan(b) && (a - f_target) * (b - f_target) <= 0.0) {
        brackets.push_back({Ls[i], Ls[i + 1], a, b});
        res.crossings.push_back(0.5 * (Ls[i] + Ls[i + 1]));
      }
    }
  }
  if (brackets.empty()) {
    const auto near = std::min_element(res.scan.begin(), res.scan.end(), [&](auto& a, auto& b) {
      if (std::isnan(a.frequency)) return false;
      return std::isnan(b.frequency) || std::abs(a.frequency - f_target) < std::abs(b.frequency - f_target);
    });
    std::ostringstream os;
    os.precision(6);
    os << "no strip mode crosses " << f_target * 1e-9 << " GHz for L in [" << L_lo * 1e6 << ", "
       << L_hi * 1e6 << "] um; nearest approach " << near->frequency * 1e-9 << " GHz at L = "
       << near->length * 1e6 << " um (off by " << std::abs(near->frequency - f_target) * 1e-6
       << " MHz)";
    fail(ErrorKind::NoCrossing, os.str());
  }
  const double middle = 0.5 * (L_lo + L_hi);
  const auto pick = std::min_element(brackets.begin(), brackets.end(), [&](auto& a, auto& b) {
    return std::abs(0.5 * (a.lo + a.hi) - middle) < std::abs(0.5 * (b.lo + b.hi) - middle);
  });
  Bracket b = *pick;
  res.length = std::abs(b.flo - f_target) <= std::abs(b.fhi - f_target) ? b.lo : b.hi;
  res.achieved_f = std::abs(b.flo - f_target) <= std::abs(b.fhi - f_target) ? b.flo : b.fhi;
  for (int it = 0; it < 60 && std::abs(res.achieved_f - f_target) > tolerance_hz; ++it) {
    const double mid = 0.5 * (b.lo + b.hi);
    const double guess = b.flo + (b.fhi - b.flo) * 0.5;
    const double fm = nearest_value(strip_frequencies(spec, mid, material, f_target, options), guess);
    if (std::isnan(fm)) break;
    if (std::abs(fm - f_target) < std::abs(res.achieved_f - f_target)) {
      res.length = mid;
      res.achieved_f = fm;
    }
    if ((b.flo - f_target) * (fm - f_target) <= 0.0) b.hi = mid, b.fhi = fm;
    else b.lo = mid, b.flo = fm;
    if (b.hi - b.lo < 1e-9 * d) break;
  }
  if (std::abs(res.achieved_f - f_target) > tolerance_hz) {
    std::ostringstream os;
    os << "bisection stalled " << std::abs(res.achieved_f - f_target) * 1e-6
       << " MHz from the target at L = " << res.length * 1e6 << " um";
    fail(ErrorKind::NoCrossing, os.str());
  }
  return res;
}

// ---------------------------------------------------------------- coupling

CouplingEstimate extract_coupling(const CoupledTriplet& t) {
  if (!(t.minus <= t.zero && t.zero <= t.plus))
    fail(ErrorKind::InvalidArgument, "triplet must satisfy minus <= zero <= plus");
  CouplingEstimate c;
  c.delta = t.plus + t.minus - 2.0 * t.zero;
  const double split = t.plus - t.minus;
  const double rad = (split * split - c.delta * c.delta) / 8.0;
  if (rad < 0.0) {
    if (rad > -1e-12 * split * split) return c;
    fail(ErrorKind::Coupling,
         "(w+ - w-)^2 < delta^2: the triplet is not described by one resonator mode coupled "
         "to a single waveguide mode");
  }
  c.g = std::sqrt(rad);
  return c;
}

namespace {

// Detuning at one length, or nullopt when the middle normal mode is not the
// darkest of the three or the triplet does not invert.
struct TuningPoint {
  double length = 0.0;
  bool valid = false;
  CoupledResult result;
  CouplingEstimate coupling;
};

TuningPoint tuning_point(SubsystemLayout layout, double L, const Material& material,
                         double f_center, double window, const DeviceOptions& options) {
  TuningPoint p;
  p.length = L;
  layout.length_L = L;
  try {
    p.result = coupled_triplet(layout, material, f_center, window, options);
    p.coupling = extract_coupling(p.result.triplet);
    const auto& w = p.result.waveguide_fraction;
    p.valid = w[1] < w[0] && w[1] < w[2];
  } catch (const Error&) {
    p.valid = false;
  }
  return p;
}

}  // namespace

SubsystemTuning tune_subsystem(const SubsystemLayout& layout, const Material& material,
                               double f_center, double window, double span,
                               const DeviceOptions& options, double delta_tol, int max_steps) {
  if (!(delta_tol > 0.0)) fail(ErrorKind::InvalidArgument, "delta tolerance must be positive");
  if (!(span >= 0.0)) fail(ErrorKind::InvalidArgument, "length span must be non-negative");
  const double d = layout.waveguide.period_d;
  const double L_min = 3.0 * d;
  const int half = static_cast<int>(std::ceil(span / (d / 8.0) - 1e-9));
  std::vector<double> Ls;
  for (int i = -half; i <= half; ++i) {
    const double L = layout.length_L + i * d / 8.0;
    if (L >= L_min) Ls.push_back(L);
  }
  if (Ls.empty()) fail(ErrorKind::InvalidArgument, "link length below three periods");
  std::vector<TuningPoint> pts(Ls.size());
  DeviceOptions inner = options;
  inner.threads = 1;
  parallel_for(Ls.size(), options.threads, [&](std::size_t i) {
    pts[i] = tuning_point(layout, Ls[i], material, f_center, window, inner);
  });

  SubsystemTuning t;
  t.layout = layout;
  for (const auto& p : pts)
    if (p.valid) t.history.push_back({p.length, p.coupling});
  std::size_t best = pts.size();
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i].valid && (best == pts.size() || std::abs(pts[i].coupling.delta) <
                                                    std::abs(pts[best].coupling.delta)))
      best = i;
  if (best == pts.size()) {
    std::ostringstream os;
    os << "no length within " << span * 1e6 << " um of " << layout.length_L * 1e6
       << " um gives a resolvable triplet";
    fail(ErrorKind::Coupling, os.str());
  }

  TuningPoint cur = pts[best];
  // Refine towards a valid neighbour of opposite sign.
  if (std::abs(cur.coupling.delta) > delta_tol) {
    TuningPoint other;
    for (std::size_t j : {best - 1, best + 1}) {
      if (j >= pts.size() || !pts[j].valid) continue;
      if (pts[j].coupling.delta * cur.coupling.delta < 0.0 &&
          (!other.valid || std::abs(pts[j].coupling.delta) < std::abs(other.coupling.delta)))
        other = pts[j];
    }
    for (int step = 0; other.valid && step < max_steps; ++step) {
      const double da = cur.coupling.delta, db = other.coupling.delta;
      double L = cur.length - da * (other.length - cur.length) / (db - da);
      const double lo = std::min(cur.length, other.length), hi = std::max(cur.length, other.length);
      L = std::clamp(L, lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
      TuningPoint p = tuning_point(layout, L, material, f_center, window, options);
      if (!p.valid) break;
      t.history.push_back({p.length, p.coupling});
      if (p.coupling.delta * da < 0.0) other = cur;
      if (std::abs(p.coupling.delta) < std::abs(cur.coupling.delta) || p.coupling.delta * da < 0.0)
        cur = p;
      if (std::abs(cur.coupling.delta) <= delta_tol) break;
    }
  }
  std::sort(t.history.begin(), t.history.end(),
            [](const TuningStep& a, const TuningStep& b) { return a.length < b.length; });
  t.layout.length_L = cur.length;
  t.result = std::move(cur.result);
  t.coupling = cur.coupling;
  t.converged = std::abs(t.coupling.delta) <= delta_tol;
  return t;
}

double default_assembly_h(const SubsystemLayout& layout) {
  return std::min(layout.resonator.side_s / 42.0, layout.waveguide.period_d / 12.0);
}

double energy_fraction(const std::vector<double>& element_energy, const Mesh& mesh,
                       const std::vector<Loop>& subregion) {
  double in = 0.0, tot = 0.0;
  for (std::size_t e = 0; e < element_energy.size(); ++e) {
    tot += element_energy[e];
    const Vec2 c = mesh.centroid(e);
    for (const auto& loop : subregion)
      if (point_in_loop(loop, c)) {
        in += element_energy[e];
        break;
      }
  }
  return tot > 0.0 ? in / tot : 0.0;
}

double dark_mode_fraction(const OperatorPair& ops, const ModeSolution& mode, const Mesh& mesh,
                          const std::vector<Loop>& subregion) {
  return energy_fraction(strain_energy_field(ops, mode, mesh), mesh, subregion);
}

namespace {

struct Reference {
  Mesh mesh;
  std::vector<Eigen::VectorXcd> fields;
  double frequency = 0.0;
};

// Isolated mode nearest f. A degenerate resonator family is reduced to the one
// combination that moves the link port, since only that one couples.
Reference reference_modes(Mesh mesh, const Material& mat, double f, double tol,
                          const std::string& port) {
  Reference r;
  const OperatorPair ops = assemble(mesh, mat);
  EigsOptions eo;
  eo.tol = tol;
  auto md = eigs(ops, f, 6, eo);
  std::size_t best = 0;
  for (std::size_t i = 1; i < md.size(); ++i)
    if (std::abs(md[i].frequency - f) < std::abs(md[best].frequency - f)) best = i;
  r.frequency = md[best].frequency;
  std::vector<Eigen::VectorXcd> fam;
  for (const auto& m : md)
    if (port.empty() ? &m == &md[best] : std::abs(m.frequency - r.frequency) <= 1e-6 * r.frequency)
      fam.push_back(m.displacement);
  if (fam.size() > 1) {
    const Eigen::Index k = static_cast<Eigen::Index>(fam.size());
    Eigen::MatrixXcd Q(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) Q(i, j) = port_form(mesh, fam[i], fam[j], port);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Q);
    const Eigen::VectorXcd c = es.eigenvectors().col(k - 1);
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(fam[0].size());
    for (Eigen::Index i = 0; i < k; ++i) u += c[i] * fam[i];
    fam = {u};
  }
  r.fields = std::move(fam);
  r.mesh = std::move(mesh);
  return r;
}

}  // namespace

CoupledResult coupled_triplet(const SubsystemLayout& layout, const Material& material,
                              double f_center, double window, const DeviceOptions& options) {
  const double h = options.target_h > 0.0 ? options.target_h : default_assembly_h(layout);
  const Mesh mesh = triangulate(subsystem_assembly(layout), h, options.min_angle_deg);
  return coupled_triplet(mesh, LayoutFrame{}, layout, material, f_center, window, options);
}

CoupledResult coupled_triplet(const Mesh& assembly, const LayoutFrame& frame,
                              const SubsystemLayout& layout, const Material& material,
                              double f_center, double window, const DeviceOptions& options) {
  material.validate();
  if (!(window > 0.0) || !(f_center > window))
    fail(ErrorKind::InvalidArgument, "window must be positive and below f_center");
  const double h = options.target_h > 0.0 ? options.target_h : default_assembly_h(layout);
  DeviceOptions ro = options;
  ro.target_h = h;
  ro.ellipse_segments = layout.ellipse_segments;

  Reference res, wg;
  parallel_for(2, options.threads, [&](std::size_t job) {
    const std::string port = std::string("port_") + port_letter(layout.link);
    if (job == 0) res = reference_modes(resonator_mesh(layout.resonator, ro), material, f_center, ro.tol, port);
    else wg = reference_modes(strip_mesh(layout.waveguide, layout.length_L, ro), material, f_center, ro.tol, "");
  });

  const auto place = layout.placements();
  const double theta = port_angles(true, layout.resonator.port_site)[static_cast<int>(layout.link)];
  const Vec2 axis{std::cos(theta), std::sin(theta)};
  const Vec2 across{-axis.y, axis.x};
  const Vec2 strip_mid = place[0].centre + axis * (layout.resonator.port_offset() + 0.5 * layout.length_L);

  // Transplant the isolated fields onto the assembly nodes.
  const std::size_t nn = assembly.nodes.size();
  std::vector<Eigen::VectorXcd> family;
  const std::size_t nres = res.fields.size();
  for (int r = 0; r < 2; ++r)
    for (std::size_t f = 0; f < nres; ++f) family.push_back(Eigen::VectorXcd::Zero(2 * nn));
  family.push_back(Eigen::VectorXcd::Zero(2 * nn));
  PointLocator res_loc(res.mesh), wg_loc(wg.mesh);
  const double mx = frame.mirrored ? -1.0 : 1.0;
  for (std::size_t n = 0; n < nn; ++n) {
    Vec2 q = assembly.nodes[n];
    if (frame.mirrored) q.x = 2.0 * frame.axis_x - q.x;
    std::array<double, 3> bary;
    bool done = false;
    for (int r = 0; r < 2 && !done; ++r) {
      const double sgn = place[r].upward ? 1.0 : -1.0;
      const Vec2 local = (q - place[r].centre) * sgn;
      const int e = res_loc.find(local, &bary, 1e-7);
      if (e < 0) continue;
      for (std::size_t f = 0; f < nres; ++f) {
        const auto v = interpolate(res.mesh, res.fields[f], e, bary);
        family[r * nres + f][2 * n] = mx * sgn * v[0];
        family[r * nres + f][2 * n + 1] = sgn * v[1];
      }
      done = true;
    }
    if (done) continue;
    const Vec2 rel = q - strip_mid;
    const int e = wg_loc.find({dot(rel, axis), dot(rel, across)}, &bary, 1e-7);
    if (e < 0) continue;
    const auto v = interpolate(wg.mesh, wg.fields[0], e, bary);
    const cplx gx = v[0] * axis.x + v[1] * across.x, gy = v[0] * axis.y + v[1] * across.y;
    family.back()[2 * n] = mx * gx;
    family.back()[2 * n + 1] = gy;
  }

  const OperatorPair ops = assemble(assembly, material);
  auto modes = window_modes(ops, f_center - window, f_center + window, options.tol);
  CoupledResult out;
  out.resonator_f = res.frequency;
  out.waveguide_f = wg.frequency;
  for (const auto& m : modes) out.candidates.push_back(m.frequency);
  if (modes.size() < 3) {
    std::ostringstream os;
    os << "fewer than three modes within " << window * 1e-6 << " MHz of " << f_center * 1e-9
       << " GHz; found:";
    for (double f : out.candidates) os << ' ' << f * 1e-9;
    fail(ErrorKind::Coupling, os.str());
  }
  std::vector<Eigen::VectorXcd> Mf;
  std::vector<double> nf;
  for (const auto& f : family) {
    Mf.push_back(ops.M * f);
    nf.push_back(std::real(f.dot(Mf.back())));
  }
  std::vector<double> score(modes.size(), 0.0);
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t f = 0; f < family.size(); ++f)
      if (nf[f] > 0.0) score[i] += std::norm(Mf[f].dot(modes[i].displacement)) / nf[f];
  std::vector<std::size_t> order(modes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] > score[b]; });
  order.resize(3);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return modes[a].frequency < modes[b].frequency; });

  auto loops = layout.extent_loops();
  Loop strip = loops.back();
  if (frame.mirrored) {
    for (auto& p : strip) p.x = 2.0 * frame.axis_x - p.x;
    std::reverse(strip.begin(), strip.end());
  }
  for (int j = 0; j < 3; ++j) {
    out.modes[j] = modes[order[j]];
    out.overlap[j] = score[order[j]];
    out.waveguide_fraction[j] = dark_mode_fraction(ops, out.modes[j], assembly, {strip});
  }
  out.triplet = {out.modes[0].frequency, out.modes[1].frequency, out.modes[2].frequency};
  out.mesh = assembly;
  return out;
}

// ---------------------------------------------------------------- exports

namespace {

ojson catalog_modes(const ModeCatalog& c) {
  auto arr = ojson::array();
  for (const auto& m : c.modes) {
    ojson j;
    j["frequency_ghz"] = m.mode.frequency * 1e-9;
    j["residual"] = m.mode.residual;
    ojson ports;
    for (std::size_t p = 0; p < c.port_tags.size(); ++p) ports[c.port_tags[p]] = m.ports[p];
    j["port_signature"] = ports;
    j["region"] = region_name(m.region);
    j["confinement"] = m.confinement;
    j["group"] = m.group;
    arr.push_back(j);
  }
  return arr;
}

}  // namespace

std::string catalog_json(const ModeCatalog& catalog) {
  ojson j;
  j["mesh"] = {{"nodes", catalog.mesh.nodes.size()}, {"elements", catalog.mesh.elements.size()}};
  j["modes"] = catalog_modes(catalog);
  return j.dump(2);
}

std::string waveguide_modes_json(const WaveguideModes& w) {
  ojson j;
  j["mesh"] = {{"nodes", w.catalog.mesh.nodes.size()}, {"elements", w.catalog.mesh.elements.size()}};
  auto modes = catalog_modes(w.catalog);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    modes[i]["wavenumber_per_um"] = w.wavenumber[i] * 1e-6;
    modes[i]["parity"] = w.parity[i];
    modes[i]["branch_spacing_mhz"] = w.spacing[i] * 1e-6;
  }
  j["modes"] = modes;
  return j.dump(2);
}

std::string tune_json(const TuneResult& t, double f_target) {
  ojson j;
  j["target_ghz"] = f_target * 1e-9;
  j["length_um"] = t.length * 1e6;
  j["achieved_ghz"] = t.achieved_f * 1e-9;
  j["error_mhz"] = (t.achieved_f - f_target) * 1e-6;
  auto cr = ojson::array();
  for (double c : t.crossings) cr.push_back(c * 1e6);
  j["crossings_um"] = cr;
  auto scan = ojson::array();
  for (const auto& s : t.scan) scan.push_back({s.length * 1e6, s.frequency * 1e-9});
  j["scan_um_ghz"] = scan;
  return j.dump(2);
}

std::string coupled_json(const CoupledResult& r, const CouplingEstimate* c) {
  ojson j;
  j["triplet_ghz"] = {r.triplet.minus * 1e-9, r.triplet.zero * 1e-9, r.triplet.plus * 1e-9};
  j["overlap"] = r.overlap;
  j["waveguide_energy_fraction"] = r.waveguide_fraction;
  j["resonator_reference_ghz"] = r.resonator_f * 1e-9;
  j["waveguide_reference_ghz"] = r.waveguide_f * 1e-9;
  if (c) {
    j["delta_mhz"] = c->delta * 1e-6;
    j["g_mhz"] = c->g * 1e-6;
  }
  auto cand = ojson::array();
  for (double f : r.candidates) cand.push_back(f * 1e-9);
  j["candidates_ghz"] = cand;
  return j.dump(2);
}

std::string tuning_json(const SubsystemTuning& t) {
  ojson j;
  j["length_um"] = t.layout.length_L * 1e6;
  j["converged"] = t.converged;
  auto h = ojson::array();
  for (const auto& s : t.history)
    h.push_back({{"length_um", s.length * 1e6}, {"delta_mhz", s.coupling.delta * 1e-6},
                 {"g_mhz", s.coupling.g * 1e-6}});
  j["history"] = h;
  j["result"] = ojson::parse(coupled_json(t.result, &t.coupling));
  return j.dump(2);
}

void write_mode_field_csv(std::ostream& os, const Mesh& mesh, const ModeSolution& mode) {
  const std::size_t n = mesh.nodes.size();
  if (static_cast<std::size_t>(mode.displacement.size()) != 2 * n)
    fail(ErrorKind::InvalidArgument, "mode does not belong to this mesh");
  std::vector<double> mag(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mag[i] = std::sqrt(std::norm(mode.displacement[2 * i]) + std::norm(mode.displacement[2 * i + 1]));
    peak = std::max(peak, mag[i]);
  }
  if (peak <= 0.0) peak = 1.0;
  os << "# mode field, frequency_hz=" << std::setprecision(12) << mode.frequency << "\n";
  os << "x0_um,y0_um,x1_um,y1_um,x2_um,y2_um,magnitude\n";
  os << std::setprecision(7);
  for (const auto& el : mesh.elements) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c) {
      os << mesh.nodes[el[c]].x * 1e6 << ',' << mesh.nodes[el[c]].y * 1e6 << ',';
      m += mag[el[c]] / 3.0;
    }
    os << m / peak << '\n';
  }
}

namespace {

std::string field_colour(double t) {
  static const double stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

}  // namespace

std::string mode_field_svg(std::istream& csv, const std::string& title) {
  std::string line;
  std::vector<std::array<double, 7>> rows;
  bool header = false;
  while (std::getline(csv, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("x0_um,y0_um,x1_um", 0) != 0) fail(ErrorKind::Io, "not a mode field file");
      header = true;
      continue;
    }
    std::array<double, 7> r{};
    std::istringstream ls(line);
    std::string cell;
    for (int c = 0; c < 7; ++c) {
      if (!std::getline(ls, cell, ',')) fail(ErrorKind::Io, "short row in mode field file");
      try {
        r[c] = std::stod(cell);
      } catch (const std::exception&) {
        fail(ErrorKind::Io, "bad number in mode field file");
      }
    }
    rows.push_back(r);
  }
  if (!header || rows.empty()) fail(ErrorKind::Io, "not a mode field file");
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& r : rows)
    for (int c = 0; c < 3; ++c) {
      x0 = std::min(x0, r[2 * c]), x1 = std::max(x1, r[2 * c]);
      y0 = std::min(y0, r[2 * c + 1]), y1 = std::max(y1, r[2 * c + 1]);
    }
  const double pad = 0.03 * std::max(x1 - x0, y1 - y0);
  SvgPlot plot(x0 - pad, x1 + pad, y0 - pad, y1 + pad, 720, 720, true);
  plot.no_axes();
  plot.title(title.empty() ? "displacement magnitude" : title);
  for (const auto& r : rows) {
    const std::string c = field_colour(r[6]);
    plot.polygon({{r[0], r[1]}, {r[2], r[3]}, {r[4], r[5]}}, c, c, 0.2);
  }
  return plot.str();
}

}  // namespace phononet
