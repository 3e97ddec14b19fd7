#include "bands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "elasticity.hpp"
#include "error.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "svg.hpp"

namespace phononet {

// ---------------------------------------------------------------- intervals

namespace {

IntervalSet normalized(IntervalSet s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](const Interval& i) { return !(i.hi > i.lo); }),
          s.end());
  std::sort(s.begin(), s.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  IntervalSet out;
  for (const auto& i : s) {
    if (!out.empty() && i.lo < out.back().hi) out.back().hi = std::max(out.back().hi, i.hi);
    else out.push_back(i);
  }
  return out;
}

}  // namespace

IntervalSet interval_intersect(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet out;
  for (const auto& x : normalized(a))
    for (const auto& y : normalized(b)) {
      const Interval z{std::max(x.lo, y.lo), std::min(x.hi, y.hi)};
      if (z.hi > z.lo) out.push_back(z);
    }
  return normalized(out);
}

IntervalSet interval_subtract(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet cur = normalized(a);
  for (const auto& y : normalized(b)) {
    IntervalSet next;
    for (const auto& x : cur) {
      if (y.hi <= x.lo || y.lo >= x.hi) {
        next.push_back(x);
        continue;
      }
      if (y.lo > x.lo) next.push_back({x.lo, y.lo});
      if (y.hi < x.hi) next.push_back({y.hi, x.hi});
    }
    cur = std::move(next);
  }
  return normalized(cur);
}

IntervalSet interval_union(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet all = a;
  all.insert(all.end(), b.begin(), b.end());
  return normalized(all);
}

// ------------------------------------------------------- gaps and regions

void BandStructure::validate() const {
  if (k.size() != bands.size()) fail(ErrorKind::InvalidArgument, "band rows do not match k samples");
  const std::size_t n = n_bands();
  for (const auto& row : bands) {
    if (row.size() != n) fail(ErrorKind::InvalidArgument, "ragged band matrix");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!(row[j] >= 0.0)) fail(ErrorKind::InvalidArgument, "negative band frequency");
      if (j > 0 && row[j] < row[j - 1]) fail(ErrorKind::InvalidArgument, "band row not ascending");
    }
  }
}

const char* region_name(Region r) {
  switch (r) {
    case Region::I: return "I";
    case Region::II: return "II";
    case Region::III: return "III";
    case Region::IV: return "IV";
    default: return "none";
  }
}

GapSet detect_gaps(const BandStructure& bs) {
  bs.validate();
  GapSet out;
  const std::size_t n = bs.n_bands();
  if (bs.bands.empty() || n < 2) return out;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (const auto& row : bs.bands) {
      lo = std::max(lo, row[j]);
      hi = std::min(hi, row[j + 1]);
    }
    if (hi > lo && hi - lo > bs.resolution_hz && hi <= bs.f_max) out.gaps.push_back({lo, hi});
  }
  return out;
}

RegionSet classify_regions(const GapSet& a, const GapSet& b, const GapSet& c) {
  RegionSet r;
  r.region_I = interval_subtract(interval_intersect(b.gaps, c.gaps), a.gaps);
  r.region_II = interval_subtract(interval_intersect(a.gaps, c.gaps), b.gaps);
  r.region_III = interval_subtract(interval_intersect(a.gaps, b.gaps), c.gaps);
  r.region_IV = interval_intersect(interval_intersect(a.gaps, b.gaps), c.gaps);
  return r;
}

Region classify_frequency(double f, const RegionSet& regions) {
  auto in = [f](const IntervalSet& s) {
    return std::any_of(s.begin(), s.end(), [f](const Interval& i) { return i.contains(f); });
  };
  if (in(regions.region_IV)) return Region::IV;
  if (in(regions.region_I)) return Region::I;
  if (in(regions.region_II)) return Region::II;
  if (in(regions.region_III)) return Region::III;
  return Region::None;
}

// ----------------------------------------------------------------- solving

namespace {

/// A meshed unit cell with its periodic maps and a wavevector path k(t).
struct CellProblem {
  Mesh mesh;
  OperatorPair ops;
  std::vector<PeriodicMap> maps;
  std::vector<Vec2> lattice;
  std::function<std::vector<double>(double)> path;
  double f_max = 0.0;
  double tol = 1e-9;

  /// Ascending frequencies at path parameter t, at least `count` of them and
  /// with the last one above f_max.
  std::vector<double> solve(double t, int count) const {
    const auto kc = path(t);
    const OperatorPair red = apply_bloch(ops, maps, lattice, kc);
    count = std::min<int>(count, static_cast<int>(red.size()));
    EigsOptions eo;
    eo.tol = tol;
    for (;;) {
      const auto modes = eigs(red, 0.0, count, eo);
      if (modes.back().frequency > f_max || count >= red.size()) {
        std::vector<double> f;
        for (const auto& m : modes) f.push_back(std::max(0.0, m.frequency));
        std::sort(f.begin(), f.end());
        return f;
      }
      count = std::min<int>(count + 6, static_cast<int>(red.size()));
    }
  }
};

int count_below(const std::vector<double>& row, double f_max) {
  return static_cast<int>(std::count_if(row.begin(), row.end(), [&](double f) { return f <= f_max; }));
}

BandStructure sample_bands(const CellProblem& cell, double t_max, const DispersionOptions& opt,
                           double period) {
  if (opt.n_k < 2) fail(ErrorKind::InvalidArgument, "need at least two k samples");
  if (!(opt.f_max > 0.0)) fail(ErrorKind::InvalidArgument, "f_max must be positive");
  std::map<double, std::vector<double>> rows;
  std::mutex lock;
  auto add_rows = [&](const std::vector<double>& ts, int count) {
    std::vector<std::vector<double>> out(ts.size());
    parallel_for(ts.size(), opt.threads, [&](std::size_t i) { out[i] = cell.solve(ts[i], count); });
    std::lock_guard<std::mutex> g(lock);
    for (std::size_t i = 0; i < ts.size(); ++i) rows[ts[i]] = std::move(out[i]);
  };
  auto width = [&]() {
    int n = 0;
    for (const auto& [t, r] : rows) n = std::max(n, count_below(r, opt.f_max) + 1);
    return n;
  };
  auto complete = [&]() {
    // Every row must carry the common band count.
    for (int pass = 0; pass < 4; ++pass) {
      const int n = width();
      std::vector<double> shortr;
      for (const auto& [t, r] : rows)
        if (static_cast<int>(r.size()) < n) shortr.push_back(t);
      if (shortr.empty()) return;
      add_rows(shortr, n);
    }
  };

  std::vector<double> ts(opt.n_k);
  for (int i = 0; i < opt.n_k; ++i) ts[i] = t_max * i / (opt.n_k - 1);
  add_rows(ts, std::max(opt.n_bands, 2));
  complete();

  if (opt.refine_edges) {
    // Golden-section search for the true band extrema that bound each
    // candidate gap; evaluated rows are kept as extra samples.
    struct Task {
      int band;
      bool maximize;
      double a, b;
    };
    for (int round = 0; round < 2; ++round) {
      const int n = width();
      std::vector<double> keys;
      for (const auto& [t, r] : rows) keys.push_back(t);
      std::vector<Task> tasks;
      for (int j = 0; j + 1 < n; ++j) {
        double lo = 0, hi = std::numeric_limits<double>::infinity();
        std::size_t imax = 0, imin = 0;
        for (std::size_t i = 0; i < keys.size(); ++i) {
          const auto& r = rows[keys[i]];
          if (r[j] > lo) lo = r[j], imax = i;
          if (r[j + 1] < hi) hi = r[j + 1], imin = i;
        }
        if (!(hi > lo) || lo > opt.f_max) continue;
        auto bracket = [&](std::size_t i) {
          return std::pair{keys[i > 0 ? i - 1 : 0], keys[std::min(i + 1, keys.size() - 1)]};
        };
        auto [a1, b1] = bracket(imax);
        auto [a2, b2] = bracket(imin);
        tasks.push_back({j, true, a1, b1});
        tasks.push_back({j + 1, false, a2, b2});
      }
      if (tasks.empty()) break;
      std::vector<std::map<double, std::vector<double>>> found(tasks.size());
      const double tstop = 1e-4 * t_max;
      parallel_for(tasks.size(), opt.threads, [&](std::size_t ti) {
        const Task& tk = tasks[ti];
        auto& seen = found[ti];
        auto f = [&](double t) {
          auto it = seen.find(t);
          if (it == seen.end()) it = seen.emplace(t, cell.solve(t, n)).first;
          const double v = it->second[tk.band];
          return tk.maximize ? -v : v;
        };
        const double g = (std::sqrt(5.0) - 1) / 2;
        double a = tk.a, b = tk.b;
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = f(c), fd = f(d);
        double last = std::min(fc, fd);
        for (int it = 0; it < 40 && b - a > tstop; ++it) {
          if (fc < fd) {
            b = d, d = c, fd = fc;
            c = b - g * (b - a), fc = f(c);
          } else {
            a = c, c = d, fc = fd;
            d = a + g * (b - a), fd = f(d);
          }
          const double now = std::min(fc, fd);
          if (std::abs(now - last) < 0.1 * opt.refine_tol_hz && it > 4) break;
          last = now;
        }
        // Endpoints of the bracket may hold the extremum.
        f(a), f(b);
      });
      for (auto& m : found)
        for (auto& [t, r] : m) rows[t] = std::move(r);
      complete();
    }
  }

  BandStructure bs;
  const int n = width();
  for (auto& [t, r] : rows) {
    bs.k.push_back(t);
    r.resize(n);
    bs.bands.push_back(std::move(r));
    const auto kc = cell.path(t);
    bs.kvec.push_back({kc[0], kc.size() > 1 ? kc[1] : 0.0});
  }
  bs.f_max = opt.f_max;
  bs.period = period;
  bs.resolution_hz = opt.refine_edges ? opt.refine_tol_hz : 0.0;
  return bs;
}

}  // namespace

BandStructure dispersion(const WaveguideSpec& spec, const Material& material,
                         const DispersionOptions& options) {
  spec.validate();
  material.validate();
  if (options.n_k < 8) fail(ErrorKind::InvalidArgument, "dispersion needs n_k >= 8");
  const double d = spec.period_d;
  MeshOptions mo;
  mo.target_h = options.target_h > 0 ? options.target_h : d / 12;
  mo.min_angle_deg = options.min_angle_deg;
  mo.mirrored = {{"periodic_minus", "periodic_plus", Isometry::shift({d, 0})}};
  CellProblem cell;
  cell.mesh = triangulate(waveguide_cell(spec, options.ellipse_segments), mo);
  cell.maps = {periodic_pair(cell.mesh, "periodic_minus", "periodic_plus", {d, 0})};
  cell.lattice = {{d, 0}};
  cell.ops = assemble(cell.mesh, material);
  cell.path = [](double t) { return std::vector<double>{t}; };
  cell.f_max = options.f_max;
  cell.tol = options.tol;
  BandStructure bs = sample_bands(cell, kPi / d, options, d);
  bs.ticks = {{0.0, "G"}, {kPi / d, "X"}};
  return bs;
}

BandStructure dispersion_2d(const ShieldSpec& spec, const Material& material,
                            const DispersionOptions& options) {
  spec.validate();
  material.validate();
  const double h = spec.period_h;
  MeshOptions mo;
  mo.target_h = options.target_h > 0 ? options.target_h : h / 12;
  mo.min_angle_deg = options.min_angle_deg;
  mo.mirrored = {{"periodic_x_minus", "periodic_x_plus", Isometry::shift({h, 0})},
                 {"periodic_y_minus", "periodic_y_plus", Isometry::shift({0, h})}};
  CellProblem cell;
  cell.mesh = triangulate(shield_cell(spec), mo);
  cell.maps = {periodic_pair(cell.mesh, "periodic_x_minus", "periodic_x_plus", {h, 0}),
               periodic_pair(cell.mesh, "periodic_y_minus", "periodic_y_plus", {0, h})};
  cell.lattice = {{h, 0}, {0, h}};
  cell.ops = assemble(cell.mesh, material);
  const double kx = kPi / h;
  const double leg3 = std::sqrt(2.0) * kx;
  cell.path = [kx, leg3](double t) {
    if (t <= kx) return std::vector<double>{t, 0.0};
    if (t <= 2 * kx) return std::vector<double>{kx, t - kx};
    const double s = std::max(0.0, 1.0 - (t - 2 * kx) / leg3);
    return std::vector<double>{kx * s, kx * s};
  };
  cell.f_max = options.f_max;
  cell.tol = options.tol;
  // n_k is the per-leg count; legs share their end points.
  DispersionOptions opt = options;
  const double total = 2 * kx + leg3;
  opt.n_k = std::max(2, 3 * (options.n_k - 1) + 1);
  BandStructure bs = sample_bands(cell, total, opt, h);
  bs.ticks = {{0.0, "G"}, {kx, "X"}, {2 * kx, "M"}, {total, "G"}};
  return bs;
}

// ------------------------------------------------------------------ sweeps

std::optional<SweepParam> parse_sweep_param(const std::string& s) {
  if (s == "d") return SweepParam::d;
  if (s == "w") return SweepParam::w;
  if (s == "a") return SweepParam::a;
  if (s == "b") return SweepParam::b;
  return std::nullopt;
}

const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::d: return "d";
    case SweepParam::w: return "w";
    case SweepParam::a: return "a";
    default: return "b";
  }
}

std::vector<SweepEntry> robustness_sweep(const WaveguideSpec& spec, const Material& material,
                                         SweepParam param, double delta_range, int n_steps,
                                         const DispersionOptions& options) {
  spec.validate();
  if (n_steps < 1) fail(ErrorKind::InvalidArgument, "sweep needs at least one step");
  if (delta_range < 0) fail(ErrorKind::InvalidArgument, "sweep range must be non-negative");
  auto field = [param](WaveguideSpec& s) -> double& {
    switch (param) {
      case SweepParam::d: return s.period_d;
      case SweepParam::w: return s.width_w;
      case SweepParam::a: return s.semi_major_a;
      default: return s.semi_minor_b;
    }
  };
  WaveguideSpec base = spec;
  const double centre = field(base);
  if (delta_range == 0.0) n_steps = 1;
  std::vector<SweepEntry> out(n_steps);
  for (int i = 0; i < n_steps; ++i) {
    out[i].spec = spec;
    out[i].value = n_steps == 1 ? centre : centre - delta_range + 2 * delta_range * i / (n_steps - 1);
    field(out[i].spec) = out[i].value;
  }
  // Steps run one after another; each dispersion parallelizes over k.
  for (auto& e : out) {
    try {
      e.spec.validate();
      e.gaps = detect_gaps(dispersion(e.spec, material, options));
    } catch (const Error& err) {
      e.valid = false;
      e.error = err.what();
    }
  }
  return out;
}

// ------------------------------------------------------------------ export

void write_bands_csv(std::ostream& os, const BandStructure& bs) {
  os << std::setprecision(12);
  os << "# f_max_ghz " << bs.f_max * 1e-9 << " period_um " << bs.period / kMicron
     << " resolution_mhz " << bs.resolution_hz * 1e-6 << '\n';
  if (!bs.ticks.empty()) {
    os << "# ticks";
    for (const auto& [t, name] : bs.ticks) os << ' ' << name << ':' << t;
    os << '\n';
  }
  os << "k_per_m,kx_per_m,ky_per_m";
  for (std::size_t j = 0; j < bs.n_bands(); ++j) os << ",band" << j << "_ghz";
  os << '\n';
  for (std::size_t i = 0; i < bs.k.size(); ++i) {
    os << bs.k[i] << ',' << bs.kvec[i][0] << ',' << bs.kvec[i][1];
    for (double f : bs.bands[i]) os << ',' << f * 1e-9;
    os << '\n';
  }
}

BandStructure read_bands_csv(std::istream& is) {
  BandStructure bs;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "f_max_ghz") {
        double f = 0, p = 0, r = 0;
        std::string k2, k3;
        ss >> f >> k2 >> p >> k3 >> r;
        bs.f_max = f * 1e9;
        bs.period = p * kMicron;
        bs.resolution_hz = r * 1e6;
      } else if (key == "ticks") {
        std::string tok;
        while (ss >> tok) {
          const auto c = tok.find(':');
          if (c == std::string::npos) continue;
          bs.ticks.emplace_back(std::stod(tok.substr(c + 1)), tok.substr(0, c));
        }
      }
      continue;
    }
    if (!header) {
      if (line.rfind("k_per_m", 0) != 0) fail(ErrorKind::Io, "not a band-structure CSV");
      header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() < 3) fail(ErrorKind::Io, "short band-structure CSV row");
    bs.k.push_back(vals[0]);
    bs.kvec.push_back({vals[1], vals[2]});
    std::vector<double> row;
    for (std::size_t j = 3; j < vals.size(); ++j) row.push_back(vals[j] * 1e9);
    bs.bands.push_back(std::move(row));
  }
  if (!header) fail(ErrorKind::Io, "not a band-structure CSV");
  bs.validate();
  return bs;
}

namespace {

nlohmann::ordered_json intervals_json(const IntervalSet& s) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& i : s) arr.push_back({i.lo * 1e-9, i.hi * 1e-9});
  return arr;
}

}  // namespace

std::string gaps_json(const GapSet& gaps) {
  nlohmann::ordered_json j;
  j["unit"] = "GHz";
  j["gaps"] = intervals_json(gaps.gaps);
  return j.dump(2);
}

std::string regions_json(const RegionSet& r) {
  nlohmann::ordered_json j;
  j["unit"] = "GHz";
  j["I"] = intervals_json(r.region_I);
  j["II"] = intervals_json(r.region_II);
  j["III"] = intervals_json(r.region_III);
  j["IV"] = intervals_json(r.region_IV);
  return j.dump(2);
}

std::string sweep_json(const std::vector<SweepEntry>& sweep, SweepParam param) {
  nlohmann::ordered_json j;
  j["parameter"] = sweep_param_name(param);
  j["unit"] = "GHz";
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : sweep) {
    nlohmann::ordered_json x;
    x["value_um"] = e.value / kMicron;
    x["valid"] = e.valid;
    if (!e.valid) x["error"] = e.error;
    x["gaps"] = intervals_json(e.gaps.gaps);
    arr.push_back(x);
  }
  j["steps"] = arr;
  return j.dump(2);
}

std::vector<SweepEntry> read_sweep_json(const std::string& text, SweepParam* param) {
  std::vector<SweepEntry> out;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto p = parse_sweep_param(j.at("parameter").get<std::string>());
    if (!p) fail(ErrorKind::Io, "sweep file names an unknown parameter");
    if (param) *param = *p;
    for (const auto& x : j.at("steps")) {
      SweepEntry e;
      e.value = x.at("value_um").get<double>() * kMicron;
      e.valid = x.at("valid").get<bool>();
      if (x.contains("error")) e.error = x["error"].get<std::string>();
      for (const auto& g : x.at("gaps")) e.gaps.gaps.push_back({g.at(0).get<double>() * 1e9, g.at(1).get<double>() * 1e9});
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, std::string("not a sweep file: ") + e.what());
  }
  return out;
}

std::string band_diagram_svg(const BandStructure& bs, const GapSet& gaps,
                             const BandPlotOptions& options) {
  bs.validate();
  const double xmax = bs.k.empty() ? 1.0 : std::max(bs.k.back(), 1e-30);
  const double ymax = bs.f_max * 1e-9;
  SvgPlot plot(0.0, 1.0, 0.0, ymax);
  plot.title(options.title);
  plot.axis_labels(bs.ticks.size() > 2 ? "wavevector path" : "k d / pi", "frequency (GHz)");
  for (const auto& g : gaps.gaps) plot.band(g.lo * 1e-9, std::min(g.hi * 1e-9, ymax), "#c6dbef");
  if (options.regions) {
    const std::pair<const IntervalSet*, const char*> regs[] = {
        {&options.regions->region_I, "I"},
        {&options.regions->region_II, "II"},
        {&options.regions->region_III, "III"},
        {&options.regions->region_IV, "IV"}};
    for (const auto& [set, name] : regs)
      for (const auto& i : *set) {
        plot.hline(i.lo * 1e-9, "#444444", "6,4");
        plot.hline(i.hi * 1e-9, "#444444", "6,4");
        plot.text(0.98, 0.5 * (i.lo + i.hi) * 1e-9, name, "end");
      }
  }
  for (const auto& [f, label] : options.markers) {
    plot.hline(f * 1e-9, "#d62728", "2,3");
    plot.text(0.02, f * 1e-9, label, "start");
  }
  for (const auto& [t, name] : bs.ticks) plot.vtick(t / xmax, name);
  for (std::size_t j = 0; j < bs.n_bands(); ++j) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < bs.k.size(); ++i) {
      const double f = bs.bands[i][j] * 1e-9;
      pts.emplace_back(bs.k[i] / xmax, std::min(f, ymax * 1.02));
    }
    plot.polyline(pts, "#1f3b73", 1.4);
  }
  return plot.str();
}

std::string gap_sweep_svg(const std::vector<SweepEntry>& sweep, SweepParam param) {
  double xmin = 1e300, xmax = -1e300, ymax = 0;
  for (const auto& e : sweep) {
    xmin = std::min(xmin, e.value / kMicron);
    xmax = std::max(xmax, e.value / kMicron);
    for (const auto& g : e.gaps.gaps) ymax = std::max(ymax, g.hi * 1e-9);
  }
  if (sweep.empty()) xmin = 0, xmax = 1;
  if (xmax <= xmin) xmin -= 0.05, xmax += 0.05;
  if (ymax <= 0) ymax = 1;
  SvgPlot plot(xmin, xmax, 0.0, ymax * 1.1);
  plot.title(std::string("gap edges vs ") + sweep_param_name(param));
  plot.axis_labels(std::string(sweep_param_name(param)) + " (um)", "frequency (GHz)");
  const double half = sweep.size() > 1 ? 0.5 * (xmax - xmin) / (sweep.size() - 1) : 0.05;
  for (const auto& e : sweep) {
    const double x = e.value / kMicron;
    if (!e.valid) {
      plot.text(x, 0.05 * ymax, "invalid", "middle");
      continue;
    }
    for (const auto& g : e.gaps.gaps) plot.rect(x - half, g.lo * 1e-9, x + half, g.hi * 1e-9, "#c6dbef");
  }
  return plot.str();
}

}  // namespace phononet
