#include "phononet/phononet.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "bands.hpp"
#include "devices.hpp"
#include "elasticity.hpp"
#include "error.hpp"
#include "network.hpp"

#ifndef PHONONET_VERSION
#define PHONONET_VERSION "0.0.0"
#endif

using namespace phononet;

struct phn_context {
  Material material = Material::diamond();
  std::array<WaveguideSpec, 3> waveguides{};
  ResonatorSpec resonator{};
  std::optional<ShieldSpec> shield;
  phn_network network{0, 0, 0, 0, 0, 3, 0.01, 0};
  phn_solver solver{};
  std::array<double, 4> targets{1.7339e9, 0.9634e9, 1.3388e9, 1.1691e9};
};

struct phn_bands {
  BandStructure bs;
  GapSet gaps;
};

struct phn_regions {
  RegionSet regions;
};

struct phn_catalog {
  ModeCatalog catalog;
};

namespace {

thread_local std::string last_error;

phn_status to_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return PHN_ERR_INVALID_ARGUMENT;
    case ErrorKind::Material: return PHN_ERR_MATERIAL;
    case ErrorKind::Geometry: return PHN_ERR_GEOMETRY;
    case ErrorKind::Mesh: return PHN_ERR_MESH;
    case ErrorKind::Pairing: return PHN_ERR_PAIRING;
    case ErrorKind::Assembly: return PHN_ERR_ASSEMBLY;
    case ErrorKind::Solver: return PHN_ERR_SOLVER;
    case ErrorKind::NoCrossing: return PHN_ERR_NO_CROSSING;
    case ErrorKind::Coupling: return PHN_ERR_COUPLING;
    case ErrorKind::Layout: return PHN_ERR_LAYOUT;
    case ErrorKind::Io: return PHN_ERR_IO;
  }
  return PHN_ERR_INTERNAL;
}

template <class F>
phn_status guard(F&& fn) {
  try {
    fn();
    last_error.clear();
    return PHN_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return PHN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return PHN_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return PHN_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorKind::InvalidArgument, std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

Port to_port(char label) {
  switch (label) {
    case 'A': case 'a': return Port::A;
    case 'B': case 'b': return Port::B;
    case 'C': case 'c': return Port::C;
  }
  fail(ErrorKind::InvalidArgument, std::string("unknown waveguide label '") + label + "'");
}

DispersionOptions dispersion_options(const phn_solver& s) {
  DispersionOptions o;
  o.n_k = s.n_k;
  o.n_bands = s.n_bands;
  o.f_max = s.f_max;
  o.target_h = s.target_h;
  o.min_angle_deg = s.min_angle_deg;
  o.ellipse_segments = s.ellipse_segments;
  o.tol = s.tol;
  o.refine_edges = s.refine_edges != 0;
  o.refine_tol_hz = s.refine_tol_hz;
  o.threads = s.threads;
  return o;
}

DeviceOptions device_options(const phn_solver& s) {
  DeviceOptions o;
  o.target_h = s.target_h;
  o.min_angle_deg = s.min_angle_deg;
  o.ellipse_segments = s.ellipse_segments;
  o.tol = s.tol;
  o.threads = s.threads;
  return o;
}

NetworkSpec network_spec(const phn_context& c, bool with_shield) {
  NetworkSpec s;
  s.L_A = c.network.L_A;
  s.L_B = c.network.L_B;
  s.L_C = c.network.L_C;
  s.rows = c.network.rows;
  s.cols = c.network.cols;
  s.resonator = c.resonator;
  s.waveguides = c.waveguides;
  if (with_shield) {
    if (!c.shield) fail(ErrorKind::InvalidArgument, "shield audit requested but no shield is set");
    s.shield = c.shield;
  }
  return s;
}

SubsystemLayout subsystem(const phn_context& c, Port p) {
  SubsystemLayout lay;
  lay.resonator = c.resonator;
  lay.link = p;
  lay.waveguide = c.waveguides[static_cast<int>(p)];
  lay.length_L = network_spec(c, false).length(p);
  lay.ellipse_segments = c.solver.ellipse_segments;
  return lay;
}

std::string field_csv(const Mesh& mesh, const ModeSolution& mode) {
  std::ostringstream os;
  write_mode_field_csv(os, mesh, mode);
  return os.str();
}

}  // namespace

extern "C" {

const char* phn_version(void) { return PHONONET_VERSION; }

const char* phn_last_error(void) { return last_error.c_str(); }

const char* phn_status_name(phn_status status) {
  switch (status) {
    case PHN_OK: return "ok";
    case PHN_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case PHN_ERR_MATERIAL: return "material";
    case PHN_ERR_GEOMETRY: return "geometry";
    case PHN_ERR_MESH: return "mesh";
    case PHN_ERR_PAIRING: return "pairing";
    case PHN_ERR_ASSEMBLY: return "assembly";
    case PHN_ERR_SOLVER: return "solver";
    case PHN_ERR_NO_CROSSING: return "no_crossing";
    case PHN_ERR_COUPLING: return "coupling";
    case PHN_ERR_LAYOUT: return "layout";
    case PHN_ERR_IO: return "io";
    case PHN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void phn_string_free(char* s) { std::free(s); }

void phn_material_diamond(phn_material* out) {
  if (!out) return;
  const Material m = Material::diamond();
  *out = {m.youngs_modulus, m.poisson_ratio, m.density, m.thickness};
}

void phn_solver_defaults(phn_solver* out) {
  if (!out) return;
  const DispersionOptions d;
  const DeviceOptions v;
  *out = {d.n_k, d.n_bands, d.f_max, 0.0, d.min_angle_deg, d.ellipse_segments,
          d.tol, d.refine_edges ? 1 : 0, d.refine_tol_hz, v.threads};
}

phn_status phn_lame(const phn_material* m, double* lambda, double* mu) {
  return guard([&] {
    need(m, "material");
    const auto l = lame_constants({m->youngs_modulus, m->poisson_ratio, m->density, m->thickness});
    if (lambda) *lambda = l.lambda;
    if (mu) *mu = l.mu;
  });
}

phn_status phn_extract_coupling(double f_minus, double f_zero, double f_plus, double* delta,
                                double* g) {
  return guard([&] {
    const auto c = extract_coupling({f_minus, f_zero, f_plus});
    if (delta) *delta = c.delta;
    if (g) *g = c.g;
  });
}

phn_status phn_context_new(phn_context** out) {
  return guard([&] {
    need(out, "out");
    auto* c = new phn_context;
    phn_solver_defaults(&c->solver);
    *out = c;
  });
}

void phn_context_free(phn_context* ctx) { delete ctx; }

phn_status phn_set_material(phn_context* ctx, const phn_material* m) {
  return guard([&] {
    need(ctx, "context");
    need(m, "material");
    Material mat{m->youngs_modulus, m->poisson_ratio, m->density, m->thickness};
    mat.validate();
    ctx->material = mat;
  });
}

phn_status phn_set_waveguide(phn_context* ctx, char label, const phn_waveguide* w) {
  return guard([&] {
    need(ctx, "context");
    need(w, "waveguide");
    WaveguideSpec s{w->period_d, w->width_w, w->semi_major_a, w->semi_minor_b,
                    w->hole_axis == PHN_HOLE_ACROSS ? HoleAxis::Across : HoleAxis::Along};
    s.validate();
    ctx->waveguides[static_cast<int>(to_port(label))] = s;
  });
}

phn_status phn_set_resonator(phn_context* ctx, const phn_resonator* r) {
  return guard([&] {
    need(ctx, "context");
    need(r, "resonator");
    ResonatorSpec s{r->side_s, r->corner_cut_s_prime,
                    r->port_site == PHN_PORT_CORNER ? PortSite::Corner : PortSite::Side};
    s.validate();
    ctx->resonator = s;
  });
}

phn_status phn_set_shield(phn_context* ctx, const phn_shield* s) {
  return guard([&] {
    need(ctx, "context");
    need(s, "shield");
    ShieldSpec sh{s->period_h, s->block_h_prime, s->tether_l,
                  s->style == PHN_SHIELD_CROSS_HOLE ? ShieldStyle::CrossHole
                                                    : ShieldStyle::BlockTether};
    sh.validate();
    ctx->shield = sh;
  });
}

phn_status phn_set_network(phn_context* ctx, const phn_network* n) {
  return guard([&] {
    need(ctx, "context");
    need(n, "network");
    if (n->rows < 0 || n->cols < 0) fail(ErrorKind::InvalidArgument, "rows and cols must be >= 0");
    if (n->stub_periods < 2) fail(ErrorKind::InvalidArgument, "stub_periods must be >= 2");
    if (!(n->confinement_threshold > 0 && n->confinement_threshold < 1))
      fail(ErrorKind::InvalidArgument, "confinement_threshold must lie in (0, 1)");
    ctx->network = *n;
  });
}

phn_status phn_set_solver(phn_context* ctx, const phn_solver* s) {
  return guard([&] {
    need(ctx, "context");
    need(s, "solver");
    if (s->n_k < 2) fail(ErrorKind::InvalidArgument, "n_k must be >= 2");
    if (s->n_bands < 1) fail(ErrorKind::InvalidArgument, "n_bands must be >= 1");
    if (!(s->f_max > 0)) fail(ErrorKind::InvalidArgument, "f_max must be positive");
    if (s->target_h < 0) fail(ErrorKind::InvalidArgument, "target_h must be >= 0");
    if (s->ellipse_segments < 8) fail(ErrorKind::InvalidArgument, "ellipse_segments must be >= 8");
    if (!(s->tol > 0)) fail(ErrorKind::InvalidArgument, "tol must be positive");
    if (s->threads < 0) fail(ErrorKind::InvalidArgument, "threads must be >= 0");
    ctx->solver = *s;
  });
}

phn_status phn_set_targets(phn_context* ctx, const double targets[4]) {
  return guard([&] {
    need(ctx, "context");
    need(targets, "targets");
    for (int i = 0; i < 4; ++i) {
      if (!(targets[i] > 0)) fail(ErrorKind::InvalidArgument, "mode targets must be positive");
      ctx->targets[i] = targets[i];
    }
  });
}

phn_status phn_bands_compute(const phn_context* ctx, char label, phn_bands** out) {
  return guard([&] {
    need(ctx, "context");
    need(out, "out");
    auto b = std::make_unique<phn_bands>();
    const auto opts = dispersion_options(ctx->solver);
    if (label == 'S' || label == 's') {
      if (!ctx->shield) fail(ErrorKind::InvalidArgument, "no shield is set");
      b->bs = dispersion_2d(*ctx->shield, ctx->material, opts);
    } else {
      b->bs = dispersion(ctx->waveguides[static_cast<int>(to_port(label))], ctx->material, opts);
    }
    b->gaps = detect_gaps(b->bs);
    *out = b.release();
  });
}

phn_status phn_bands_from_csv(const char* text, phn_bands** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    auto b = std::make_unique<phn_bands>();
    std::istringstream is(text);
    b->bs = read_bands_csv(is);
    b->gaps = detect_gaps(b->bs);
    *out = b.release();
  });
}

void phn_bands_free(phn_bands* b) { delete b; }

phn_status phn_bands_size(const phn_bands* b, size_t* n_k, size_t* n_bands) {
  return guard([&] {
    need(b, "bands");
    if (n_k) *n_k = b->bs.k.size();
    if (n_bands) *n_bands = b->bs.n_bands();
  });
}

phn_status phn_bands_value(const phn_bands* b, size_t k, size_t band, double* f) {
  return guard([&] {
    need(b, "bands");
    need(f, "f");
    if (k >= b->bs.bands.size() || band >= b->bs.n_bands())
      fail(ErrorKind::InvalidArgument, "band index out of range");
    *f = b->bs.bands[k][band];
  });
}

phn_status phn_bands_gap_count(const phn_bands* b, size_t* n) {
  return guard([&] {
    need(b, "bands");
    need(n, "n");
    *n = b->gaps.gaps.size();
  });
}

phn_status phn_bands_gap(const phn_bands* b, size_t i, double* lo, double* hi) {
  return guard([&] {
    need(b, "bands");
    if (i >= b->gaps.gaps.size()) fail(ErrorKind::InvalidArgument, "gap index out of range");
    if (lo) *lo = b->gaps.gaps[i].lo;
    if (hi) *hi = b->gaps.gaps[i].hi;
  });
}

phn_status phn_bands_csv(const phn_bands* b, char** out) {
  return guard([&] {
    need(b, "bands");
    need(out, "out");
    std::ostringstream os;
    write_bands_csv(os, b->bs);
    *out = dup(os.str());
  });
}

phn_status phn_bands_gaps_json(const phn_bands* b, char** out) {
  return guard([&] {
    need(b, "bands");
    need(out, "out");
    *out = dup(gaps_json(b->gaps));
  });
}

phn_status phn_bands_svg(const phn_bands* b, const phn_regions* regions, const char* title,
                         char** out) {
  return guard([&] {
    need(b, "bands");
    need(out, "out");
    BandPlotOptions o;
    if (title) o.title = title;
    if (regions) o.regions = &regions->regions;
    *out = dup(band_diagram_svg(b->bs, b->gaps, o));
  });
}

phn_status phn_regions_compute(const phn_bands* a, const phn_bands* b, const phn_bands* c,
                               phn_regions** out) {
  return guard([&] {
    need(a, "bands A");
    need(b, "bands B");
    need(c, "bands C");
    need(out, "out");
    *out = new phn_regions{classify_regions(a->gaps, b->gaps, c->gaps)};
  });
}

void phn_regions_free(phn_regions* r) { delete r; }

phn_status phn_regions_classify(const phn_regions* r, double f, phn_region* out) {
  return guard([&] {
    need(r, "regions");
    need(out, "out");
    *out = static_cast<phn_region>(static_cast<int>(classify_frequency(f, r->regions)));
  });
}

phn_status phn_regions_json(const phn_regions* r, char** out) {
  return guard([&] {
    need(r, "regions");
    need(out, "out");
    *out = dup(regions_json(r->regions));
  });
}

phn_status phn_sweep(const phn_context* ctx, char label, const char* param, double delta,
                     int steps, char** json, char** svg) {
  return guard([&] {
    need(ctx, "context");
    need(param, "param");
    const auto p = parse_sweep_param(param);
    if (!p) fail(ErrorKind::InvalidArgument, std::string("unknown sweep parameter '") + param + "'");
    const auto sweep = robustness_sweep(ctx->waveguides[static_cast<int>(to_port(label))],
                                        ctx->material, *p, delta, steps,
                                        dispersion_options(ctx->solver));
    put(json, sweep_json(sweep, *p));
    put(svg, gap_sweep_svg(sweep, *p));
  });
}

phn_status phn_catalog_compute(const phn_context* ctx, double f_lo, double f_hi,
                               phn_catalog** out) {
  return guard([&] {
    need(ctx, "context");
    need(out, "out");
    auto c = std::make_unique<phn_catalog>();
    c->catalog =
        resonator_modes(ctx->resonator, ctx->material, f_lo, f_hi, device_options(ctx->solver));
    *out = c.release();
  });
}

void phn_catalog_free(phn_catalog* c) { delete c; }

phn_status phn_catalog_count(const phn_catalog* c, size_t* n) {
  return guard([&] {
    need(c, "catalog");
    need(n, "n");
    *n = c->catalog.modes.size();
  });
}

phn_status phn_catalog_frequency(const phn_catalog* c, size_t i, double* f) {
  return guard([&] {
    need(c, "catalog");
    need(f, "f");
    if (i >= c->catalog.modes.size()) fail(ErrorKind::InvalidArgument, "mode index out of range");
    *f = c->catalog.modes[i].mode.frequency;
  });
}

phn_status phn_catalog_json(const phn_catalog* c, char** out) {
  return guard([&] {
    need(c, "catalog");
    need(out, "out");
    *out = dup(catalog_json(c->catalog));
  });
}

phn_status phn_catalog_field_csv(const phn_catalog* c, size_t i, char** out) {
  return guard([&] {
    need(c, "catalog");
    need(out, "out");
    if (i >= c->catalog.modes.size()) fail(ErrorKind::InvalidArgument, "mode index out of range");
    *out = dup(field_csv(c->catalog.mesh, c->catalog.modes[i].mode));
  });
}

phn_status phn_waveguide_modes(const phn_context* ctx, char label, double length, double f_lo,
                               double f_hi, char** json) {
  return guard([&] {
    need(ctx, "context");
    need(json, "json");
    const auto w = finite_waveguide_modes(ctx->waveguides[static_cast<int>(to_port(label))], length,
                                          ctx->material, f_lo, f_hi, device_options(ctx->solver));
    *json = dup(waveguide_modes_json(w));
  });
}

phn_status phn_tune(const phn_context* ctx, char label, double f_target, double L_lo, double L_hi,
                    double tolerance_hz, char** json) {
  return guard([&] {
    need(ctx, "context");
    need(json, "json");
    const auto t = tune_length(ctx->waveguides[static_cast<int>(to_port(label))], ctx->material,
                               f_target, L_lo, L_hi, device_options(ctx->solver), tolerance_hz);
    *json = dup(tune_json(t, f_target));
  });
}

phn_status phn_couple(const phn_context* ctx, char label, double f_center, double window,
                      double span, double* delta, double* g, char** json, char** field) {
  return guard([&] {
    need(ctx, "context");
    const SubsystemLayout lay = subsystem(*ctx, to_port(label));
    const auto opts = device_options(ctx->solver);
    CoupledResult r;
    CouplingEstimate c;
    std::string text;
    if (span > 0) {
      const auto t = tune_subsystem(lay, ctx->material, f_center, window, span, opts);
      r = t.result;
      c = t.coupling;
      text = tuning_json(t);
    } else {
      r = coupled_triplet(lay, ctx->material, f_center, window, opts);
      c = extract_coupling(r.triplet);
      text = coupled_json(r, &c);
    }
    if (delta) *delta = c.delta;
    if (g) *g = c.g;
    put(json, text);
    put(field, field_csv(r.mesh, r.modes[1]));
  });
}

phn_status phn_layout(const phn_context* ctx, char** json, char** svg) {
  return guard([&] {
    need(ctx, "context");
    const auto graph = honeycomb_layout(network_spec(*ctx, false));
    put(json, layout_json(graph));
    put(svg, layout_svg(graph));
  });
}

phn_status phn_patch(const phn_context* ctx, char label, double f_center, double window,
                     int* confined, char** json) {
  return guard([&] {
    need(ctx, "context");
    const auto graph = honeycomb_layout(network_spec(*ctx, false));
    const int e = graph.pick_edge(to_port(label));
    if (e < 0)
      fail(ErrorKind::Layout, std::string("lattice has no ") + label + " edge; enlarge rows/cols");
    AuditReport rep;
    rep.patches.push_back(patch_confinement(graph, e, ctx->network.stub_periods, ctx->material,
                                            f_center, window, device_options(ctx->solver),
                                            ctx->network.confinement_threshold));
    if (confined) *confined = rep.patches[0].confined ? 1 : 0;
    put(json, audit_json(rep));
  });
}

phn_status phn_audit(const phn_context* ctx, int* passed, char** json, char** svg) {
  return guard([&] {
    need(ctx, "context");
    const NetworkSpec spec = network_spec(*ctx, ctx->network.audit_shield != 0);
    AuditOptions o;
    o.dispersion = dispersion_options(ctx->solver);
    o.devices = device_options(ctx->solver);
    o.targets = ctx->targets;
    o.stub_periods = ctx->network.stub_periods;
    o.confinement_threshold = ctx->network.confinement_threshold;
    const AuditReport rep = closed_subsystem_audit(spec, ctx->material, o);
    if (passed) *passed = rep.passed() ? 1 : 0;
    put(json, audit_json(rep));
    if (svg) {
      *svg = nullptr;
      if (spec.rows > 0 && spec.cols > 0) {
        try {
          const auto graph = honeycomb_layout(spec);
          *svg = dup(layout_svg(graph, &rep));
        } catch (const Error&) {
        }
      }
    }
  });
}

phn_status phn_plot(const char* kind, const char* artifact, char** svg) {
  return guard([&] {
    need(kind, "kind");
    need(artifact, "artifact");
    need(svg, "svg");
    const std::string k = kind;
    std::string out;
    if (k == "band-diagram") {
      std::istringstream is(artifact);
      const auto bs = read_bands_csv(is);
      out = band_diagram_svg(bs, detect_gaps(bs));
    } else if (k == "gap-sweep") {
      SweepParam p{};
      const auto sweep = read_sweep_json(artifact, &p);
      out = gap_sweep_svg(sweep, p);
    } else if (k == "mode-field") {
      std::istringstream is(artifact);
      out = mode_field_svg(is);
    } else if (k == "layout") {
      out = layout_svg(read_layout_json(artifact));
    } else {
      fail(ErrorKind::InvalidArgument,
           "unknown plot kind '" + k + "' (band-diagram, gap-sweep, mode-field, layout)");
    }
    *svg = dup(out);
  });
}

}  // extern "C"
