/* phononet: honeycomb phononic network design toolkit, C interface.
 *
 * All quantities are SI (m, Hz, Pa, kg/m^3). Functions return a phn_status;
 * on failure phn_last_error() holds a message for the calling thread.
 * Strings handed out through char** belong to the caller and are released
 * with phn_string_free. */
#ifndef PHONONET_PHONONET_H
#define PHONONET_PHONONET_H

#include <stddef.h>

#if defined(_WIN32)
#if defined(PHN_BUILDING)
#define PHN_API __declspec(dllexport)
#else
#define PHN_API __declspec(dllimport)
#endif
#else
#define PHN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  PHN_OK = 0,
  PHN_ERR_INVALID_ARGUMENT = 1,
  PHN_ERR_MATERIAL = 2,
  PHN_ERR_GEOMETRY = 3,
  PHN_ERR_MESH = 4,
  PHN_ERR_PAIRING = 5,
  PHN_ERR_ASSEMBLY = 6,
  PHN_ERR_SOLVER = 7,
  PHN_ERR_NO_CROSSING = 8,
  PHN_ERR_COUPLING = 9,
  PHN_ERR_LAYOUT = 10,
  PHN_ERR_IO = 11,
  PHN_ERR_INTERNAL = 12
} phn_status;

/* Waveguide labels are 'A', 'B', 'C'. Band solves also accept 'S' (shield). */

typedef enum { PHN_HOLE_ALONG = 0, PHN_HOLE_ACROSS = 1 } phn_hole_axis;
typedef enum { PHN_PORT_SIDE = 0, PHN_PORT_CORNER = 1 } phn_port_site;
typedef enum { PHN_SHIELD_BLOCK_TETHER = 0, PHN_SHIELD_CROSS_HOLE = 1 } phn_shield_style;
typedef enum {
  PHN_REGION_NONE = 0,
  PHN_REGION_I = 1,
  PHN_REGION_II = 2,
  PHN_REGION_III = 3,
  PHN_REGION_IV = 4
} phn_region;

typedef struct {
  double youngs_modulus;
  double poisson_ratio;
  double density;
  double thickness;
} phn_material;

typedef struct {
  double period_d;
  double width_w;
  double semi_major_a;
  double semi_minor_b;
  phn_hole_axis hole_axis;
} phn_waveguide;

typedef struct {
  double side_s;
  double corner_cut_s_prime;
  phn_port_site port_site;
} phn_resonator;

typedef struct {
  double period_h;
  double block_h_prime;
  double tether_l;
  phn_shield_style style;
} phn_shield;

typedef struct {
  double L_A, L_B, L_C;
  int rows, cols;
  int stub_periods;
  double confinement_threshold;
  int audit_shield; /* nonzero: the audit also solves the shield lattice */
} phn_network;

typedef struct {
  int n_k;
  int n_bands;
  double f_max;
  double target_h; /* 0 = per-structure default */
  double min_angle_deg;
  int ellipse_segments;
  double tol;
  int refine_edges;
  double refine_tol_hz;
  int threads; /* 0 = PHONONET_THREADS or hardware concurrency */
} phn_solver;

typedef struct phn_context phn_context;
typedef struct phn_bands phn_bands;
typedef struct phn_regions phn_regions;
typedef struct phn_catalog phn_catalog;

PHN_API const char* phn_version(void);
PHN_API const char* phn_last_error(void);
PHN_API const char* phn_status_name(phn_status status);
PHN_API void phn_string_free(char* s);

PHN_API void phn_material_diamond(phn_material* out);
PHN_API void phn_solver_defaults(phn_solver* out);
PHN_API phn_status phn_lame(const phn_material* m, double* lambda, double* mu);
PHN_API phn_status phn_extract_coupling(double f_minus, double f_zero, double f_plus,
                                        double* delta, double* g);

/* Context: one parameter set. Starts with diamond, default solver settings,
 * default mode targets and zeroed geometry. */
PHN_API phn_status phn_context_new(phn_context** out);
PHN_API void phn_context_free(phn_context* ctx);
PHN_API phn_status phn_set_material(phn_context* ctx, const phn_material* m);
PHN_API phn_status phn_set_waveguide(phn_context* ctx, char label, const phn_waveguide* w);
PHN_API phn_status phn_set_resonator(phn_context* ctx, const phn_resonator* r);
PHN_API phn_status phn_set_shield(phn_context* ctx, const phn_shield* s);
PHN_API phn_status phn_set_network(phn_context* ctx, const phn_network* n);
PHN_API phn_status phn_set_solver(phn_context* ctx, const phn_solver* s);
/* Mode targets a, b, c, d in Hz. */
PHN_API phn_status phn_set_targets(phn_context* ctx, const double targets[4]);

/* Band structures. */
PHN_API phn_status phn_bands_compute(const phn_context* ctx, char label, phn_bands** out);
PHN_API phn_status phn_bands_from_csv(const char* text, phn_bands** out);
PHN_API void phn_bands_free(phn_bands* b);
PHN_API phn_status phn_bands_size(const phn_bands* b, size_t* n_k, size_t* n_bands);
PHN_API phn_status phn_bands_value(const phn_bands* b, size_t k, size_t band, double* f);
PHN_API phn_status phn_bands_gap_count(const phn_bands* b, size_t* n);
PHN_API phn_status phn_bands_gap(const phn_bands* b, size_t i, double* lo, double* hi);
PHN_API phn_status phn_bands_csv(const phn_bands* b, char** out);
PHN_API phn_status phn_bands_gaps_json(const phn_bands* b, char** out);
/* regions may be NULL. */
PHN_API phn_status phn_bands_svg(const phn_bands* b, const phn_regions* regions, const char* title,
                                 char** out);

PHN_API phn_status phn_regions_compute(const phn_bands* a, const phn_bands* b, const phn_bands* c,
                                       phn_regions** out);
PHN_API void phn_regions_free(phn_regions* r);
PHN_API phn_status phn_regions_classify(const phn_regions* r, double f, phn_region* out);
PHN_API phn_status phn_regions_json(const phn_regions* r, char** out);

/* param is one of "d", "w", "a", "b"; values step by delta (m) about nominal. */
PHN_API phn_status phn_sweep(const phn_context* ctx, char label, const char* param, double delta,
                             int steps, char** json, char** svg);

/* Resonator mode catalog in [f_lo, f_hi]. */
PHN_API phn_status phn_catalog_compute(const phn_context* ctx, double f_lo, double f_hi,
                                       phn_catalog** out);
PHN_API void phn_catalog_free(phn_catalog* c);
PHN_API phn_status phn_catalog_count(const phn_catalog* c, size_t* n);
PHN_API phn_status phn_catalog_frequency(const phn_catalog* c, size_t i, double* f);
PHN_API phn_status phn_catalog_json(const phn_catalog* c, char** out);
PHN_API phn_status phn_catalog_field_csv(const phn_catalog* c, size_t i, char** out);

/* Finite strip of the labelled waveguide. */
PHN_API phn_status phn_waveguide_modes(const phn_context* ctx, char label, double length,
                                       double f_lo, double f_hi, char** json);
PHN_API phn_status phn_tune(const phn_context* ctx, char label, double f_target, double L_lo,
                            double L_hi, double tolerance_hz, char** json);

/* Coupled subsystem on the labelled edge at the network length. span > 0
 * retunes the length within +-span first. field_csv (may be NULL) receives
 * the middle normal mode. */
PHN_API phn_status phn_couple(const phn_context* ctx, char label, double f_center, double window,
                              double span, double* delta, double* g, char** json,
                              char** field_csv);

PHN_API phn_status phn_layout(const phn_context* ctx, char** json, char** svg);
PHN_API phn_status phn_patch(const phn_context* ctx, char label, double f_center, double window,
                             int* confined, char** json);
/* passed receives 1 when every verdict holds. svg (may be NULL) receives the
 * layout with verdict colours when the lattice is non-empty. */
PHN_API phn_status phn_audit(const phn_context* ctx, int* passed, char** json, char** svg);

/* kind: "band-diagram" (bands CSV), "gap-sweep" (sweep JSON), "mode-field"
 * (field CSV), "layout" (layout JSON). */
PHN_API phn_status phn_plot(const char* kind, const char* artifact, char** svg);

#ifdef __cplusplus
}
#endif

#endif
