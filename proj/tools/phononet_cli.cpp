// phononet command line front end. Everything goes through the C API.
#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "phononet/phononet.h"

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr double um = 1e-6, GHz = 1e9, MHz = 1e6, GPa = 1e9;

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kSolver = 3, kVerdict = 4 };

struct CliError {
  int code;
  std::string message;
};

int exit_code(phn_status s) {
  switch (s) {
    case PHN_OK: return kOk;
    case PHN_ERR_INVALID_ARGUMENT:
    case PHN_ERR_MATERIAL:
    case PHN_ERR_GEOMETRY:
    case PHN_ERR_LAYOUT:
    case PHN_ERR_IO: return kConfig;
    case PHN_ERR_MESH:
    case PHN_ERR_PAIRING:
    case PHN_ERR_ASSEMBLY:
    case PHN_ERR_SOLVER:
    case PHN_ERR_NO_CROSSING:
    case PHN_ERR_COUPLING: return kSolver;
    default: return kInternal;
  }
}

void check(phn_status s) {
  if (s != PHN_OK)
    throw CliError{exit_code(s), std::string(phn_status_name(s)) + ": " + phn_last_error()};
}

// Owns a string returned by the library.
struct Text {
  char* p = nullptr;
  Text() = default;
  Text(const Text&) = delete;
  Text& operator=(const Text&) = delete;
  ~Text() { phn_string_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? p : ""; }
  explicit operator bool() const { return p != nullptr; }
};

// ---------------------------------------------------------------- config

struct Key {
  const char* section;
  const char* name;
  const char* fallback;
  enum Type { Real, Int, Word } type;
};

// Lengths in um, frequencies in GHz unless the key says otherwise.
const std::vector<Key>& schema() {
  static const std::vector<Key> keys = {
      {"material", "youngs_modulus_gpa", "1050", Key::Real},
      {"material", "poisson_ratio", "0.2", Key::Real},
      {"material", "density_kg_m3", "3539", Key::Real},
      {"material", "thickness_um", "0.3", Key::Real},
      {"waveguide.A", "period_um", "6", Key::Real},
      {"waveguide.A", "width_um", "3", Key::Real},
      {"waveguide.A", "semi_major_um", "1.1", Key::Real},
      {"waveguide.A", "semi_minor_um", "0.3", Key::Real},
      {"waveguide.A", "hole_axis", "across", Key::Word},
      {"waveguide.B", "period_um", "4", Key::Real},
      {"waveguide.B", "width_um", "3", Key::Real},
      {"waveguide.B", "semi_major_um", "1.1", Key::Real},
      {"waveguide.B", "semi_minor_um", "0.3", Key::Real},
      {"waveguide.B", "hole_axis", "across", Key::Word},
      {"waveguide.C", "period_um", "7.6", Key::Real},
      {"waveguide.C", "width_um", "2", Key::Real},
      {"waveguide.C", "semi_major_um", "0.8", Key::Real},
      {"waveguide.C", "semi_minor_um", "0.76", Key::Real},
      {"waveguide.C", "hole_axis", "across", Key::Word},
      {"resonator", "side_um", "21", Key::Real},
      {"resonator", "corner_cut_um", "3.15", Key::Real},
      {"resonator", "port_site", "side", Key::Word},
      {"shield", "period_um", "3.8", Key::Real},
      {"shield", "block_um", "3.5", Key::Real},
      {"shield", "tether_um", "1", Key::Real},
      {"shield", "style", "cross_hole", Key::Word},
      {"network", "L_A_um", "86.3", Key::Real},
      {"network", "L_B_um", "86.3", Key::Real},
      {"network", "L_C_um", "91.2", Key::Real},
      {"network", "rows", "2", Key::Int},
      {"network", "cols", "2", Key::Int},
      {"network", "stub_periods", "3", Key::Int},
      {"network", "confinement_threshold", "0.01", Key::Real},
      {"network", "audit_shield", "0", Key::Int},
      {"modes", "a_ghz", "1.7339", Key::Real},
      {"modes", "b_ghz", "0.9634", Key::Real},
      {"modes", "c_ghz", "1.3388", Key::Real},
      {"modes", "d_ghz", "1.1691", Key::Real},
      {"solver", "n_k", "25", Key::Int},
      {"solver", "n_bands", "12", Key::Int},
      {"solver", "f_max_ghz", "2.5", Key::Real},
      {"solver", "target_h_um", "0", Key::Real},
      {"solver", "min_angle_deg", "25", Key::Real},
      {"solver", "ellipse_segments", "64", Key::Int},
      {"solver", "tol", "1e-09", Key::Real},
      {"solver", "refine_edges", "1", Key::Int},
      {"solver", "refine_tol_mhz", "1", Key::Real},
      {"solver", "threads", "0", Key::Int},
      {"run", "out_dir", "runs", Key::Word},
  };
  return keys;
}

pt::ptree::path_type path(const std::string& section, const std::string& name) {
  return pt::ptree::path_type(section + '\x1f' + name, '\x1f');
}

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : schema())
    if (section == k.section && name == k.name) return &k;
  return nullptr;
}

std::string normalize(const Key& k, const std::string& raw) {
  const std::string where = std::string(k.section) + "." + k.name;
  auto trimmed = raw;
  trimmed.erase(0, trimmed.find_first_not_of(" \t"));
  trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
  if (k.type == Key::Word) {
    if (trimmed.empty()) throw CliError{kConfig, where + " is empty"};
    return trimmed;
  }
  if (k.type == Key::Int) {
    int v = 0;
    const auto r = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
    if (r.ec != std::errc() || r.ptr != trimmed.data() + trimmed.size())
      throw CliError{kConfig, where + ": expected an integer, got '" + raw + "'"};
    return std::to_string(v);
  }
  double v = 0;
  const auto r = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
  if (r.ec != std::errc() || r.ptr != trimmed.data() + trimmed.size())
    throw CliError{kConfig, where + ": expected a number, got '" + raw + "'"};
  char buf[64];
  const auto w = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, w.ptr);
}

struct Config {
  pt::ptree tree;  // canonical: every schema key, schema order

  std::string get(const std::string& s, const std::string& n) const {
    return tree.get<std::string>(path(s, n));
  }
  double real(const std::string& s, const std::string& n) const { return std::stod(get(s, n)); }
  int integer(const std::string& s, const std::string& n) const { return std::stoi(get(s, n)); }

  void set(const std::string& section, const std::string& name, const std::string& raw) {
    const Key* k = find_key(section, name);
    if (!k) throw CliError{kConfig, "unknown config key " + section + "." + name};
    tree.put(path(section, name), normalize(*k, raw));
  }

  std::string ini() const {
    std::ostringstream os;
    pt::write_ini(os, tree);
    return os.str();
  }
};

Config load_config(const std::string& file, const std::vector<std::string>& overrides) {
  Config c;
  for (const auto& k : schema()) c.tree.put(path(k.section, k.name), k.fallback);
  if (!file.empty()) {
    pt::ptree in;
    try {
      pt::read_ini(file, in);
    } catch (const pt::ini_parser_error& e) {
      throw CliError{kConfig, std::string("cannot read config: ") + e.what()};
    }
    for (const auto& [section, body] : in) {
      if (body.empty())
        throw CliError{kConfig, "config entry '" + section + "' is outside any section"};
      for (const auto& [name, value] : body) c.set(section, name, value.data());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.substr(0, eq).rfind('.');
    if (eq == std::string::npos || dot == std::string::npos)
      throw CliError{kConfig, "override '" + o + "' must look like section.key=value"};
    c.set(o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
  }
  return c;
}

phn_hole_axis hole_axis(const std::string& s) {
  if (s == "along") return PHN_HOLE_ALONG;
  if (s == "across") return PHN_HOLE_ACROSS;
  throw CliError{kConfig, "hole_axis must be along or across, got '" + s + "'"};
}

int resolved_threads(const Config& c, int cli_threads) {
  if (cli_threads > 0) return cli_threads;
  if (c.integer("solver", "threads") > 0) return c.integer("solver", "threads");
  if (const char* env = std::getenv("PHONONET_THREADS"))
    if (std::atoi(env) > 0) return std::atoi(env);
  return 0;
}

struct Context {
  phn_context* ctx = nullptr;
  ~Context() { phn_context_free(ctx); }
};

void build_context(Context& out, const Config& c, int threads) {
  check(phn_context_new(&out.ctx));
  phn_context* ctx = out.ctx;
  const phn_material m{c.real("material", "youngs_modulus_gpa") * GPa,
                       c.real("material", "poisson_ratio"), c.real("material", "density_kg_m3"),
                       c.real("material", "thickness_um") * um};
  check(phn_set_material(ctx, &m));
  for (char label : {'A', 'B', 'C'}) {
    const std::string s = std::string("waveguide.") + label;
    const phn_waveguide w{c.real(s, "period_um") * um, c.real(s, "width_um") * um,
                          c.real(s, "semi_major_um") * um, c.real(s, "semi_minor_um") * um,
                          hole_axis(c.get(s, "hole_axis"))};
    check(phn_set_waveguide(ctx, label, &w));
  }
  const std::string site = c.get("resonator", "port_site");
  if (site != "side" && site != "corner")
    throw CliError{kConfig, "port_site must be side or corner, got '" + site + "'"};
  const phn_resonator r{c.real("resonator", "side_um") * um, c.real("resonator", "corner_cut_um") * um,
                        site == "corner" ? PHN_PORT_CORNER : PHN_PORT_SIDE};
  check(phn_set_resonator(ctx, &r));
  const std::string style = c.get("shield", "style");
  if (style != "cross_hole" && style != "block_tether")
    throw CliError{kConfig, "shield style must be cross_hole or block_tether, got '" + style + "'"};
  const phn_shield sh{c.real("shield", "period_um") * um, c.real("shield", "block_um") * um,
                      c.real("shield", "tether_um") * um,
                      style == "cross_hole" ? PHN_SHIELD_CROSS_HOLE : PHN_SHIELD_BLOCK_TETHER};
  check(phn_set_shield(ctx, &sh));
  const phn_network n{c.real("network", "L_A_um") * um,
                      c.real("network", "L_B_um") * um,
                      c.real("network", "L_C_um") * um,
                      c.integer("network", "rows"),
                      c.integer("network", "cols"),
                      c.integer("network", "stub_periods"),
                      c.real("network", "confinement_threshold"),
                      c.integer("network", "audit_shield")};
  check(phn_set_network(ctx, &n));
  const double targets[4] = {c.real("modes", "a_ghz") * GHz, c.real("modes", "b_ghz") * GHz,
                             c.real("modes", "c_ghz") * GHz, c.real("modes", "d_ghz") * GHz};
  check(phn_set_targets(ctx, targets));
  const phn_solver s{c.integer("solver", "n_k"),
                     c.integer("solver", "n_bands"),
                     c.real("solver", "f_max_ghz") * GHz,
                     c.real("solver", "target_h_um") * um,
                     c.real("solver", "min_angle_deg"),
                     c.integer("solver", "ellipse_segments"),
                     c.real("solver", "tol"),
                     c.integer("solver", "refine_edges"),
                     c.real("solver", "refine_tol_mhz") * MHz,
                     threads};
  check(phn_set_solver(ctx, &s));
}

// ---------------------------------------------------------------- run directory

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* h = EVP_MD_CTX_new();
  if (!h || EVP_DigestInit_ex(h, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(h, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(h, md, &len) != 1) {
    EVP_MD_CTX_free(h);
    throw CliError{kInternal, "sha256 failed"};
  }
  EVP_MD_CTX_free(h);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string read_file(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CliError{kConfig, "cannot open " + file};
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string utc_stamp(std::time_t t, const char* fmt) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

class Run {
 public:
  Run(const std::string& command, const std::vector<std::string>& argv, const Config& config,
      const std::string& base, int threads)
      : command_(command), argv_(argv), config_ini_(config.ini()), threads_(threads),
        start_(std::chrono::steady_clock::now()), started_(std::time(nullptr)) {
    const std::string stem = command + "-" + utc_stamp(started_, "%Y%m%dT%H%M%SZ");
    dir_ = fs::path(base) / stem;
    for (int i = 1; fs::exists(dir_); ++i) dir_ = fs::path(base) / (stem + "-" + std::to_string(i));
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw CliError{kConfig, "cannot create run directory " + dir_.string() + ": " + ec.message()};
    auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>((dir_ / "run.log").string(), true);
    log_ = std::make_shared<spdlog::logger>("phononet", spdlog::sinks_init_list{console, file});
    log_->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
    log_->flush_on(spdlog::level::info);
    write("config.ini", config_ini_);
    log_->info("phononet {} {} -> {}", phn_version(), command, dir_.string());
  }

  spdlog::logger& log() { return *log_; }
  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& text) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << text;
    if (!out) throw CliError{kConfig, "cannot write " + (dir_ / name).string()};
    files_.push_back(name);
  }

  void finish(int code, const std::string& error = "") {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json files = json::array();
    for (const auto& f : files_)
      files.push_back({{"name", f}, {"sha256", sha256_hex(read_file((dir_ / f).string()))}});
    json m;
    m["schema_version"] = kSchemaVersion;
    m["command"] = command_;
    m["argv"] = argv_;
    m["version"] = phn_version();
    m["config_sha256"] = sha256_hex(config_ini_);
    m["threads"] = threads_;
    m["started_utc"] = utc_stamp(started_, "%Y-%m-%dT%H:%M:%SZ");
    m["wall_time_s"] = wall;
    m["exit_code"] = code;
    if (!error.empty()) m["error"] = error;
    m["files"] = files;
    std::ofstream(dir_ / "manifest.json") << m.dump(2) << "\n";
    if (code == kOk)
      log_->info("done in {:.1f} s", wall);
    else
      log_->error("exit {} after {:.1f} s{}{}", code, wall, error.empty() ? "" : ": ", error);
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string config_ini_;
  int threads_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  std::time_t started_;
  std::vector<std::string> files_;
  std::shared_ptr<spdlog::logger> log_;
};

// ---------------------------------------------------------------- commands

struct Options {
  std::string config_file;
  std::string out;
  int threads = 0;
  std::vector<std::string> overrides;
  bool plot = false;

  std::string label = "C";
  std::string param = "d";
  double range_um = 0.2;
  int steps = 5;
  double f_lo_ghz = 0.8, f_hi_ghz = 1.9;
  bool fields = false;
  double length_um = 0;
  double target_ghz = 0;
  double lo_um = 0, hi_um = 0, tol_mhz = 1;
  double center_ghz = 0, window_mhz = 40, span_um = 0;
  std::string kind, input;
};

int port_index(const std::string& label) { return label[0] - 'A'; }

double mode_target(const Config& c, const std::string& label) {
  static const char* keys[3] = {"a_ghz", "b_ghz", "c_ghz"};
  return c.real("modes", keys[port_index(label)]);
}

double network_length_um(const Config& c, const std::string& label) {
  return c.real("network", "L_" + label + "_um");
}

std::string ghz(double hz) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << hz / GHz;
  return os.str();
}

struct Bands {
  phn_bands* p = nullptr;
  ~Bands() { phn_bands_free(p); }
};

void emit_bands(Run& run, const phn_bands* b, char label, bool plot, const phn_regions* regions) {
  Text csv, gj;
  check(phn_bands_csv(b, csv.out()));
  check(phn_bands_gaps_json(b, gj.out()));
  run.write(std::string("bands_") + label + ".csv", csv.str());
  run.write(std::string("gaps_") + label + ".json", gj.str());
  size_t n = 0;
  check(phn_bands_gap_count(b, &n));
  for (size_t i = 0; i < n; ++i) {
    double lo = 0, hi = 0;
    check(phn_bands_gap(b, i, &lo, &hi));
    run.log().info("{} gap {}: {} - {} GHz", label, i, ghz(lo), ghz(hi));
  }
  if (n == 0) run.log().info("{}: no complete gaps", label);
  if (plot) {
    Text svg;
    const std::string title = std::string("waveguide ") + label;
    check(phn_bands_svg(b, regions, title.c_str(), svg.out()));
    run.write(std::string("bands_") + label + ".svg", svg.str());
  }
}

int cmd_bands(Run& run, const phn_context* ctx, const Options& o) {
  Bands b;
  check(phn_bands_compute(ctx, o.label[0], &b.p));
  emit_bands(run, b.p, o.label[0], o.plot, nullptr);
  return kOk;
}

int cmd_regions(Run& run, const phn_context* ctx, const Config& c, const Options& o) {
  Bands b[3];
  for (int i = 0; i < 3; ++i) check(phn_bands_compute(ctx, char('A' + i), &b[i].p));
  phn_regions* r = nullptr;
  check(phn_regions_compute(b[0].p, b[1].p, b[2].p, &r));
  std::unique_ptr<phn_regions, void (*)(phn_regions*)> regions(r, phn_regions_free);
  for (int i = 0; i < 3; ++i) emit_bands(run, b[i].p, char('A' + i), o.plot, r);
  Text rj;
  check(phn_regions_json(r, rj.out()));
  run.write("regions.json", rj.str());
  static const char* names[4] = {"a", "b", "c", "d"};
  static const char* region_names[5] = {"none", "I", "II", "III", "IV"};
  for (int i = 0; i < 4; ++i) {
    const double f = c.real("modes", std::string(names[i]) + "_ghz") * GHz;
    phn_region reg{};
    check(phn_regions_classify(r, f, &reg));
    run.log().info("mode {} at {} GHz: region {}", names[i], ghz(f), region_names[reg]);
  }
  return kOk;
}

int cmd_shield(Run& run, const phn_context* ctx, const Config& c, const Options& o) {
  Bands b;
  check(phn_bands_compute(ctx, 'S', &b.p));
  emit_bands(run, b.p, 'S', o.plot, nullptr);
  size_t n = 0;
  check(phn_bands_gap_count(b.p, &n));
  json cover = json::object();
  bool all = true;
  for (const char* m : {"a", "b", "c", "d"}) {
    const double f = c.real("modes", std::string(m) + "_ghz") * GHz;
    bool in = false;
    for (size_t i = 0; i < n; ++i) {
      double lo = 0, hi = 0;
      check(phn_bands_gap(b.p, i, &lo, &hi));
      in |= f > lo && f < hi;
    }
    cover[m] = in;
    all &= in;
    run.log().info("mode {} at {} GHz {} a shield gap", m, ghz(f), in ? "inside" : "OUTSIDE");
  }
  run.write("shield.json", json{{"covers_all", all}, {"modes", cover}}.dump(2) + "\n");
  return all ? kOk : kVerdict;
}

int cmd_sweep(Run& run, const phn_context* ctx, const Options& o) {
  Text j, svg;
  check(phn_sweep(ctx, o.label[0], o.param.c_str(), o.range_um * um, o.steps, j.out(),
                  o.plot ? svg.out() : nullptr));
  run.write("sweep_" + o.label + "_" + o.param + ".json", j.str());
  if (svg) run.write("sweep_" + o.label + "_" + o.param + ".svg", svg.str());
  return kOk;
}

int cmd_resonator(Run& run, const phn_context* ctx, const Options& o) {
  phn_catalog* cat = nullptr;
  check(phn_catalog_compute(ctx, o.f_lo_ghz * GHz, o.f_hi_ghz * GHz, &cat));
  std::unique_ptr<phn_catalog, void (*)(phn_catalog*)> guard(cat, phn_catalog_free);
  Text j;
  check(phn_catalog_json(cat, j.out()));
  run.write("catalog.json", j.str());
  size_t n = 0;
  check(phn_catalog_count(cat, &n));
  run.log().info("{} resonator modes in [{}, {}] GHz", n, o.f_lo_ghz, o.f_hi_ghz);
  for (size_t i = 0; i < n && (o.fields || o.plot); ++i) {
    Text csv;
    check(phn_catalog_field_csv(cat, i, csv.out()));
    std::ostringstream name;
    name << "mode_" << std::setw(2) << std::setfill('0') << i;
    run.write(name.str() + ".csv", csv.str());
    if (o.plot) {
      Text svg;
      check(phn_plot("mode-field", csv.p, svg.out()));
      run.write(name.str() + ".svg", svg.str());
    }
  }
  return kOk;
}

int cmd_waveguide_modes(Run& run, const phn_context* ctx, const Config& c, const Options& o) {
  const double L = o.length_um > 0 ? o.length_um : network_length_um(c, o.label);
  Text j;
  check(phn_waveguide_modes(ctx, o.label[0], L * um, o.f_lo_ghz * GHz, o.f_hi_ghz * GHz, j.out()));
  run.write("waveguide_modes_" + o.label + ".json", j.str());
  return kOk;
}

int cmd_tune(Run& run, const phn_context* ctx, const Config& c, const Options& o) {
  const double target = o.target_ghz > 0 ? o.target_ghz : mode_target(c, o.label);
  const double L = network_length_um(c, o.label);
  const double lo = o.lo_um > 0 ? o.lo_um : L - 8, hi = o.hi_um > 0 ? o.hi_um : L + 8;
  Text j;
  check(phn_tune(ctx, o.label[0], target * GHz, lo * um, hi * um, o.tol_mhz * MHz, j.out()));
  run.write("tune_" + o.label + ".json", j.str());
  const auto parsed = json::parse(j.str());
  run.log().info("{}", parsed.dump());
  return kOk;
}

int cmd_couple(Run& run, const phn_context* ctx, const Config& c, const Options& o) {
  const double f = o.center_ghz > 0 ? o.center_ghz : mode_target(c, o.label);
  double delta = 0, g = 0;
  Text j, csv;
  check(phn_couple(ctx, o.label[0], f * GHz, o.window_mhz * MHz, o.span_um * um, &delta, &g, j.out(),
                   csv.out()));
  run.write("couple_" + o.label + ".json", j.str());
  run.write("couple_" + o.label + "_field.csv", csv.str());
  if (o.plot) {
    Text svg;
    check(phn_plot("mode-field", csv.p, svg.out()));
    run.write("couple_" + o.label + "_field.svg", svg.str());
  }
  run.log().info("edge {}: delta = {:.3f} MHz, g = {:.3f} MHz", o.label, delta / MHz, g / MHz);
  return kOk;
}

int cmd_layout(Run& run, const phn_context* ctx) {
  Text j, svg;
  check(phn_layout(ctx, j.out(), svg.out()));
  run.write("layout.json", j.str());
  run.write("layout.svg", svg.str());
  return kOk;
}

int cmd_patch(Run& run, const phn_context* ctx, const Config& c, const Options& o) {
  const double f = o.center_ghz > 0 ? o.center_ghz : mode_target(c, o.label);
  int confined = 0;
  Text j;
  check(phn_patch(ctx, o.label[0], f * GHz, o.window_mhz * MHz, &confined, j.out()));
  run.write("patch_" + o.label + ".json", j.str());
  run.log().info("patch {}: {}", o.label, confined ? "confined" : "NOT confined");
  return confined ? kOk : kVerdict;
}

int cmd_audit(Run& run, const phn_context* ctx, const Options& o) {
  int passed = 0;
  Text j, svg;
  check(phn_audit(ctx, &passed, j.out(), svg.out()));
  run.write("audit.json", j.str());
  if (svg) run.write("audit_layout.svg", svg.str());
  (void)o;
  const auto rep = json::parse(j.str());
  if (rep.contains("modes"))
    for (const auto& m : rep["modes"]) run.log().info("mode {}", m.dump());
  if (rep.contains("errors"))
    for (const auto& e : rep["errors"]) run.log().warn("stage error {}", e.dump());
  run.log().info("audit {}", passed ? "PASSED" : "FAILED");
  return passed ? kOk : kVerdict;
}

int cmd_plot(Run& run, const Options& o) {
  const std::string text = read_file(o.input);
  Text svg;
  check(phn_plot(o.kind.c_str(), text.c_str(), svg.out()));
  run.write(o.kind + ".svg", svg.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phononet: honeycomb phononic network design"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(phn_version()));
  Options o;
  app.add_option("-c,--config", o.config_file, "INI parameter file")->check(CLI::ExistingFile);
  app.add_option("-o,--out", o.out, "base directory for run folders (default [run] out_dir)");
  app.add_option("-j,--threads", o.threads, "worker threads (default PHONONET_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("-s,--override", o.overrides, "section.key=value, repeatable")->take_all();
  app.add_flag("--plot", o.plot, "also write SVG figures");

  auto label_opt = [&](CLI::App* sub, const char* flag, bool shield = false) {
    sub->add_option(flag, o.label, "waveguide label")
        ->transform(CLI::IsMember(shield ? std::vector<std::string>{"A", "B", "C", "S"}
                                         : std::vector<std::string>{"A", "B", "C"},
                                  CLI::ignore_case));
  };
  auto* bands = app.add_subcommand("bands", "dispersion and gaps of one waveguide");
  label_opt(bands, "-w,--waveguide", true);
  auto* gaps = app.add_subcommand("gaps", "gaps of one waveguide (same artifacts as bands)");
  label_opt(gaps, "-w,--waveguide", true);
  auto* regions = app.add_subcommand("regions", "operating regions from waveguides A, B and C");
  auto* sweep = app.add_subcommand("sweep", "gap robustness against one geometry parameter");
  label_opt(sweep, "-w,--waveguide");
  sweep->add_option("--param", o.param, "d, w, a or b")->check(CLI::IsMember({"d", "w", "a", "b"}));
  sweep->add_option("--range-um", o.range_um, "half range of the sweep");
  sweep->add_option("--steps", o.steps, "samples per side");
  auto* res = app.add_subcommand("resonator", "resonator mode catalog");
  res->add_option("--f-lo-ghz", o.f_lo_ghz);
  res->add_option("--f-hi-ghz", o.f_hi_ghz);
  res->add_flag("--fields", o.fields, "write one displacement CSV per mode");
  auto* wm = app.add_subcommand("waveguide-modes", "standing waves of a finite strip");
  label_opt(wm, "-w,--waveguide");
  wm->add_option("--length-um", o.length_um, "strip length (default network length)");
  wm->add_option("--f-lo-ghz", o.f_lo_ghz);
  wm->add_option("--f-hi-ghz", o.f_hi_ghz);
  auto* tune = app.add_subcommand("tune", "strip length putting a standing wave on a target");
  label_opt(tune, "-w,--waveguide");
  tune->add_option("--target-ghz", o.target_ghz, "default: the mode of the label");
  tune->add_option("--lo-um", o.lo_um);
  tune->add_option("--hi-um", o.hi_um);
  tune->add_option("--tol-mhz", o.tol_mhz);
  auto* couple = app.add_subcommand("couple", "resonator-waveguide-resonator coupling");
  label_opt(couple, "-e,--edge");
  couple->add_option("--center-ghz", o.center_ghz, "default: the mode of the label");
  couple->add_option("--window-mhz", o.window_mhz);
  couple->add_option("--tune-span-um", o.span_um, "retune the length within +- span first");
  auto* layout = app.add_subcommand("layout", "honeycomb lattice geometry");
  auto* patch = app.add_subcommand("patch", "confinement of one edge with stubbed neighbours");
  label_opt(patch, "-e,--edge");
  patch->add_option("--center-ghz", o.center_ghz);
  patch->add_option("--window-mhz", o.window_mhz);
  auto* audit = app.add_subcommand("audit", "closed-subsystem audit of the whole design");
  auto* shield = app.add_subcommand("shield", "shield lattice gaps against the mode targets");
  auto* plot = app.add_subcommand("plot", "redraw an artifact as SVG");
  plot->add_option("--kind", o.kind)
      ->required()
      ->check(CLI::IsMember({"band-diagram", "gap-sweep", "mode-field", "layout"}));
  plot->add_option("--input", o.input)->required()->check(CLI::ExistingFile);
  auto* config = app.add_subcommand("config", "configuration utilities");
  config->require_subcommand(1);
  auto* dump = config->add_subcommand("dump", "print the resolved configuration as INI");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub == config ? "config" : sub->get_name();
  std::unique_ptr<Run> run;
  try {
    const Config cfg = load_config(o.config_file, o.overrides);
    if (sub == config) {
      if (config->got_subcommand(dump)) std::cout << cfg.ini();
      return kOk;
    }
    const int threads = resolved_threads(cfg, o.threads);
    Context ctx;
    if (sub != plot) build_context(ctx, cfg, threads);
    const std::string base = o.out.empty() ? cfg.get("run", "out_dir") : o.out;
    run = std::make_unique<Run>(command, std::vector<std::string>(argv, argv + argc), cfg, base,
                                threads);
    int rc = kOk;
    if (sub == bands || sub == gaps) rc = cmd_bands(*run, ctx.ctx, o);
    else if (sub == regions) rc = cmd_regions(*run, ctx.ctx, cfg, o);
    else if (sub == sweep) rc = cmd_sweep(*run, ctx.ctx, o);
    else if (sub == res) rc = cmd_resonator(*run, ctx.ctx, o);
    else if (sub == wm) rc = cmd_waveguide_modes(*run, ctx.ctx, cfg, o);
    else if (sub == tune) rc = cmd_tune(*run, ctx.ctx, cfg, o);
    else if (sub == couple) rc = cmd_couple(*run, ctx.ctx, cfg, o);
    else if (sub == layout) rc = cmd_layout(*run, ctx.ctx);
    else if (sub == patch) rc = cmd_patch(*run, ctx.ctx, cfg, o);
    else if (sub == audit) rc = cmd_audit(*run, ctx.ctx, o);
    else if (sub == shield) rc = cmd_shield(*run, ctx.ctx, cfg, o);
    else if (sub == plot) rc = cmd_plot(*run, o);
    run->finish(rc, rc == kVerdict ? "verdict failed" : "");
    std::cout << run->dir().string() << "\n";
    return rc;
  } catch (const CliError& e) {
    std::cerr << "phononet " << command << ": " << e.message << "\n";
    if (run) run->finish(e.code, e.message);
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "phononet " << command << ": " << e.what() << "\n";
    if (run) run->finish(kInternal, e.what());
    return kInternal;
  }
}
