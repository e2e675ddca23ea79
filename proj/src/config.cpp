#include "baker/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "baker/errors.hpp"
#include "baker/io.hpp"

namespace baker {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || std::isnan(x))
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  return x;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  Int x{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& v) {
  std::array<double, 3> out{};
  std::stringstream ss(v);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw ConfigError(key + ": expected three comma-separated reals");
    out[static_cast<std::size_t>(i++)] = parse_double(key, item);
  }
  if (i != 3) throw ConfigError(key + ": expected three comma-separated reals");
  return out;
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Ref>
Entry real_key(const char* name, const char* doc, bool chain, Ref ref) {
  return {{name, doc, chain},
          [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_double(name, v); },
          [ref](const RunConfig& c) { return format_real(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
Entry int_key(const char* name, const char* doc, bool chain, Ref ref) {
  return {{name, doc, chain},
          [ref, name](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(ref(c))>;
            ref(c) = parse_int<T>(name, v);
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
Entry text_key(const char* name, const char* doc, bool chain, Ref ref) {
  return {{name, doc, chain},
          [ref](RunConfig& c, const std::string& v) { ref(c) = trim(v); },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    // construction parameters
    t.push_back(real_key("rho", "order of the canonical product, in (1/2, 1)", true,
                         [](RunConfig& c) -> double& { return c.rho; }));
    t.push_back(real_key("margin", "required mu - 1/2 when choosing p", true,
                         [](RunConfig& c) -> double& { return c.margin; }));
    t.push_back(real_key("delta", "zero density: n(r) ~ delta r^rho", true,
                         [](RunConfig& c) -> double& { return c.delta; }));
    t.push_back(int_key("p_max", "largest p tried", true, [](RunConfig& c) -> int& { return c.p_max; }));
    t.push_back({{"angle_ratios", "theta1, theta2, theta3 as fractions of theta0", true},
                 [](RunConfig& c, const std::string& v) { c.angle_ratios = parse_triple("angle_ratios", v); },
                 [](const RunConfig& c) {
                   return format_real(c.angle_ratios[0]) + ", " + format_real(c.angle_ratios[1]) + ", " +
                          format_real(c.angle_ratios[2]);
                 }});
    t.push_back(real_key("theta_tol", "bisection tolerance for theta0 (radians)", true,
                         [](RunConfig& c) -> double& { return c.theta_tol; }));
    // product
    t.push_back(int_key("k_direct", "largest zero count multiplied out directly", true,
                        [](RunConfig& c) -> std::int64_t& { return c.product.k_direct; }));
    t.push_back(real_key("window", "near-zone factor kappa", true,
                         [](RunConfig& c) -> double& { return c.product.window; }));
    t.push_back(real_key("r_asym", "radius beyond which the asymptotic product is used", true,
                         [](RunConfig& c) -> double& { return c.product.r_asym; }));
    t.push_back(int_key("product_quad_nodes", "Gauss-Legendre nodes per far-field panel", true,
                        [](RunConfig& c) -> int& { return c.product.quad_nodes; }));
    t.push_back(real_key("theta_guard_fraction", "bound-only half-width around the spiral, in units of theta0",
                         true, [](RunConfig& c) -> double& { return c.theta_guard_fraction; }));
    t.push_back(real_key("cache_radius", "reciprocal zeros cached up to window * cache_radius", true,
                         [](RunConfig& c) -> double& { return c.product.cache_radius; }));
    t.push_back(int_key("k_em", "zeros below this index are always multiplied out", true,
                        [](RunConfig& c) -> std::int64_t& { return c.product.k_em; }));
    // chain
    t.push_back(int_key("n_start", "first power n tried", true, [](RunConfig& c) -> int& { return c.chain.n_start; }));
    t.push_back(int_key("n_max", "last power n tried", true, [](RunConfig& c) -> int& { return c.chain.n_max; }));
    t.push_back(real_key("t_scan_max", "end of the t0 scan", true,
                         [](RunConfig& c) -> double& { return c.chain.t_scan_max; }));
    t.push_back(int_key("t_grid", "points of the t0 scan", true, [](RunConfig& c) -> int& { return c.chain.t_grid; }));
    t.push_back(real_key("quad_tol", "relative tolerance of the chain quadratures", true,
                         [](RunConfig& c) -> double& { return c.chain.quad_tol; }));
    t.push_back(int_key("quad_nodes", "Gauss-Legendre nodes per chain panel", true,
                        [](RunConfig& c) -> int& { return c.chain.quad_nodes; }));
    t.push_back(real_key("cert_ratio", "required |a| / error of a", true,
                         [](RunConfig& c) -> double& { return c.chain.cert_ratio; }));
    t.push_back(real_key("drop_log", "log drop below the peak where the sigma integral stops", true,
                         [](RunConfig& c) -> double& { return c.chain.drop_log; }));
    t.push_back(real_key("valley_fraction", "offset of the outward tail path within the h < 0 window", true,
                         [](RunConfig& c) -> double& { return c.chain.valley_fraction; }));
    t.push_back(real_key("r_segment", "|zeta^q| up to which g2 integrates the segment from 0", true,
                         [](RunConfig& c) -> double& { return c.chain.r_segment; }));
    t.push_back(real_key("r_endpoint", "|w| beyond which the endpoint expansion may be used", true,
                         [](RunConfig& c) -> double& { return c.chain.r_endpoint; }));
    t.push_back(real_key("endpoint_tol", "accepted endpoint error relative to max(|g2|, |a|)", true,
                         [](RunConfig& c) -> double& { return c.chain.endpoint_tol; }));
    t.push_back(real_key("endpoint_margin", "required log|integrand * w| - log|a| for the endpoint", true,
                         [](RunConfig& c) -> double& { return c.chain.endpoint_margin; }));
    // calibration
    t.push_back(int_key("fit_samples", "samples per decay fit", true,
                        [](RunConfig& c) -> int& { return c.calibration.fit_samples; }));
    t.push_back(real_key("safety", "factor applied to every fitted decay rate", true,
                         [](RunConfig& c) -> double& { return c.calibration.safety; }));
    t.push_back(real_key("fit_start_dev", "relative f deviation that starts the fitted decade", true,
                         [](RunConfig& c) -> double& { return c.calibration.fit_start_dev; }));
    t.push_back(real_key("eta1_r_lo", "start of the eta1 fit", true,
                         [](RunConfig& c) -> double& { return c.calibration.eta1_r_lo; }));
    t.push_back(real_key("eta1_r_hi", "end of the eta1 fit", true,
                         [](RunConfig& c) -> double& { return c.calibration.eta1_r_hi; }));
    t.push_back(int_key("r0_theta_points", "theta samples per radius in the r0 search", true,
                        [](RunConfig& c) -> int& { return c.calibration.r0_theta_points; }));
    t.push_back(real_key("r0_start", "first radius of the r0 search", true,
                         [](RunConfig& c) -> double& { return c.calibration.r0_start; }));
    t.push_back(real_key("r0_factor", "radius ratio between r0 candidates", true,
                         [](RunConfig& c) -> double& { return c.calibration.r0_factor; }));
    t.push_back(text_key("chain_file", "calibrated chain to load (empty: calibrate)", false,
                         [](RunConfig& c) -> std::string& { return c.chain_file; }));
    // dynamics
    t.push_back(int_key("rng_seed", "seed of every random sample", false,
                        [](RunConfig& c) -> std::uint64_t& { return c.rng_seed; }));
    t.push_back(int_key("invariance_samples", "points of U checked by invariance", false,
                        [](RunConfig& c) -> int& { return c.invariance_samples; }));
    t.push_back(real_key("r_test_max_factor", "invariance samples up to this multiple of r1", false,
                         [](RunConfig& c) -> double& { return c.r_test_max_factor; }));
    t.push_back(text_key("orbit_seed", "orbit seed: spine:F (F * r1 on the spine) or x,y", false,
                         [](RunConfig& c) -> std::string& { return c.orbit_seed; }));
    t.push_back(int_key("orbit_steps", "Newton steps per orbit", false,
                        [](RunConfig& c) -> int& { return c.orbit_steps; }));
    t.push_back(int_key("orbit_count", "orbits from random points of U checked by invariance", false,
                        [](RunConfig& c) -> int& { return c.orbit_count; }));
    t.push_back(int_key("k_max", "classification step limit outside render", false,
                        [](RunConfig& c) -> int& { return c.limits.k_max; }));
    t.push_back(real_key("escape_radius_factor", "escape radius in units of r1", false,
                         [](RunConfig& c) -> double& { return c.escape_radius_factor; }));
    t.push_back(real_key("full_chain_radius_factor", "no full-chain steps beyond this multiple of r1", false,
                         [](RunConfig& c) -> double& { return c.full_chain_radius_factor; }));
    t.push_back(real_key("fixpoint_tol", "relative step marking a fixed point", false,
                         [](RunConfig& c) -> double& { return c.limits.fixpoint_tol; }));
    t.push_back(real_key("f_tol", "|f| bound at a fixed point, relative to max(1, |z|^(1/q))", false,
                         [](RunConfig& c) -> double& { return c.limits.f_tol; }));
    t.push_back(real_key("root_zone", "log|g2/a| below which multiple roots are probed", false,
                         [](RunConfig& c) -> double& { return c.limits.root_zone; }));
    t.push_back(real_key("root_reach", "probe only when m |step| < root_reach |z|", false,
                         [](RunConfig& c) -> double& { return c.limits.root_reach; }));
    t.push_back(real_key("root_agree", "allowed drift of the predicted root, in units of m |step|", false,
                         [](RunConfig& c) -> double& { return c.limits.root_agree; }));
    t.push_back(int_key("max_probes", "multiple-root probes per orbit", false,
                        [](RunConfig& c) -> int& { return c.limits.max_probes; }));
    t.push_back(int_key("refine_steps", "modified Newton steps per probe", false,
                        [](RunConfig& c) -> int& { return c.limits.refine_steps; }));
    // render
    t.push_back(text_key("render_center", "image center: spine:F or x,y", false,
                         [](RunConfig& c) -> std::string& { return c.render_center; }));
    t.push_back(text_key("render_width", "image width: r1:F or a length", false,
                         [](RunConfig& c) -> std::string& { return c.render_width; }));
    t.push_back(text_key("render_height", "image height: r1:F or a length", false,
                         [](RunConfig& c) -> std::string& { return c.render_height; }));
    t.push_back(int_key("nx", "image columns", false, [](RunConfig& c) -> int& { return c.nx; }));
    t.push_back(int_key("ny", "image rows", false, [](RunConfig& c) -> int& { return c.ny; }));
    t.push_back(int_key("tiles", "render tiles", false, [](RunConfig& c) -> int& { return c.tiles; }));
    t.push_back(int_key("render_k_max", "classification step limit of the render", false,
                        [](RunConfig& c) -> int& { return c.render_k_max; }));
    t.push_back(real_key("render_endpoint_tol", "endpoint_tol used by the render", false,
                         [](RunConfig& c) -> double& { return c.render_endpoint_tol; }));
    t.push_back(real_key("render_endpoint_margin", "endpoint_margin used by the render", false,
                         [](RunConfig& c) -> double& { return c.render_endpoint_margin; }));
    t.push_back(int_key("h_points", "theta samples of profile-h", false, [](RunConfig& c) -> int& { return c.h_points; }));
    t.push_back(text_key("out_dir", "output directory", false, [](RunConfig& c) -> std::string& { return c.out_dir; }));
    t.push_back(int_key("threads", "worker threads (0 = hardware concurrency)", false,
                        [](RunConfig& c) -> int& { return c.threads; }));
    return t;
  }();
  return table;
}

const Entry& find_entry(const std::string& key) {
  static const std::map<std::string, const Entry*> index = [] {
    std::map<std::string, const Entry*> m;
    for (const Entry& e : entries()) m[e.key.name] = &e;
    return m;
  }();
  const auto it = index.find(key);
  if (it == index.end()) throw ConfigError("unknown key '" + key + "'");
  return *it->second;
}

double parse_length(const std::string& spec, double r1) {
  const std::string s = trim(spec);
  if (s.rfind("r1:", 0) == 0) return parse_double("length", s.substr(3)) * r1;
  return parse_double("length", s);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Entry& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_entry(key).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return find_entry(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_config_value(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  apply_config_text(cfg, text, path);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set " + assignment + ": expected key=value");
  try {
    set_config_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("--set: ") + e.what());
  }
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.rho > 0.5 && c.rho < 1.0, "rho must lie in (1/2, 1)");
  require(c.margin >= 0.0, "margin must be >= 0");
  require(c.delta > 0.0, "delta must be > 0");
  require(c.p_max >= 24, "p_max must be >= 24");
  require(c.angle_ratios[0] < 1.0 && c.angle_ratios[0] > c.angle_ratios[1] && c.angle_ratios[1] > c.angle_ratios[2] &&
              c.angle_ratios[2] > 0.0,
          "angle_ratios must be strictly decreasing in (0, 1)");
  require(c.theta_tol > 0.0, "theta_tol must be > 0");
  require(c.product.k_direct >= 1, "k_direct must be >= 1");
  require(c.product.window > 1.0, "window must exceed 1");
  require(c.product.r_asym > 0.0, "r_asym must be > 0");
  require(c.product.quad_nodes >= 2 && c.product.quad_nodes <= 64, "product_quad_nodes must lie in [2, 64]");
  require(c.theta_guard_fraction >= 0.0 && c.theta_guard_fraction < 1.0, "theta_guard_fraction must lie in [0, 1)");
  require(c.chain.n_start >= 1 && c.chain.n_max >= c.chain.n_start, "need 1 <= n_start <= n_max");
  require(c.chain.t_scan_max > 1.0, "t_scan_max must exceed 1");
  require(c.chain.t_grid >= 16, "t_grid must be >= 16");
  require(c.chain.quad_tol > 0.0 && c.chain.quad_tol < 1.0, "quad_tol must lie in (0, 1)");
  require(c.chain.quad_nodes >= 2 && c.chain.quad_nodes <= 64, "quad_nodes must lie in [2, 64]");
  require(c.chain.cert_ratio > 1.0, "cert_ratio must exceed 1");
  require(c.calibration.fit_samples >= 4, "fit_samples must be >= 4");
  require(c.calibration.safety > 0.0 && c.calibration.safety <= 1.0, "safety must lie in (0, 1]");
  require(c.invariance_samples >= 1, "invariance_samples must be >= 1");
  require(c.r_test_max_factor > 1.0, "r_test_max_factor must exceed 1");
  require(c.orbit_steps >= 1 && c.orbit_count >= 0, "orbit_steps must be >= 1 and orbit_count >= 0");
  require(c.limits.k_max >= 1 && c.render_k_max >= 1, "k_max and render_k_max must be >= 1");
  require(c.escape_radius_factor > 1.0, "escape_radius_factor must exceed 1");
  require(c.full_chain_radius_factor > 0.0, "full_chain_radius_factor must be > 0");
  require(c.limits.fixpoint_tol > 0.0 && c.limits.f_tol > 0.0, "fixpoint_tol and f_tol must be > 0");
  require(c.nx >= 1 && c.ny >= 1, "nx and ny must be >= 1");
  require(c.tiles >= 1, "tiles must be >= 1");
  require(c.render_endpoint_tol > 0.0, "render_endpoint_tol must be > 0");
  require(c.h_points >= 3, "h_points must be >= 3");
  require(!c.out_dir.empty(), "out_dir must not be empty");
  require(c.threads >= 0, "threads must be >= 0");
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : entries()) out += e.key.name + " = " + e.get(cfg) + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Entry& e : entries()) {
    if (!e.key.chain) continue;
    for (unsigned char ch : e.key.name + "=" + e.get(cfg) + "\n") {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ConstructionParams make_construction_params(const RunConfig& cfg) {
  return derive_params(cfg.rho, cfg.margin, cfg.delta, cfg.p_max, cfg.angle_ratios, cfg.theta_tol);
}

ProductOptions make_product_options(const RunConfig& cfg, const ConstructionParams& params) {
  ProductOptions o = cfg.product;
  o.theta_guard = cfg.theta_guard_fraction * params.theta0;
  return o;
}

namespace {

void put(std::string& out, const std::string& key, double x) { out += key + " = " + format_real(x) + "\n"; }

const std::array<FitRecord CalibratedBounds::*, 6> kFits{&CalibratedBounds::fit1, &CalibratedBounds::fit2,
                                                         &CalibratedBounds::fit3, &CalibratedBounds::fit4,
                                                         &CalibratedBounds::fit5, &CalibratedBounds::fit6};
const std::array<double CalibratedBounds::*, 6> kEtas{&CalibratedBounds::eta1, &CalibratedBounds::eta2,
                                                      &CalibratedBounds::eta3, &CalibratedBounds::eta4,
                                                      &CalibratedBounds::eta5, &CalibratedBounds::eta6};

struct RadiusField {
  const char* name;
  double CalibratedBounds::*field;
};
const std::array<RadiusField, 8> kRadii{{{"r0", &CalibratedBounds::r0},
                                         {"r1", &CalibratedBounds::r1},
                                         {"r_fit", &CalibratedBounds::r_fit},
                                         {"r_fit_hi", &CalibratedBounds::r_fit_hi},
                                         {"r_g2_cut", &CalibratedBounds::r_g2_cut},
                                         {"r_f_cut", &CalibratedBounds::r_f_cut},
                                         {"r_newton", &CalibratedBounds::r_newton},
                                         {"r_band_lo", &CalibratedBounds::r_band_lo}}};

}  // namespace

std::string serialize_chain(const ChainRecord& rec) {
  std::string out = "# calibrated chain\n";
  out += "config_hash = " + rec.config_hash + "\n";
  put(out, "t0", rec.t0);
  out += "n = " + std::to_string(rec.n) + "\n";
  out += "a = " + lc_to_string(rec.a) + "\n";
  put(out, "a_err_lnmod", rec.a_err_lnmod);
  for (std::size_t i = 0; i < 6; ++i) put(out, "eta" + std::to_string(i + 1), rec.bounds.*kEtas[i]);
  for (const auto& r : kRadii) put(out, r.name, rec.bounds.*r.field);
  for (std::size_t i = 0; i < 6; ++i) {
    const FitRecord& f = rec.bounds.*kFits[i];
    const std::string pre = "fit" + std::to_string(i + 1) + ".";
    out += pre + "name = " + f.name + "\n";
    put(out, pre + "slope", f.slope);
    put(out, pre + "intercept", f.intercept);
    put(out, pre + "rms", f.rms);
    put(out, pre + "eta", f.eta);
    put(out, pre + "valid_from", f.valid_from);
    put(out, pre + "r_lo", f.r_lo);
    put(out, pre + "r_hi", f.r_hi);
    out += pre + "samples = " + std::to_string(f.samples) + "\n";
  }
  return out;
}

ChainRecord parse_chain(const std::string& text, const std::string& expected_hash, const std::string& source) {
  std::map<std::string, std::pair<std::string, int>> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!kv.emplace(key, std::make_pair(trim(line.substr(eq + 1)), lineno)).second)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  std::map<std::string, bool> used;
  auto take = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(source + ": missing key '" + key + "'");
    used[key] = true;
    return it->second.first;
  };
  auto real = [&](const std::string& key) {
    const std::string& v = take(key);
    try {
      return parse_double(key, v);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(kv[key].second) + ": " + e.what());
    }
  };
  auto integer = [&](const std::string& key) {
    const std::string& v = take(key);
    try {
      return parse_int<int>(key, v);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(kv[key].second) + ": " + e.what());
    }
  };

  ChainRecord rec;
  rec.config_hash = take("config_hash");
  if (rec.config_hash != expected_hash)
    throw ConfigError(source + ": chain was calibrated for config " + rec.config_hash + ", current config is " +
                      expected_hash);
  rec.t0 = real("t0");
  rec.n = integer("n");
  try {
    rec.a = lc_parse(take("a"));
  } catch (const Error& e) {
    throw ConfigError(source + ":" + std::to_string(kv["a"].second) + ": a: " + e.what());
  }
  rec.a_err_lnmod = real("a_err_lnmod");
  for (std::size_t i = 0; i < 6; ++i) rec.bounds.*kEtas[i] = real("eta" + std::to_string(i + 1));
  for (const auto& r : kRadii) rec.bounds.*r.field = real(r.name);
  for (std::size_t i = 0; i < 6; ++i) {
    FitRecord& f = rec.bounds.*kFits[i];
    const std::string pre = "fit" + std::to_string(i + 1) + ".";
    f.name = take(pre + "name");
    f.slope = real(pre + "slope");
    f.intercept = real(pre + "intercept");
    f.rms = real(pre + "rms");
    f.eta = real(pre + "eta");
    f.valid_from = real(pre + "valid_from");
    f.r_lo = real(pre + "r_lo");
    f.r_hi = real(pre + "r_hi");
    f.samples = integer(pre + "samples");
  }
  for (const auto& [key, val] : kv) {
    if (!used.count(key))
      throw ConfigError(source + ":" + std::to_string(val.second) + ": unknown key '" + key + "'");
  }
  if (rec.n < 1) throw ConfigError(source + ": n must be >= 1");
  return rec;
}

cplx resolve_point(const std::string& spec, const Chain& chain, const CalibratedBounds& bounds) {
  const std::string s = trim(spec);
  if (s.rfind("spine:", 0) == 0) {
    const double f = parse_double("spine", s.substr(6));
    if (!(f > 0.0)) throw ConfigError("spine:F needs F > 0");
    return spine_point(chain, f * bounds.r1);
  }
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("point '" + spec + "': expected spine:F or x,y");
  return {parse_double("x", s.substr(0, comma)), parse_double("y", s.substr(comma + 1))};
}

ClassifyLimits make_limits(const RunConfig& cfg, const CalibratedBounds& bounds, int k_max) {
  ClassifyLimits lim = cfg.limits;
  lim.k_max = k_max;
  lim.escape_radius = cfg.escape_radius_factor * bounds.r1;
  lim.full_chain_radius = cfg.full_chain_radius_factor * bounds.r1;
  return lim;
}

GridSpec make_grid(const RunConfig& cfg, const Chain& chain, const CalibratedBounds& bounds) {
  GridSpec g;
  g.center = resolve_point(cfg.render_center, chain, bounds);
  g.width = parse_length(cfg.render_width, bounds.r1);
  g.height = parse_length(cfg.render_height, bounds.r1);
  if (!(g.width > 0.0 && g.height > 0.0)) throw ConfigError("render_width and render_height must be > 0");
  g.nx = cfg.nx;
  g.ny = cfg.ny;
  g.limits = make_limits(cfg, bounds, cfg.render_k_max);
  return g;
}

}  // namespace baker
