#pragma once

// Run configuration: "key = value" files, overrides, the config hash and the
// calibrated-chain file format.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "baker/chain.hpp"
#include "baker/dynamics.hpp"
#include "baker/product.hpp"
#include "baker/render.hpp"

namespace baker {

struct RunConfig {
  // construction parameters
  double rho = 0.95;
  double margin = 0.02;
  double delta = 1.0;
  int p_max = kDefaultPMax;
  std::array<double, 3> angle_ratios = kDefaultAngleRatios;
  double theta_tol = kDefaultThetaTol;

  // product evaluator; theta_guard = theta_guard_fraction * theta0
  ProductOptions product;
  double theta_guard_fraction = 0.25;

  // chain and calibration
  ChainSettings chain;
  CalibrationSettings calibration;
  /// Calibrated chain to load instead of calibrating; empty = calibrate.
  std::string chain_file;

  // dynamics
  std::uint64_t rng_seed = 20240601;
  int invariance_samples = 10000;
  /// r_test_max = factor * r1
  double r_test_max_factor = 1e3;
  /// Seed point: "spine:F" (spine point at F * r1) or "x,y".
  std::string orbit_seed = "spine:3";
  int orbit_steps = 20;
  int orbit_count = 100;
  ClassifyLimits limits;
  /// escape_radius = factor * r1, full_chain_radius = factor * r1
  double escape_radius_factor = 1e3;
  double full_chain_radius_factor = 10.0;

  // render
  /// "spine:F" or "x,y"
  std::string render_center = "spine:5.5";
  /// "r1:F" (F * r1) or a plain length
  std::string render_width = "r1:9";
  std::string render_height = "r1:9";
  int nx = 512, ny = 512;
  int tiles = 64;
  int render_k_max = 12;
  double render_endpoint_tol = 1e-5;
  double render_endpoint_margin = -HUGE_VAL;

  // profile-h
  int h_points = 2001;

  std::string out_dir = "out";
  int threads = 0;
};

struct ConfigKey {
  std::string name;
  std::string doc;
  /// Part of the config hash (the key changes the calibrated chain).
  bool chain = false;
};

/// Every accepted key, in file order.
const std::vector<ConfigKey>& config_keys();

/// Set one key from its textual value; throws ConfigError.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
/// Canonical text of a key's current value.
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// Applies "key = value" lines ("#" starts a comment).  Errors name the
/// source and line number.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);
void apply_config_file(RunConfig& cfg, const std::string& path);
/// "key=value"
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Checks ranges and cross-field constraints; throws ConfigError.
void validate(const RunConfig& cfg);

/// Every key with its canonical value, one per line.
std::string dump_config(const RunConfig& cfg);

/// FNV-1a 64 over the canonical values of the chain keys, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Derived pipeline inputs.
ConstructionParams make_construction_params(const RunConfig& cfg);
ProductOptions make_product_options(const RunConfig& cfg, const ConstructionParams& params);

/// Calibrated chain state, everything needed to rebuild Chain and bounds.
struct ChainRecord {
  std::string config_hash;
  double t0 = 0.0;
  int n = 0;
  LogComplex a;
  double a_err_lnmod = 0.0;
  CalibratedBounds bounds;
};

std::string serialize_chain(const ChainRecord& rec);
/// Throws ConfigError on malformed text or when the embedded hash differs
/// from expected_hash.
ChainRecord parse_chain(const std::string& text, const std::string& expected_hash, const std::string& source);

/// Center and size of the render window given r1 and the base chain.
GridSpec make_grid(const RunConfig& cfg, const Chain& chain, const CalibratedBounds& bounds);
cplx resolve_point(const std::string& spec, const Chain& chain, const CalibratedBounds& bounds);
ClassifyLimits make_limits(const RunConfig& cfg, const CalibratedBounds& bounds, int k_max);

/// Reads a whole file; throws IoError.
std::string read_file(const std::string& path);

}  // namespace baker
