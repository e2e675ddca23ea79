#pragma once

// Command-line driver: derive, profile-h, verify-product, calibrate,
// verify-asymptotics, invariance, orbit and render.

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "baker/config.hpp"

namespace baker {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

const std::vector<std::string>& subcommands();

struct CliRequest {
  std::string subcommand;
  std::string config_path;  // empty: defaults only
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

/// PASS / FAIL lines plus free text; written to stdout and <out>/<name>.txt.
class Report {
 public:
  void check(bool ok, const std::string& name, const std::string& detail);
  void info(const std::string& text);
  bool failed() const { return failed_; }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  bool failed_ = false;
};

/// Everything the subcommands share: parameters, evaluator, calibrated
/// chain and bounds.
struct Pipeline {
  RunConfig cfg;
  ConstructionParams params;
  std::shared_ptr<const ProductEvaluator> eval;
  std::unique_ptr<Chain> chain;
  CalibratedBounds bounds;
  /// Set when the chain was calibrated in this run.
  std::optional<ChainBuild> build;
  double build_seconds = 0.0;

  /// Chain with the render endpoint settings.
  Chain render_chain() const;
  ChainRecord record() const;
};

/// Parameters and evaluator only.
Pipeline make_base_pipeline(const RunConfig& cfg);
/// Calibrates, or loads cfg.chain_file (ConfigError on a hash mismatch).
Pipeline make_pipeline(const RunConfig& cfg);

/// Runs one subcommand; returns the exit code.  Usage and config errors
/// print to err and return kExitUsage.
int run(const CliRequest& req, std::ostream& out, std::ostream& err);

/// argv parsing (CLI11) followed by run().
int cli_main(int argc, char** argv);

}  // namespace baker
