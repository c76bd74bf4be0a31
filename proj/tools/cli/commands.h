#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sactc::cli {

inline constexpr int kFormatVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitInputError = 2,
  kExitInfeasible = 3,
  kExitDiverged = 4,
};

struct LossOptions {
  std::string logits_path;
  std::string labels_path;
  std::string mode = "ctc";
  double lambda = 15.0;
  std::optional<int> blank_id;
  std::optional<int> sc_id;
  std::string grad_out;
};

struct VerifyOptions {
  std::string suite = "all";
  std::size_t trials = 200;
  std::uint64_t seed = 0;
};

struct DecodeOptions {
  std::string logits_path;
  std::string labels_path;  // optional, supplies vocab strings
  int blank_id = 0;
  int sc_id = -1;
};

struct ScoreOptions {
  std::string refs_path;
  std::string hyps_path;
  std::string csv_out;
  std::vector<double> bin_wers;  // low, mid, high; bypasses the files
};

struct ToyOptions {
  std::string config_path;
  std::string out_dir;
};

// Each command writes machine-readable results to `out` and diagnostics to
// `err`, and returns an ExitCode.
int cmd_loss(const LossOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err);
int cmd_decode(const DecodeOptions& opts, std::ostream& out, std::ostream& err);
int cmd_score(const ScoreOptions& opts, std::ostream& out, std::ostream& err);
int cmd_toy(const ToyOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace sactc::cli
