// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "cli/verify.h"
#include "sactc/decode.h"
#include "sactc/loss.h"
#include "sactc/metrics.h"
#include "sactc/serialize.h"
#include "sactc/toylab.h"

namespace {

using namespace sactc;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool passed, const std::string& detail) {
  std::printf("%s %d %s\n", passed ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!passed) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

const cli::CheckResult* find(const cli::VerifyReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void oracle_equivalence() {
  const auto start = Clock::now();
  const cli::VerifyReport r = cli::run_oracle_suite(200, 1);
  const double elapsed = seconds_since(start);
  const auto* ctc = find(r, "oracle.ctc_loss");
  const auto* sactc = find(r, "oracle.sactc_loss");
  const bool ok = ctc && sactc && ctc->passed && sactc->passed && elapsed <= 60.0;
  report(1, ok,
         fmt("oracle equivalence, 200 instances: ctc max |dp-brute| %.2e, sactc (lambda 0/5/15) "
             "%.2e, %.1f s",
             ctc ? ctc->max_error : NAN, sactc ? sactc->max_error : NAN, elapsed));
}

void degeneration() {
  std::mt19937_64 rng(2);
  const cli::InstanceLimits limits;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const cli::Instance inst = cli::random_two_speaker_instance(rng, limits);
    const double ctc = ctc_loss(inst.logits, inst.label.tokens, 0).loss;
    const double flat =
        sactc_loss(inst.logits, inst.label, make_risk_spec(inst.label, 0.0), 0).loss;
    worst = std::max(worst, std::abs(flat - ctc - std::numbers::ln2));
  }
  report(2, worst <= 1e-9,
         fmt("sactc(lambda=0) - ctc = log 2 on 100 instances: max deviation %.2e", worst));
}

void gradients() {
  const cli::VerifyReport r = cli::run_grad_suite(50, 3);
  const auto* ctc = find(r, "grad.ctc_vs_finite_diff");
  const auto* sactc = find(r, "grad.sactc_vs_finite_diff");
  const auto* rows = find(r, "grad.row_sums");
  const bool ok = ctc && sactc && rows && r.passed();
  report(3, ok,
         fmt("finite differences, 50 instances: ctc rel err %.2e, sactc rel err %.2e, "
             "row sums %.2e",
             ctc ? ctc->max_error : NAN, sactc ? sactc->max_error : NAN,
             rows ? rows->max_error : NAN));
}

void invariants() {
  const cli::VerifyReport r = cli::run_invariant_suite(200, 4);
  const auto* time = find(r, "invariants.time_invariance");
  const auto* part = find(r, "invariants.end_frame_partition");
  report(4, time && part && r.passed(),
         fmt("lattice invariants, 200 instances: time spread %.2e, end-frame partition %.2e",
             time ? time->max_error : NAN, part ? part->max_error : NAN));
}

void collapse_checks() {
  const bool printed = collapse(TokenSeq{0, 1, 0, 1, 1, 2, 2}, 0) == TokenSeq{1, 1, 2};
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> len(0, 8);
  std::uniform_int_distribution<TokenId> tok(1, 4);
  std::uniform_int_distribution<int> reps(1, 3);
  std::bernoulli_distribution coin(0.5);
  int passed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    TokenSeq labels(len(rng));
    for (auto& x : labels) x = tok(rng);
    TokenSeq path;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if ((i > 0 && labels[i] == labels[i - 1]) || coin(rng)) path.insert(path.end(), reps(rng), 0);
      path.insert(path.end(), reps(rng), labels[i]);
    }
    if (coin(rng)) path.insert(path.end(), reps(rng), 0);
    passed += collapse(path, 0) == labels;
  }
  report(5, printed && passed == 1000,
         std::string("collapse: (0,a,0,a,a,b,b) -> (a,a,b) ") + (printed ? "ok" : "WRONG") +
             ", round trips " + std::to_string(passed) + "/1000");
}

void metric_checks() {
  const std::vector<metrics::Words> refs = {{"a", "b"}, {"c"}};
  const std::vector<metrics::Words> swapped = {{"c"}, {"a", "b"}};
  const std::size_t pi_errors = metrics::pi_wer(refs, swapped).errors;
  const bool bins = metrics::bin_overlap(0.2) == metrics::OverlapBin::kLow &&
                    metrics::bin_overlap(0.5) == metrics::OverlapBin::kMid;
  const double oa = metrics::oa_wer({{metrics::OverlapBin::kLow, 6.0},
                                     {metrics::OverlapBin::kMid, 8.4},
                                     {metrics::OverlapBin::kHigh, 12.8}});
  const bool ok = pi_errors == 0 && bins && std::abs(oa - 9.1) <= 0.05;
  report(6, ok,
         fmt("metrics: swapped PI-WER errors %.0f, OA-WER(6.0, 8.4, 12.8) = %.4f",
             static_cast<double>(pi_errors), oa) +
             (bins ? ", 0.2->low and 0.5->mid" : ", bin boundaries WRONG"));
}

void toy_experiment() {
  std::ifstream in(SACTC_TOY_CONFIG);
  std::stringstream text;
  text << in.rdbuf();
  const auto start = Clock::now();
  const toylab::ExperimentConfig cfg = toylab::parse_experiment_config(text.str());
  const std::vector<toylab::RunResult> results = toylab::run_experiment(cfg);
  const double elapsed = seconds_since(start);

  std::map<std::pair<LossMode, double>, std::pair<double, int>> mean;
  for (const auto& r : results) {
    auto& m = mean[{r.run.mode, r.run.lambda}];
    m.first += r.compliance;
    ++m.second;
  }
  const auto ctc = mean.find({LossMode::kCtc, 0.0});
  const auto sactc = mean.find({LossMode::kSactc, 15.0});
  if (ctc == mean.end() || sactc == mean.end() || cfg.seeds.size() < 5) {
    report(7, false, "bundled toy config must run ctc/0 and sactc/15 over at least 5 seeds");
    return;
  }
  const double c0 = ctc->second.first / ctc->second.second;
  const double c15 = sactc->second.first / sactc->second.second;
  report(7, c15 - c0 >= 0.10 && elapsed <= 300.0,
         fmt("toy disentanglement over 5 seeds: held-out compliance ctc %.3f, sactc(15) %.3f, "
             "margin %.3f",
             c0, c15, c15 - c0) +
             fmt(", %.1f s", elapsed));
}

void not_reproduced_statement() {
  std::ifstream in(SACTC_README);
  std::stringstream text;
  text << in.rdbuf();
  const bool stated = text.str().find("## Not reproduced") != std::string::npos;
  report(8, stated,
         "full-scale WER tables are out of reach at desk scale; README states this under "
         "'Not reproduced'");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {
      oracle_equivalence, degeneration, gradients,  invariants,
      collapse_checks,    metric_checks, toy_experiment, not_reproduced_statement};
  for (const auto& run : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      std::printf("FAIL (exception) %s\n", e.what());
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}
