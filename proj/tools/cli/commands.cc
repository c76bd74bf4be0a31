#include "cli/commands.h"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cli/logit_file.h"
#include "cli/verify.h"
#include "sactc/decode.h"
#include "sactc/loss.h"
#include "sactc/metrics.h"
#include "sactc/serialize.h"
#include "sactc/toylab.h"

namespace sactc::cli {
namespace {

using nlohmann::json;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json report_json(const VerifyReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"trials", c.trials},
                      {"max_error", c.max_error},
                      {"threshold", c.threshold},
                      {"passed", c.passed}});
  }
  return checks;
}

std::vector<metrics::Words> words_list(const json& j) {
  return j.get<std::vector<metrics::Words>>();
}

// id -> record; either file may carry refs, hyps and timings.
std::map<std::string, json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::map<std::string, json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("id")) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": record needs an id");
    }
    const std::string id = row.at("id").get<std::string>();
    rows[id] = std::move(row);
  }
  return rows;
}

std::vector<metrics::MixtureRecord> join_records(const std::string& refs_path,
                                                 const std::string& hyps_path) {
  const auto refs = read_jsonl(refs_path);
  const auto hyps = read_jsonl(hyps_path);
  std::vector<metrics::MixtureRecord> records;
  for (const auto& [id, ref] : refs) {
    auto hit = hyps.find(id);
    if (hit == hyps.end()) throw InvalidArgument("no hypothesis for record '" + id + "'");
    try {
      metrics::MixtureRecord rec;
      rec.id = id;
      rec.refs = words_list(ref.at("refs"));
      rec.hyps = words_list(hit->second.contains("hyps") ? hit->second.at("hyps")
                                                          : ref.at("hyps"));
      const json& timings = ref.contains("timings") ? ref.at("timings")
                                                    : hit->second.at("timings");
      for (const json& t : timings) {
        const double duration = t.at("duration").get<double>();
        if (!(duration > 0.0)) throw InvalidArgument("record '" + id + "': duration <= 0");
        rec.timings.push_back({t.at("start").get<double>(), duration});
      }
      if (rec.timings.empty()) throw InvalidArgument("record '" + id + "' has no timings");
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw InvalidArgument("record '" + id + "': " + e.what());
    }
  }
  for (const auto& [id, hyp] : hyps) {
    if (!refs.count(id)) throw InvalidArgument("hypothesis '" + id + "' has no reference");
  }
  return records;
}

json bin_json(const metrics::BinScore& s) {
  return {{"mixtures", s.mixtures}, {"errors", s.errors}, {"ref_words", s.ref_words},
          {"wer", s.wer()}};
}

}  // namespace

int cmd_loss(const LossOptions& opts, std::ostream& out, std::ostream& err) {
  LabelFile labels;
  LogitGrid logits;
  LossMode mode;
  try {
    if (opts.mode == "ctc") {
      mode = LossMode::kCtc;
    } else if (opts.mode == "sactc") {
      mode = LossMode::kSactc;
    } else {
      throw InvalidArgument("--mode must be ctc or sactc");
    }
    labels = parse_label_file(read_text(opts.labels_path));
    logits = read_logit_file(opts.logits_path);
    if (opts.blank_id && *opts.blank_id != labels.blank_id) {
      throw InvalidArgument("--blank-id disagrees with the label file");
    }
    if (opts.sc_id && *opts.sc_id != labels.sc_id) {
      throw InvalidArgument("--sc-id disagrees with the label file");
    }
    if (logits.vocab() != labels.vocab.size()) {
      throw InvalidArgument("logit vocab " + std::to_string(logits.vocab()) +
                            " != label vocab " + std::to_string(labels.vocab.size()));
    }
    if (!(opts.lambda >= 0.0)) throw InvalidArgument("--lambda must be >= 0");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  LossResult result;
  json doc = {{"format_version", kFormatVersion}, {"mode", opts.mode}};
  try {
    if (mode == LossMode::kCtc) {
      result = ctc_loss(logits, labels.label.tokens, labels.blank_id);
    } else {
      const RiskSpec spec = make_risk_spec(labels.label, opts.lambda);
      doc["lambda"] = opts.lambda;
      doc["boundary_b"] = spec.boundary_b;
      result = sactc_loss(logits, labels.label, spec, labels.blank_id);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  doc["feasible"] = result.feasible();
  doc["loss"] = result.loss;
  doc["per_token_losses"] = result.per_token_losses;
  out << std::setprecision(17) << doc.dump() << "\n";
  if (!result.feasible()) {
    err << "error: no alignment of " << labels.label.tokens.size() << " labels fits "
        << logits.frames() << " frames\n";
    return kExitInfeasible;
  }
  if (!opts.grad_out.empty()) {
    try {
      write_logit_file(opts.grad_out, result.grad);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kExitInputError;
    }
  }
  return kExitOk;
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  const std::string& suite = opts.suite;
  if (suite != "oracle" && suite != "grad" && suite != "invariants" && suite != "all") {
    err << "error: --suite must be oracle, grad, invariants or all\n";
    return kExitInputError;
  }
  if (opts.trials == 0) err << "warning: --trials 0 runs no checks\n";

  VerifyReport report;
  auto append = [&](const VerifyReport& part) {
    report.checks.insert(report.checks.end(), part.checks.begin(), part.checks.end());
  };
  try {
    if (suite == "oracle" || suite == "all") append(run_oracle_suite(opts.trials, opts.seed));
    if (suite == "grad" || suite == "all") {
      // Finite differences are costlier; a quarter of the trials suffices.
      append(run_grad_suite(suite == "all" ? (opts.trials + 3) / 4 : opts.trials, opts.seed + 1));
    }
    if (suite == "invariants" || suite == "all") {
      append(run_invariant_suite(opts.trials, opts.seed + 2));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  for (const auto& c : report.checks) {
    err << (c.passed ? "PASS " : "FAIL ") << c.name << " max_error=" << c.max_error
        << " threshold=" << c.threshold << "\n";
  }
  const json doc = {{"format_version", kFormatVersion},
                    {"suite", suite},
                    {"trials", opts.trials},
                    {"seed", opts.seed},
                    {"passed", report.passed()},
                    {"checks", report_json(report)}};
  out << doc.dump() << "\n";
  return report.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_decode(const DecodeOptions& opts, std::ostream& out, std::ostream& err) {
  LogitGrid logits;
  std::vector<std::string> vocab;
  TokenId blank = opts.blank_id;
  TokenId sc = opts.sc_id;
  try {
    logits = read_logit_file(opts.logits_path);
    if (!opts.labels_path.empty()) {
      const LabelFile labels = parse_label_file(read_text(opts.labels_path));
      vocab = labels.vocab;
      blank = labels.blank_id;
      sc = labels.sc_id;
      if (vocab.size() != logits.vocab()) throw InvalidArgument("vocab size mismatch");
    }
    if (blank < 0 || static_cast<std::size_t>(blank) >= logits.vocab()) {
      throw InvalidArgument("--blank-id outside the logit vocabulary");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  const Hypothesis hyp = greedy_decode(softmax_log(logits), blank);
  json doc = {{"format_version", kFormatVersion},
              {"frames", logits.frames()},
              {"trace", hyp.trace},
              {"tokens", hyp.tokens},
              {"segments", split_by_sc(hyp.tokens, sc)}};
  if (!vocab.empty()) {
    json words = json::array();
    for (const auto& segment : split_by_sc(hyp.tokens, sc)) {
      json seg = json::array();
      for (TokenId id : segment) seg.push_back(vocab[static_cast<std::size_t>(id)]);
      words.push_back(std::move(seg));
    }
    doc["words"] = std::move(words);
  }
  out << doc.dump() << "\n";
  return kExitOk;
}

int cmd_score(const ScoreOptions& opts, std::ostream& out, std::ostream& err) {
  using metrics::OverlapBin;
  json doc = {{"format_version", kFormatVersion}};
  if (!opts.bin_wers.empty()) {
    if (opts.bin_wers.size() != 3) {
      err << "error: --bin-wers takes exactly three values (low, mid, high)\n";
      return kExitInputError;
    }
    const std::map<OverlapBin, double> bins = {{OverlapBin::kLow, opts.bin_wers[0]},
                                               {OverlapBin::kMid, opts.bin_wers[1]},
                                               {OverlapBin::kHigh, opts.bin_wers[2]}};
    doc["bins"] = {{"low", opts.bin_wers[0]}, {"mid", opts.bin_wers[1]},
                   {"high", opts.bin_wers[2]}};
    doc["oa_wer"] = metrics::oa_wer(bins);
    out << doc.dump() << "\n";
    return kExitOk;
  }

  metrics::ScoreReport report;
  try {
    report = metrics::score_mixtures(join_records(opts.refs_path, opts.hyps_path));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  json bins = json::object();
  for (const auto& [bin, score] : report.bins) {
    bins[std::string(metrics::bin_name(bin))] = bin_json(score);
  }
  doc["bins"] = std::move(bins);
  doc["pi_wer"] = bin_json(report.overall);
  doc["identity_wer"] = bin_json(report.identity);
  doc["oa_wer"] = report.oa_wer ? json(*report.oa_wer) : json(nullptr);
  out << doc.dump() << "\n";

  if (!opts.csv_out.empty()) {
    std::ofstream csv(opts.csv_out);
    if (!csv) {
      err << "error: cannot write '" << opts.csv_out << "'\n";
      return kExitInputError;
    }
    csv << "subset,mixtures,errors,ref_words,wer\n";
    for (const auto& [bin, s] : report.bins) {
      csv << metrics::bin_name(bin) << ',' << s.mixtures << ',' << s.errors << ','
          << s.ref_words << ',' << s.wer() << '\n';
    }
    const auto& o = report.overall;
    csv << "pi_wer," << o.mixtures << ',' << o.errors << ',' << o.ref_words << ',' << o.wer()
        << '\n';
    const auto& id = report.identity;
    csv << "identity_wer," << id.mixtures << ',' << id.errors << ',' << id.ref_words << ','
        << id.wer() << '\n';
    if (report.oa_wer) csv << "oa_wer,,,," << *report.oa_wer << '\n';
  }
  return kExitOk;
}

int cmd_toy(const ToyOptions& opts, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  toylab::ExperimentConfig config;
  try {
    config = toylab::parse_experiment_config(read_text(opts.config_path));
    fs::create_directories(opts.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  std::vector<toylab::RunResult> results;
  try {
    results = toylab::run_experiment(config);
  } catch (const toylab::TrainingDiverged& e) {
    err << "error: training diverged at step " << e.step() << ": " << e.what() << "\n";
    return kExitDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  const fs::path dir(opts.out_dir);
  std::ofstream curves(dir / "loss_curves.csv");
  std::ofstream stats(dir / "stats.csv");
  if (!curves || !stats) {
    err << "error: cannot write into '" << opts.out_dir << "'\n";
    return kExitInputError;
  }
  curves << std::setprecision(17) << "seed,mode,lambda,step,loss\n";
  stats << std::setprecision(17)
        << "seed,mode,lambda,compliance,center_of_mass_1,center_of_mass_2\n";

  struct Group {
    double sum = 0.0;
    std::size_t n = 0;
    std::map<std::string, std::pair<double, std::size_t>> bins;
  };
  std::map<std::pair<std::string, double>, Group> groups;
  for (const auto& r : results) {
    const std::string mode(toylab::mode_name(r.run.mode));
    for (std::size_t step = 0; step < r.loss_curve.size(); ++step) {
      curves << r.seed << ',' << mode << ',' << r.run.lambda << ',' << step << ','
             << r.loss_curve[step] << '\n';
    }
    stats << r.seed << ',' << mode << ',' << r.run.lambda << ',' << r.compliance << ','
          << r.center_of_mass[0] << ',' << r.center_of_mass[1] << '\n';
    Group& g = groups[{mode, r.run.lambda}];
    g.sum += r.compliance;
    ++g.n;
    for (const auto& [bin, c] : r.compliance_by_bin) {
      auto& acc = g.bins[std::string(metrics::bin_name(bin))];
      acc.first += c;
      ++acc.second;
    }
  }

  json runs = json::array();
  for (const auto& [key, g] : groups) {
    json by_bin = json::object();
    for (const auto& [bin, acc] : g.bins) by_bin[bin] = acc.first / static_cast<double>(acc.second);
    runs.push_back({{"mode", key.first},
                    {"lambda", key.second},
                    {"seeds", g.n},
                    {"mean_compliance", g.sum / static_cast<double>(g.n)},
                    {"compliance_by_overlap_bin", std::move(by_bin)}});
  }
  const json summary = {{"format_version", kFormatVersion},
                        {"seeds", config.seeds},
                        {"runs", std::move(runs)}};
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
  out << summary.dump() << "\n";
  return kExitOk;
}

}  // namespace sactc::cli
