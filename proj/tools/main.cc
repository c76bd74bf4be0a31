#include <iostream>

#include <CLI11.hpp>

#include "cli/commands.h"

int main(int argc, char** argv) {
  using namespace sactc::cli;
  CLI::App app{"Speaker-aware CTC losses, verification, decoding, scoring and toy experiments"};
  app.require_subcommand(1);

  LossOptions loss;
  auto* loss_cmd = app.add_subcommand("loss", "Evaluate a CTC or speaker-aware CTC loss");
  loss_cmd->add_option("--logits", loss.logits_path, "Logit file (SALM)")->required();
  loss_cmd->add_option("--labels", loss.labels_path, "JSON label file")->required();
  loss_cmd->add_option("--mode", loss.mode, "ctc or sactc")->check(CLI::IsMember({"ctc", "sactc"}));
  loss_cmd->add_option("--lambda", loss.lambda, "Risk factor");
  loss_cmd->add_option("--blank-id", loss.blank_id, "Blank token id");
  loss_cmd->add_option("--sc-id", loss.sc_id, "Speaker-change token id");
  loss_cmd->add_option("--grad-out", loss.grad_out, "Write d loss / d logits here");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run randomized correctness suites");
  verify_cmd->add_option("--suite", verify.suite, "oracle, grad, invariants or all");
  verify_cmd->add_option("--trials", verify.trials, "Randomized trials per suite");
  verify_cmd->add_option("--seed", verify.seed, "RNG seed");

  DecodeOptions decode;
  auto* decode_cmd = app.add_subcommand("decode", "Greedy best-path decoding");
  decode_cmd->add_option("--logits", decode.logits_path, "Logit file (SALM)")->required();
  decode_cmd->add_option("--labels", decode.labels_path, "JSON label file for vocab strings");
  decode_cmd->add_option("--blank-id", decode.blank_id, "Blank token id");
  decode_cmd->add_option("--sc-id", decode.sc_id, "Speaker-change token id");

  ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "WER, PI-WER and OA-WER per overlap bin");
  score_cmd->add_option("--refs", score.refs_path, "Reference JSON lines");
  score_cmd->add_option("--hyps", score.hyps_path, "Hypothesis JSON lines");
  score_cmd->add_option("--csv-out", score.csv_out, "Also write a CSV table");
  score_cmd->add_option("--bin-wers", score.bin_wers, "Low, mid, high WERs; prints OA-WER only")
      ->delimiter(',');

  ToyOptions toy;
  auto* toy_cmd = app.add_subcommand("toy", "Train and evaluate the toy disentanglement experiment");
  toy_cmd->add_option("--config", toy.config_path, "Experiment JSON")->required();
  toy_cmd->add_option("--out", toy.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  if (*loss_cmd) return cmd_loss(loss, std::cout, std::cerr);
  if (*verify_cmd) return cmd_verify(verify, std::cout, std::cerr);
  if (*decode_cmd) return cmd_decode(decode, std::cout, std::cerr);
  if (*score_cmd) {
    if (score.bin_wers.empty() && (score.refs_path.empty() || score.hyps_path.empty())) {
      std::cerr << "error: score needs --refs and --hyps, or --bin-wers\n";
      return kExitInputError;
    }
    return cmd_score(score, std::cout, std::cerr);
  }
  if (*toy_cmd) return cmd_toy(toy, std::cout, std::cerr);
  return kExitInputError;
}
