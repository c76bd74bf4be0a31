#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cli/commands.h"
#include "cli/logit_file.h"
#include "cli/verify.h"
#include "sactc/lattice.h"
#include "sactc/loss.h"
#include "sactc/serialize.h"
#include "sactc/toylab.h"

namespace sactc::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sactc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  // 6 frames over {<b>, a, b, <sc>}, speakers [a] and [b, a].
  void write_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.5);
    logits_ = Matrix(6, 4);
    for (double& x : logits_.data()) x = gauss(rng);
    write_logit_file(path("x.salm"), logits_);
    write("labels.json", R"({"vocab": ["<b>", "a", "b", "<sc>"], "blank_id": 0, "sc_id": 3,
                             "speakers": [["a"], ["b", "a"]]})");
  }

  fs::path dir_;
  Matrix logits_;
};

json run_loss(const LossOptions& opts, int* code) {
  std::ostringstream out, err;
  *code = cmd_loss(opts, out, err);
  return out.str().empty() ? json() : json::parse(out.str());
}

TEST_F(CliTest, LogitFileRoundTrip) {
  Matrix m(3, 2);
  m(0, 0) = -1.25;
  m(2, 1) = 1e-300;
  write_logit_file(path("m.salm"), m);
  EXPECT_EQ(read_logit_file(path("m.salm")).values, m);
}

TEST_F(CliTest, LogitFileRejectsBadHeaderAndLength) {
  std::istringstream bad_magic(std::string("XALM\1\0\0\0\1\0\0\0\1\0\0\0", 16) +
                               std::string(8, '\0'));
  EXPECT_THROW(read_logit_file(bad_magic), InvalidArgument);
  std::ostringstream good;
  write_logit_file(good, Matrix(2, 2, 0.5));
  std::string truncated = good.str();
  truncated.pop_back();
  std::istringstream short_in(truncated);
  EXPECT_THROW(read_logit_file(short_in), InvalidArgument);
  std::string wrong_version = good.str();
  wrong_version[4] = 2;
  std::istringstream version_in(wrong_version);
  EXPECT_THROW(read_logit_file(version_in), InvalidArgument);
}

TEST_F(CliTest, LossMalformedMagicExitsTwo) {
  write_instance(1);
  write("bad.salm", "NOPE and then some bytes");
  int code = 0;
  run_loss({path("bad.salm"), path("labels.json"), "ctc", 0.0, {}, {}, {}}, &code);
  EXPECT_EQ(code, kExitInputError);
}

TEST_F(CliTest, LossMatchesLibraryBitForBit) {
  write_instance(2);
  int code = 0;
  const json doc =
      run_loss({path("x.salm"), path("labels.json"), "sactc", 15.0, 0, 3, path("g.salm")}, &code);
  ASSERT_EQ(code, kExitOk);
  const LabelFile labels = parse_label_file(R"({"vocab": ["<b>", "a", "b", "<sc>"],
      "blank_id": 0, "sc_id": 3, "speakers": [["a"], ["b", "a"]]})");
  const LossResult lib =
      sactc_loss(LogitGrid(logits_), labels.label, make_risk_spec(labels.label, 15.0), 0);
  EXPECT_EQ(doc.at("loss").get<double>(), lib.loss);
  EXPECT_TRUE(doc.at("feasible").get<bool>());
  EXPECT_DOUBLE_EQ(doc.at("boundary_b").get<double>(), 1.0 / 3.0);
  ASSERT_EQ(doc.at("per_token_losses").size(), 4u);
  EXPECT_TRUE(doc.at("per_token_losses")[1].is_null());
  EXPECT_EQ(read_logit_file(path("g.salm")).values, lib.grad);
}

TEST_F(CliTest, SactcAtZeroLambdaIsCtcPlusLogTwo) {
  write_instance(3);
  int code_ctc = 0;
  int code_sactc = 0;
  const json ctc = run_loss({path("x.salm"), path("labels.json"), "ctc", 0.0, {}, {}, {}}, &code_ctc);
  const json sactc =
      run_loss({path("x.salm"), path("labels.json"), "sactc", 0.0, {}, {}, {}}, &code_sactc);
  ASSERT_EQ(code_ctc, kExitOk);
  ASSERT_EQ(code_sactc, kExitOk);
  EXPECT_NEAR(sactc.at("loss").get<double>() - ctc.at("loss").get<double>(), std::numbers::ln2,
              1e-9);
}

TEST_F(CliTest, LossRejectsMismatchedIdsAndMode) {
  write_instance(4);
  int code = 0;
  run_loss({path("x.salm"), path("labels.json"), "ctc", 0.0, 1, {}, {}}, &code);
  EXPECT_EQ(code, kExitInputError);
  run_loss({path("x.salm"), path("labels.json"), "ctc", 0.0, {}, 2, {}}, &code);
  EXPECT_EQ(code, kExitInputError);
  run_loss({path("x.salm"), path("labels.json"), "rnnt", 0.0, {}, {}, {}}, &code);
  EXPECT_EQ(code, kExitInputError);
}

TEST_F(CliTest, LossInfeasibleExitsThree) {
  write_logit_file(path("short.salm"), Matrix(2, 4, 0.0));
  write("labels.json", R"({"vocab": ["<b>", "a", "b", "<sc>"], "blank_id": 0, "sc_id": 3,
                           "speakers": [["a"], ["b", "a"]]})");
  int code = 0;
  const json doc =
      run_loss({path("short.salm"), path("labels.json"), "ctc", 0.0, {}, {}, {}}, &code);
  EXPECT_EQ(code, kExitInfeasible);
  EXPECT_FALSE(doc.at("feasible").get<bool>());
}

TEST_F(CliTest, VerifyPasses) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify({"all", 20, 7}, out, err), kExitOk) << err.str();
  const json doc = json::parse(out.str());
  EXPECT_TRUE(doc.at("passed").get<bool>());
}

TEST_F(CliTest, VerifyZeroTrialsIsVacuousWithWarning) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify({"all", 0, 0}, out, err), kExitOk);
  EXPECT_NE(err.str().find("warning"), std::string::npos);
}

TEST_F(CliTest, VerifyRejectsUnknownSuite) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify({"fast", 1, 0}, out, err), kExitInputError);
}

TEST(VerifyMutation, SignFlippedRevisedBackwardFailsPartition) {
  std::mt19937_64 rng(31);
  InstanceLimits limits;
  limits.max_frames = 8;
  double correct = 0.0;
  double mutated = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Instance inst = random_two_speaker_instance(rng, limits);
    const PosteriorGrid post = softmax_log(inst.logits);
    const ExtendedLabelSeq ext = extend_labels(inst.label.tokens, 0);
    LatticeTables tables = compute_lattice(post, ext);
    correct = std::max(correct, partition_error(tables, post, ext));

    const std::size_t frames = post.frames();
    for (std::size_t t = 0; t + 1 < frames; ++t) {
      for (std::size_t v = 1; v < ext.size(); v += 2) {
        const double y = post.log_values(t + 1, static_cast<std::size_t>(ext.tokens[v]));
        tables.beta_hat(t, v) = log_add(tables.beta(t, v), tables.beta(t + 1, v) + y);
      }
    }
    mutated = std::max(mutated, partition_error(tables, post, ext));
  }
  EXPECT_LE(correct, 1e-10);
  EXPECT_GT(mutated, 1e-10);
}

TEST_F(CliTest, DecodeWithVocab) {
  Matrix m(5, 4, 0.0);
  const int trace[] = {1, 1, 3, 0, 2};
  for (std::size_t t = 0; t < 5; ++t) m(t, static_cast<std::size_t>(trace[t])) = 5.0;
  write_logit_file(path("d.salm"), m);
  write("labels.json", R"({"vocab": ["<b>", "a", "b", "<sc>"], "blank_id": 0, "sc_id": 3,
                           "speakers": [["a"], ["b"]]})");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_decode({path("d.salm"), path("labels.json"), 0, -1}, out, err), kExitOk);
  const json doc = json::parse(out.str());
  EXPECT_EQ(doc.at("tokens"), json({1, 3, 2}));
  EXPECT_EQ(doc.at("words"), json({{"a"}, {"b"}}));
}

TEST_F(CliTest, ScoreIdentityAndSwap) {
  write("refs.jsonl",
        R"({"id": "m1", "refs": [["a", "b"], ["c"]], "timings": [{"start": 0, "duration": 2}, {"start": 1, "duration": 2}]})"
        "\n");
  write("same.jsonl", R"({"id": "m1", "hyps": [["a", "b"], ["c"]]})" "\n");
  write("swap.jsonl", R"({"id": "m1", "hyps": [["c"], ["a", "b"]]})" "\n");

  std::ostringstream out, err;
  ASSERT_EQ(cmd_score({path("refs.jsonl"), path("same.jsonl"), path("s.csv"), {}}, out, err),
            kExitOk);
  json doc = json::parse(out.str());
  EXPECT_EQ(doc.at("pi_wer").at("errors"), 0);
  EXPECT_EQ(doc.at("identity_wer").at("errors"), 0);
  EXPECT_TRUE(fs::exists(path("s.csv")));

  std::ostringstream out2;
  ASSERT_EQ(cmd_score({path("refs.jsonl"), path("swap.jsonl"), "", {}}, out2, err), kExitOk);
  doc = json::parse(out2.str());
  EXPECT_EQ(doc.at("pi_wer").at("errors"), 0);
  EXPECT_GT(doc.at("identity_wer").at("errors").get<int>(), 0);
}

TEST_F(CliTest, ScoreMissingHypothesisExitsTwo) {
  write("refs.jsonl",
        R"({"id": "m1", "refs": [["a"]], "timings": [{"start": 0, "duration": 1}]})" "\n");
  write("hyps.jsonl", R"({"id": "m2", "hyps": [["a"]]})" "\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_score({path("refs.jsonl"), path("hyps.jsonl"), "", {}}, out, err),
            kExitInputError);
}

TEST_F(CliTest, ScoreBinWersShortcut) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_score({"", "", "", {6.0, 8.4, 12.8}}, out, err), kExitOk);
  EXPECT_NEAR(json::parse(out.str()).at("oa_wer").get<double>(), 9.0667, 1e-4);
  std::ostringstream out2;
  EXPECT_EQ(cmd_score({"", "", "", {6.0, 8.4}}, out2, err), kExitInputError);
}

TEST_F(CliTest, ToyWritesArtifacts) {
  write("toy.json", R"({"generator": {"content_tokens": 4, "feature_dim": 6, "min_tokens": 1,
                                       "max_tokens": 2, "max_frames": 20},
                        "model": {"window": 3, "hidden": 8},
                        "optimizer": {"steps": 5, "batch_size": 2},
                        "seeds": [1], "train_mixtures": 4, "heldout_mixtures": 2})");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_toy({path("toy.json"), path("out")}, out, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(path("out/loss_curves.csv")));
  EXPECT_TRUE(fs::exists(path("out/stats.csv")));
  EXPECT_TRUE(fs::exists(path("out/summary.json")));
  const json doc = json::parse(out.str());
  EXPECT_EQ(doc.at("runs").size(), 2u);
}

TEST_F(CliTest, ToyDivergenceExitsFour) {
  write("toy.json", R"({"generator": {"content_tokens": 4, "feature_dim": 6, "min_tokens": 1,
                                       "max_tokens": 2, "max_frames": 20},
                        "optimizer": {"steps": 10, "batch_size": 1, "learning_rate": 1e308,
                                      "clip_norm": 0},
                        "seeds": [1], "train_mixtures": 2, "heldout_mixtures": 1})");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_toy({path("toy.json"), path("out")}, out, err), kExitDiverged);
}

TEST_F(CliTest, BundledToyConfigParses) {
  std::ostringstream ss;
  ss << std::ifstream(SACTC_TOY_CONFIG).rdbuf();
  EXPECT_NO_THROW(toylab::parse_experiment_config(ss.str()));
}

}  // namespace
}  // namespace sactc::cli
