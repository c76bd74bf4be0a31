#pragma once

// Desk-scale experiment: synthetic two-speaker mixtures, a small window
// model trained with CTC or speaker-aware CTC, and statistics on where each
// speaker's tokens are emitted.

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sactc/common.h"
#include "sactc/loss.h"
#include "sactc/metrics.h"
#include "sactc/serialize.h"

namespace sactc::toylab {

struct GeneratorConfig {
  std::size_t content_tokens = 8;  // ids 1..content_tokens; 0 is blank
  std::size_t feature_dim = 16;
  std::size_t frames_per_token = 3;
  // Each speaker draws its own rate in [frames_per_token, max_frames_per_token];
  // 0 keeps every speaker at frames_per_token.
  std::size_t max_frames_per_token = 0;
  std::size_t min_tokens = 2;
  std::size_t max_tokens = 4;
  // Speaker B starts at a uniform fraction of speaker A's length in this range.
  double min_offset_fraction = 0.0;
  double max_offset_fraction = 1.0;
  double noise = 0.1;
  // Scale of a per-speaker voice vector added to every frame that speaker
  // is active in (speaker 1 and speaker 2 each get their own); 0 disables.
  double voice = 0.0;
  // Token embeddings are scaled by (1 - ramp) + ramp * (f + 1) / span over
  // the f-th of a token's frames, so a token is clearest at its end; 0 is flat.
  double ramp = 0.0;
  std::size_t max_frames = 40;

  TokenId blank_id() const { return 0; }
  TokenId sc_id() const { return static_cast<TokenId>(content_tokens + 1); }
  std::size_t vocab() const { return content_tokens + 2; }
};

struct FrameSpan {
  std::size_t begin = 0;  // 0-based, inclusive
  std::size_t end = 0;    // exclusive
};

struct SyntheticMixture {
  Matrix frames;  // T x D
  SerializedLabel label;
  std::vector<FrameSpan> speaker_spans;
  double overlap_ratio = 0.0;
};

// Token embedding table shared by every mixture drawn under one seed.
class MixtureGenerator {
 public:
  MixtureGenerator(GeneratorConfig config, std::uint64_t seed);

  // Draws the next mixture from the generator's stream.
  SyntheticMixture next();

  // Renders a mixture with explicit content; `offset` is speaker B's start
  // frame and `rate_a` / `rate_b` are frames per token (0 means the config
  // default). Throws InfeasibleAlignment if the frame count cannot hold the
  // serialized label.
  SyntheticMixture render(const TokenSeq& speaker_a, const TokenSeq& speaker_b,
                          std::size_t offset, std::size_t rate_a = 0,
                          std::size_t rate_b = 0);

  const GeneratorConfig& config() const { return config_; }

 private:
  GeneratorConfig config_;
  Matrix embeddings_;  // (content_tokens + 1) x D, row 0 unused
  Matrix voices_;      // 2 x D
  std::mt19937_64 rng_;
};

struct ModelConfig {
  std::size_t window = 5;   // symmetric, odd
  std::size_t hidden = 32;  // 0 gives a linear map
  double init_scale = 1.0;
};

// Frame-local window model: logits_t = W2 tanh(W1 x_[t-h, t+h] + b1) + b2,
// with zero padding outside the sequence.
class ToyModel {
 public:
  ToyModel(const ModelConfig& config, std::size_t feature_dim, std::size_t vocab,
           std::uint64_t seed);

  LogitGrid forward(const Matrix& frames) const;

  // Adds d loss / d params for d loss / d logits = `grad_logits`.
  void accumulate_gradient(const Matrix& frames, const Matrix& grad_logits,
                           std::vector<double>& grad) const;

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t vocab() const { return vocab_; }

 private:
  std::vector<double> window_input(const Matrix& frames, std::size_t t) const;
  std::size_t input_dim() const { return config_.window * feature_dim_; }
  std::size_t hidden_dim() const;

  ModelConfig config_;
  std::size_t feature_dim_;
  std::size_t vocab_;
  std::vector<double> params_;
};

struct OptimizerConfig {
  double learning_rate = 0.1;
  std::size_t steps = 300;
  std::size_t batch_size = 16;
  double clip_norm = 5.0;  // 0 disables clipping
};

struct TrainingRun {
  LossMode mode = LossMode::kCtc;
  double lambda = 0.0;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Loss and gradient for one mixture under the run's objective.
LossResult mixture_loss(const ToyModel& model, const SyntheticMixture& mix,
                        const TrainingRun& run);

// Gradient descent over `data`, taken cyclically in batches. Returns the
// mean batch loss per step. Throws TrainingDiverged on a non-finite loss.
std::vector<double> train(ToyModel& model, const std::vector<SyntheticMixture>& data,
                          const TrainingRun& run, const OptimizerConfig& opt);

struct EmissionStats {
  // Per label, occupancy by end frame normalized to sum 1 (<sc> excluded).
  std::vector<std::vector<double>> occupancy;
  std::vector<int> speaker_of_occupancy;
  std::vector<double> center_of_mass;  // per speaker, in units of t/T
  double compliance = 0.0;
};

// Speaker 1 mass at t/T <= b plus speaker 2 mass at t/T > b, over total
// mass. A single-speaker label counts every frame as compliant.
EmissionStats emission_stats(const ToyModel& model, const SyntheticMixture& mix);

struct ExperimentConfig {
  GeneratorConfig generator;
  ModelConfig model;
  OptimizerConfig optimizer;
  std::vector<TrainingRun> runs;
  std::vector<std::uint64_t> seeds;
  std::size_t train_mixtures = 64;
  std::size_t heldout_mixtures = 32;
};

// Parses the JSON experiment config; missing fields keep their defaults.
ExperimentConfig parse_experiment_config(std::string_view json_text);

struct RunResult {
  std::uint64_t seed = 0;
  TrainingRun run;
  std::vector<double> loss_curve;
  double compliance = 0.0;  // mean over held-out mixtures
  std::vector<double> center_of_mass;
  std::map<metrics::OverlapBin, double> compliance_by_bin;
};

std::string_view mode_name(LossMode mode);

// Trains and evaluates every (seed, run) pair in order.
std::vector<RunResult> run_experiment(const ExperimentConfig& config);

}  // namespace sactc::toylab
