#include "sactc/toylab.h"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sactc/lattice.h"

namespace sactc::toylab {

MixtureGenerator::MixtureGenerator(GeneratorConfig config, std::uint64_t seed)
    : config_(config), rng_(seed) {
  if (config_.content_tokens < 1 || config_.feature_dim < 1 ||
      config_.frames_per_token < 1) {
    throw InvalidArgument("generator needs tokens, features and frames per token");
  }
  if (config_.min_tokens < 1 || config_.max_tokens < config_.min_tokens) {
    throw InvalidArgument("generator token range is empty");
  }
  if (!(config_.min_offset_fraction >= 0.0) ||
      config_.max_offset_fraction < config_.min_offset_fraction) {
    throw InvalidArgument("generator offset range is invalid");
  }
  if (!(config_.ramp >= 0.0 && config_.ramp <= 1.0) || !(config_.voice >= 0.0)) {
    throw InvalidArgument("generator ramp must lie in [0, 1] and voice must be >= 0");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  embeddings_ = Matrix(config_.content_tokens + 1, config_.feature_dim);
  for (std::size_t k = 1; k <= config_.content_tokens; ++k) {
    for (double& x : embeddings_.row(k)) x = gauss(rng_);
  }
  voices_ = Matrix(2, config_.feature_dim, 0.0);
  if (config_.voice > 0.0) {
    for (double& x : voices_.data()) x = config_.voice * gauss(rng_);
  }
}

SyntheticMixture MixtureGenerator::render(const TokenSeq& speaker_a,
                                          const TokenSeq& speaker_b,
                                          std::size_t offset, std::size_t rate_a,
                                          std::size_t rate_b) {
  if (rate_a == 0) rate_a = config_.frames_per_token;
  if (rate_b == 0) rate_b = config_.frames_per_token;
  const std::size_t len_a = speaker_a.size() * rate_a;
  const std::size_t len_b = speaker_b.size() * rate_b;
  const std::size_t frames = std::max(len_a, offset + len_b);

  SyntheticMixture mix;
  mix.label = serialize_sot({{speaker_a, speaker_b}, {}}, config_.sc_id());
  if (frames < min_alignment_length(mix.label.tokens)) {
    throw InfeasibleAlignment("mixture of " + std::to_string(frames) +
                              " frames cannot hold its serialized label");
  }
  mix.speaker_spans = {{0, len_a}, {offset, offset + len_b}};

  std::normal_distribution<double> gauss(0.0, 1.0);
  mix.frames = Matrix(frames, config_.feature_dim, 0.0);
  auto paint = [&](const TokenSeq& tokens, std::size_t speaker, std::size_t start,
                   std::size_t span) {
    const auto voice = voices_.row(speaker);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto row = embeddings_.row(static_cast<std::size_t>(tokens[i]));
      for (std::size_t f = 0; f < span; ++f) {
        const double gain = (1.0 - config_.ramp) +
                            config_.ramp * static_cast<double>(f + 1) / static_cast<double>(span);
        auto out = mix.frames.row(start + i * span + f);
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += gain * row[d] + voice[d];
      }
    }
  };
  paint(speaker_a, 0, 0, rate_a);
  paint(speaker_b, 1, offset, rate_b);
  for (double& x : mix.frames.data()) x += config_.noise * gauss(rng_);

  const std::vector<metrics::Interval> intervals = {
      {0.0, static_cast<double>(len_a)},
      {static_cast<double>(offset), static_cast<double>(len_b)}};
  mix.overlap_ratio = metrics::overlap_ratio(intervals);
  return mix;
}

SyntheticMixture MixtureGenerator::next() {
  std::uniform_int_distribution<std::size_t> length(config_.min_tokens, config_.max_tokens);
  std::uniform_int_distribution<TokenId> token(1, static_cast<TokenId>(config_.content_tokens));
  std::uniform_real_distribution<double> fraction(config_.min_offset_fraction,
                                                  config_.max_offset_fraction);
  std::uniform_int_distribution<std::size_t> rate(
      config_.frames_per_token, std::max(config_.frames_per_token, config_.max_frames_per_token));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    TokenSeq a(length(rng_));
    TokenSeq b(length(rng_));
    for (auto& x : a) x = token(rng_);
    for (auto& x : b) x = token(rng_);
    const std::size_t rate_a = rate(rng_);
    const std::size_t rate_b = rate(rng_);
    const double len_a = static_cast<double>(a.size() * rate_a);
    const auto offset = static_cast<std::size_t>(std::lround(fraction(rng_) * len_a));
    const std::size_t frames = std::max<std::size_t>(a.size() * rate_a, offset + b.size() * rate_b);
    if (frames > config_.max_frames) continue;
    TokenSeq joined = a;
    joined.push_back(config_.sc_id());
    joined.insert(joined.end(), b.begin(), b.end());
    if (frames < min_alignment_length(joined)) continue;
    return render(a, b, offset, rate_a, rate_b);
  }
  throw InfeasibleAlignment("generator config rarely yields a feasible mixture");
}

ToyModel::ToyModel(const ModelConfig& config, std::size_t feature_dim,
                   std::size_t vocab, std::uint64_t seed)
    : config_(config), feature_dim_(feature_dim), vocab_(vocab) {
  if (config_.window == 0 || config_.window % 2 == 0) {
    throw InvalidArgument("context window must be a positive odd frame count");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t in = input_dim();
  const std::size_t hid = hidden_dim();
  if (config_.hidden == 0) {
    params_.assign(vocab_ * in + vocab_, 0.0);
    const double scale = config_.init_scale / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < vocab_ * in; ++i) params_[i] = scale * gauss(rng);
  } else {
    params_.assign(hid * in + hid + vocab_ * hid + vocab_, 0.0);
    const double s1 = config_.init_scale / std::sqrt(static_cast<double>(in));
    const double s2 = config_.init_scale / std::sqrt(static_cast<double>(hid));
    for (std::size_t i = 0; i < hid * in; ++i) params_[i] = s1 * gauss(rng);
    const std::size_t w2 = hid * in + hid;
    for (std::size_t i = 0; i < vocab_ * hid; ++i) params_[w2 + i] = s2 * gauss(rng);
  }
}

std::size_t ToyModel::hidden_dim() const { return config_.hidden; }

std::vector<double> ToyModel::window_input(const Matrix& frames, std::size_t t) const {
  std::vector<double> x(input_dim(), 0.0);
  const auto half = static_cast<std::ptrdiff_t>(config_.window / 2);
  for (std::ptrdiff_t k = -half; k <= half; ++k) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + k;
    if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames.rows())) continue;
    const auto row = frames.row(static_cast<std::size_t>(src));
    std::copy(row.begin(), row.end(),
              x.begin() + static_cast<std::ptrdiff_t>((k + half) * feature_dim_));
  }
  return x;
}

LogitGrid ToyModel::forward(const Matrix& frames) const {
  if (frames.cols() != feature_dim_) throw InvalidArgument("feature dimension mismatch");
  const std::size_t in = input_dim();
  const std::size_t hid = hidden_dim();
  LogitGrid logits(Matrix(frames.rows(), vocab_));
  std::vector<double> h(hid);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    const std::vector<double> x = window_input(frames, t);
    auto out = logits.values.row(t);
    if (hid == 0) {
      const double* w = params_.data();
      const double* b = w + vocab_ * in;
      for (std::size_t k = 0; k < vocab_; ++k) {
        double acc = b[k];
        for (std::size_t i = 0; i < in; ++i) acc += w[k * in + i] * x[i];
        out[k] = acc;
      }
      continue;
    }
    const double* w1 = params_.data();
    const double* b1 = w1 + hid * in;
    const double* w2 = b1 + hid;
    const double* b2 = w2 + vocab_ * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      double acc = b1[j];
      for (std::size_t i = 0; i < in; ++i) acc += w1[j * in + i] * x[i];
      h[j] = std::tanh(acc);
    }
    for (std::size_t k = 0; k < vocab_; ++k) {
      double acc = b2[k];
      for (std::size_t j = 0; j < hid; ++j) acc += w2[k * hid + j] * h[j];
      out[k] = acc;
    }
  }
  return logits;
}

void ToyModel::accumulate_gradient(const Matrix& frames, const Matrix& grad_logits,
                                   std::vector<double>& grad) const {
  if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
  const std::size_t in = input_dim();
  const std::size_t hid = hidden_dim();
  std::vector<double> h(hid);
  std::vector<double> dh(hid);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    const std::vector<double> x = window_input(frames, t);
    const auto g = grad_logits.row(t);
    if (hid == 0) {
      double* dw = grad.data();
      double* db = dw + vocab_ * in;
      for (std::size_t k = 0; k < vocab_; ++k) {
        if (g[k] == 0.0) continue;
        for (std::size_t i = 0; i < in; ++i) dw[k * in + i] += g[k] * x[i];
        db[k] += g[k];
      }
      continue;
    }
    const double* w1 = params_.data();
    const double* b1 = w1 + hid * in;
    const double* w2 = b1 + hid;
    double* dw1 = grad.data();
    double* db1 = dw1 + hid * in;
    double* dw2 = db1 + hid;
    double* db2 = dw2 + vocab_ * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      double acc = b1[j];
      for (std::size_t i = 0; i < in; ++i) acc += w1[j * in + i] * x[i];
      h[j] = std::tanh(acc);
    }
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t k = 0; k < vocab_; ++k) {
      db2[k] += g[k];
      for (std::size_t j = 0; j < hid; ++j) {
        dw2[k * hid + j] += g[k] * h[j];
        dh[j] += w2[k * hid + j] * g[k];
      }
    }
    for (std::size_t j = 0; j < hid; ++j) {
      const double da = dh[j] * (1.0 - h[j] * h[j]);
      db1[j] += da;
      for (std::size_t i = 0; i < in; ++i) dw1[j * in + i] += da * x[i];
    }
  }
}

LossResult mixture_loss(const ToyModel& model, const SyntheticMixture& mix,
                        const TrainingRun& run) {
  const LogitGrid logits = model.forward(mix.frames);
  if (run.mode == LossMode::kCtc) return ctc_loss(logits, mix.label.tokens, 0);
  return sactc_loss(logits, mix.label, make_risk_spec(mix.label, run.lambda), 0);
}

std::vector<double> train(ToyModel& model, const std::vector<SyntheticMixture>& data,
                          const TrainingRun& run, const OptimizerConfig& opt) {
  if (!std::isfinite(opt.learning_rate)) throw InvalidArgument("learning rate must be finite");
  if (data.empty() || opt.batch_size == 0) throw InvalidArgument("no training data");
  std::vector<double> curve;
  curve.reserve(opt.steps);
  std::vector<double> grad;
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    grad.assign(model.parameters().size(), 0.0);
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < opt.batch_size; ++i) {
      const SyntheticMixture& mix = data[cursor];
      cursor = (cursor + 1) % data.size();
      const LogitGrid logits = model.forward(mix.frames);
      for (double x : logits.values.data()) {
        if (!std::isfinite(x)) {
          throw TrainingDiverged(step, "non-finite logits at step " + std::to_string(step));
        }
      }
      const LossResult res = run.mode == LossMode::kCtc
                                 ? ctc_loss(logits, mix.label.tokens, 0)
                                 : sactc_loss(logits, mix.label,
                                              make_risk_spec(mix.label, run.lambda), 0);
      if (res.status == LossStatus::kInfeasible) continue;
      if (!std::isfinite(res.loss)) {
        throw TrainingDiverged(step, "non-finite loss at step " + std::to_string(step));
      }
      model.accumulate_gradient(mix.frames, res.grad, grad);
      total += res.loss;
      ++used;
    }
    if (used == 0) throw TrainingDiverged(step, "no feasible sample in batch");
    const double inv = 1.0 / static_cast<double>(used);
    double norm2 = 0.0;
    for (double& g : grad) {
      g *= inv;
      norm2 += g * g;
    }
    double scale = opt.learning_rate;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) {
      throw TrainingDiverged(step, "non-finite gradient at step " + std::to_string(step));
    }
    if (opt.clip_norm > 0.0 && norm > opt.clip_norm) scale *= opt.clip_norm / norm;
    auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= scale * grad[i];
    curve.push_back(total * inv);
  }
  return curve;
}

EmissionStats emission_stats(const ToyModel& model, const SyntheticMixture& mix) {
  const SerializedLabel& label = mix.label;
  double boundary = 1.0;
  if (label.speaker_count() == 2) {
    boundary = boundary_ratio(label);
  } else if (label.speaker_count() != 1) {
    throw UnsupportedSpeakerCount("emission statistics support one or two speakers");
  }
  const PosteriorGrid post = softmax_log(model.forward(mix.frames));
  const GroupedPosterior grouped = grouped_posteriors(post, label.tokens, 0);
  const std::size_t frames = post.frames();

  EmissionStats stats;
  std::vector<double> com_sum(static_cast<std::size_t>(label.speaker_count()), 0.0);
  std::vector<std::size_t> com_count(com_sum.size(), 0);
  double compliant = 0.0;
  double total = 0.0;
  for (std::size_t u = 0; u < label.tokens.size(); ++u) {
    if (label.is_sc(u)) continue;
    const int speaker = label.speaker_of_token[u];
    std::vector<double> occ(frames);
    double sum = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      occ[t] = std::exp(grouped.log_occupancy(u, t) - grouped.log_likelihood);
      sum += occ[t];
    }
    double center = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      occ[t] /= sum;
      const double pos = static_cast<double>(t + 1) / static_cast<double>(frames);
      center += occ[t] * pos;
      const bool early = pos <= boundary;
      if ((speaker == 1) == early) compliant += occ[t];
    }
    total += 1.0;
    com_sum[static_cast<std::size_t>(speaker - 1)] += center;
    ++com_count[static_cast<std::size_t>(speaker - 1)];
    stats.occupancy.push_back(std::move(occ));
    stats.speaker_of_occupancy.push_back(speaker);
  }
  for (std::size_t s = 0; s < com_sum.size(); ++s) {
    stats.center_of_mass.push_back(com_count[s] ? com_sum[s] / static_cast<double>(com_count[s])
                                                : 0.0);
  }
  stats.compliance = total > 0.0 ? compliant / total : 0.0;
  return stats;
}

std::string_view mode_name(LossMode mode) {
  return mode == LossMode::kCtc ? "ctc" : "sactc";
}

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  using nlohmann::json;
  ExperimentConfig cfg;
  try {
    const json doc = json::parse(json_text);
    if (doc.contains("generator")) {
      const json& g = doc.at("generator");
      auto& out = cfg.generator;
      out.content_tokens = g.value("content_tokens", out.content_tokens);
      out.feature_dim = g.value("feature_dim", out.feature_dim);
      out.frames_per_token = g.value("frames_per_token", out.frames_per_token);
      out.max_frames_per_token = g.value("max_frames_per_token", out.max_frames_per_token);
      out.min_tokens = g.value("min_tokens", out.min_tokens);
      out.max_tokens = g.value("max_tokens", out.max_tokens);
      out.min_offset_fraction = g.value("min_offset_fraction", out.min_offset_fraction);
      out.max_offset_fraction = g.value("max_offset_fraction", out.max_offset_fraction);
      out.noise = g.value("noise", out.noise);
      out.voice = g.value("voice", out.voice);
      out.ramp = g.value("ramp", out.ramp);
      out.max_frames = g.value("max_frames", out.max_frames);
    }
    if (doc.contains("model")) {
      const json& m = doc.at("model");
      cfg.model.window = m.value("window", cfg.model.window);
      cfg.model.hidden = m.value("hidden", cfg.model.hidden);
      cfg.model.init_scale = m.value("init_scale", cfg.model.init_scale);
    }
    if (doc.contains("optimizer")) {
      const json& o = doc.at("optimizer");
      cfg.optimizer.learning_rate = o.value("learning_rate", cfg.optimizer.learning_rate);
      cfg.optimizer.steps = o.value("steps", cfg.optimizer.steps);
      cfg.optimizer.batch_size = o.value("batch_size", cfg.optimizer.batch_size);
      cfg.optimizer.clip_norm = o.value("clip_norm", cfg.optimizer.clip_norm);
    }
    if (doc.contains("runs")) {
      for (const json& r : doc.at("runs")) {
        TrainingRun run;
        const std::string mode = r.at("mode").get<std::string>();
        if (mode == "ctc") {
          run.mode = LossMode::kCtc;
        } else if (mode == "sactc") {
          run.mode = LossMode::kSactc;
        } else {
          throw InvalidArgument("unknown loss mode '" + mode + "'");
        }
        run.lambda = r.value("lambda", 0.0);
        if (!(run.lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
        cfg.runs.push_back(run);
      }
    } else {
      cfg.runs = {{LossMode::kCtc, 0.0}, {LossMode::kSactc, 15.0}};
    }
    if (doc.contains("seeds")) {
      cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      cfg.seeds = {1, 2, 3, 4, 5};
    }
    cfg.train_mixtures = doc.value("train_mixtures", cfg.train_mixtures);
    cfg.heldout_mixtures = doc.value("heldout_mixtures", cfg.heldout_mixtures);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("experiment config: ") + e.what());
  }
  if (cfg.train_mixtures == 0 || cfg.heldout_mixtures == 0) {
    throw InvalidArgument("experiment needs training and held-out mixtures");
  }
  return cfg;
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config) {
  std::vector<RunResult> results;
  for (std::uint64_t seed : config.seeds) {
    // Training and held-out data share the embedding table but come from
    // disjoint stretches of the stream.
    MixtureGenerator generator(config.generator, seed);
    std::vector<SyntheticMixture> train_set;
    for (std::size_t i = 0; i < config.train_mixtures; ++i) train_set.push_back(generator.next());
    std::vector<SyntheticMixture> heldout;
    for (std::size_t i = 0; i < config.heldout_mixtures; ++i) heldout.push_back(generator.next());

    for (const TrainingRun& run : config.runs) {
      ToyModel model(config.model, config.generator.feature_dim, config.generator.vocab(),
                     seed * 7919 + 17);
      RunResult result;
      result.seed = seed;
      result.run = run;
      result.loss_curve = train(model, train_set, run, config.optimizer);

      std::map<metrics::OverlapBin, std::pair<double, std::size_t>> by_bin;
      std::vector<double> centers(2, 0.0);
      double compliance = 0.0;
      for (const SyntheticMixture& mix : heldout) {
        const EmissionStats stats = emission_stats(model, mix);
        compliance += stats.compliance;
        for (std::size_t s = 0; s < stats.center_of_mass.size() && s < 2; ++s) {
          centers[s] += stats.center_of_mass[s];
        }
        auto& bin = by_bin[metrics::bin_overlap(mix.overlap_ratio)];
        bin.first += stats.compliance;
        ++bin.second;
      }
      const double n = static_cast<double>(heldout.size());
      result.compliance = compliance / n;
      for (double& c : centers) c /= n;
      result.center_of_mass = centers;
      for (const auto& [bin, acc] : by_bin) {
        result.compliance_by_bin[bin] = acc.first / static_cast<double>(acc.second);
      }
      results.push_back(std::move(result));
    }
  }
  return results;
}

}  // namespace sactc::toylab
