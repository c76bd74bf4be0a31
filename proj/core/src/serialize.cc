#include "sactc/serialize.h"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

namespace sactc {
namespace {

// Returns lambda * (x - b) where x is the normalized frame position.
double risk_argument(const RiskSpec& spec, int speaker, std::size_t frame,
                     std::size_t frames, FramePosition position) {
  if (spec.speaker_count != 2) {
    throw UnsupportedSpeakerCount("risk weights are defined for two speakers, got " +
                                  std::to_string(spec.speaker_count));
  }
  if (speaker != 1 && speaker != 2) {
    throw InvalidArgument("speaker index must be 1 or 2");
  }
  if (frames == 0 || frame < 1 || frame > frames) {
    throw InvalidArgument("frame index out of range");
  }
  if (!(spec.lambda >= 0.0)) throw InvalidArgument("risk factor must be >= 0");
  if (!(spec.boundary_b > 0.0 && spec.boundary_b < 1.0)) {
    throw InvalidArgument("speaker boundary must lie in (0, 1)");
  }
  double x = static_cast<double>(frame);
  if (position == FramePosition::kCenter) x -= 0.5;
  x /= static_cast<double>(frames);
  return spec.lambda * (x - spec.boundary_b);
}

// log(1 / (1 + exp(z)))
double log_sigmoid_neg(double z) {
  return z > 0.0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
}

}  // namespace

SerializedLabel serialize_sot(const SpeakerTranscripts& transcripts, TokenId sc_id) {
  const auto& speakers = transcripts.per_speaker;
  if (speakers.empty()) throw InvalidArgument("no speakers to serialize");
  if (!transcripts.start_times.empty() &&
      transcripts.start_times.size() != speakers.size()) {
    throw InvalidArgument("start_times must list one offset per speaker");
  }

  std::vector<std::size_t> order(speakers.size());
  std::iota(order.begin(), order.end(), 0);
  if (!transcripts.start_times.empty()) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return transcripts.start_times[a] < transcripts.start_times[b];
    });
  }

  SerializedLabel label;
  label.sc_id = sc_id;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const TokenSeq& words = speakers[order[rank]];
    if (words.empty()) {
      throw InvalidArgument("speaker " + std::to_string(order[rank] + 1) +
                            " has an empty transcript");
    }
    const int speaker = static_cast<int>(rank) + 1;
    for (TokenId token : words) {
      if (token == sc_id) throw InvalidArgument("<sc> id appears inside a transcript");
      label.tokens.push_back(token);
      label.speaker_of_token.push_back(speaker);
    }
    label.per_speaker_counts.push_back(words.size());
    if (rank + 1 < order.size()) {
      label.tokens.push_back(sc_id);
      label.speaker_of_token.push_back(speaker);
    }
  }
  return label;
}

std::vector<TokenSeq> deserialize_sot(const SerializedLabel& label) {
  std::vector<TokenSeq> out(1);
  for (TokenId token : label.tokens) {
    if (token == label.sc_id) {
      out.emplace_back();
    } else {
      out.back().push_back(token);
    }
  }
  return out;
}

double boundary_ratio(const SerializedLabel& label) {
  if (label.speaker_count() != 2) {
    throw UnsupportedSpeakerCount("boundary ratio needs two speakers, got " +
                                  std::to_string(label.speaker_count()));
  }
  const auto m = static_cast<double>(label.per_speaker_counts[0]);
  const auto n = static_cast<double>(label.per_speaker_counts[1]);
  return m / (m + n);
}

RiskSpec make_risk_spec(const SerializedLabel& label, double lambda) {
  return RiskSpec{lambda, boundary_ratio(label), label.speaker_count()};
}

double risk_weight(const RiskSpec& spec, int speaker, std::size_t frame,
                   std::size_t frames, FramePosition position) {
  return std::exp(log_risk_weight(spec, speaker, frame, frames, position));
}

double log_risk_weight(const RiskSpec& spec, int speaker, std::size_t frame,
                       std::size_t frames, FramePosition position) {
  const double z = risk_argument(spec, speaker, frame, frames, position);
  return speaker == 1 ? log_sigmoid_neg(z) : log_sigmoid_neg(-z);
}

LabelFile parse_label_file(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("label file is not valid JSON: ") + e.what());
  }

  LabelFile file;
  try {
    file.vocab = doc.at("vocab").get<std::vector<std::string>>();
    file.blank_id = doc.at("blank_id").get<TokenId>();
    file.sc_id = doc.at("sc_id").get<TokenId>();
    const auto speakers = doc.at("speakers").get<std::vector<std::vector<std::string>>>();
    if (doc.contains("start_times")) {
      file.transcripts.start_times = doc.at("start_times").get<std::vector<double>>();
    }

    const auto vocab_size = static_cast<TokenId>(file.vocab.size());
    if (vocab_size < 2) throw InvalidArgument("vocab needs at least two entries");
    if (file.blank_id < 0 || file.blank_id >= vocab_size) {
      throw InvalidArgument("blank_id outside vocab");
    }
    if (file.sc_id < 0 || file.sc_id >= vocab_size) {
      throw InvalidArgument("sc_id outside vocab");
    }
    if (file.sc_id == file.blank_id) throw InvalidArgument("sc_id equals blank_id");

    std::unordered_map<std::string, TokenId> index;
    for (TokenId id = 0; id < vocab_size; ++id) {
      if (!index.emplace(file.vocab[id], id).second) {
        throw InvalidArgument("duplicate vocab entry '" + file.vocab[id] + "'");
      }
    }
    for (const auto& words : speakers) {
      TokenSeq ids;
      for (const auto& word : words) {
        auto it = index.find(word);
        if (it == index.end()) throw InvalidArgument("token '" + word + "' not in vocab");
        if (it->second == file.blank_id) {
          throw InvalidArgument("blank token inside a transcript");
        }
        ids.push_back(it->second);
      }
      file.transcripts.per_speaker.push_back(std::move(ids));
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("label file schema error: ") + e.what());
  }
  file.label = serialize_sot(file.transcripts, file.sc_id);
  return file;
}

}  // namespace sactc
