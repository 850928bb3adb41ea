#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "kdqa/error.hpp"
#include "kdqa/noise.hpp"
#include "kdqa/rng.hpp"

namespace kdqa {

std::string_view to_string(NoiseMode mode) {
  return mode == NoiseMode::full ? "full" : "substitution_only";
}

NoiseMode parse_noise_mode(std::string_view text) {
  if (text == "full") return NoiseMode::full;
  if (text == "sub" || text == "substitution_only") return NoiseMode::substitution_only;
  throw InvalidArgument("unknown noise mode '" + std::string(text) + "'");
}

std::string_view to_string(SpanStatus status) {
  switch (status) {
    case SpanStatus::exact:
      return "exact";
    case SpanStatus::relocated:
      return "relocated";
    default:
      return "lost";
  }
}

SpanStatus parse_span_status(std::string_view text) {
  if (text == "exact") return SpanStatus::exact;
  if (text == "relocated") return SpanStatus::relocated;
  if (text == "lost") return SpanStatus::lost;
  throw InvalidArgument("unknown span status '" + std::string(text) + "'");
}

void NoiseChannelConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_sub) || !prob(p_del) || !prob(p_ins)) {
    throw InvalidArgument("noise rates must lie in [0, 1]");
  }
  if (p_sub + p_del + p_ins > 1.0 + 1e-12) {
    throw InvalidArgument("noise rates sum to more than 1");
  }
  if (mode == NoiseMode::substitution_only && (p_del != 0.0 || p_ins != 0.0)) {
    throw InvalidArgument("substitution_only mode forbids deletions and insertions");
  }
  if (confusion_pool_size < 1) throw InvalidArgument("confusion_pool_size must be >= 1");
}

Dataset NoisedDataset::as_dataset() const {
  Dataset ds;
  ds.split_name = split_name;
  ds.examples.reserve(examples.size());
  for (const auto& n : examples) ds.examples.push_back(n.example);
  return ds;
}

NoisedDataset as_clean_noised(const Dataset& dataset) {
  NoisedDataset out;
  out.split_name = dataset.split_name;
  for (const auto& ex : dataset.examples) {
    NoisedExample n;
    n.example = ex;
    n.provenance.resize(ex.document_tokens.size());
    for (std::size_t i = 0; i < n.provenance.size(); ++i) n.provenance[i] = static_cast<long>(i);
    n.span_status = SpanStatus::exact;
    out.examples.push_back(std::move(n));
  }
  return out;
}

namespace {

std::size_t find_first(const std::vector<std::string>& doc, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > doc.size()) return doc.size();
  for (std::size_t i = 0; i + needle.size() <= doc.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), doc.begin() + static_cast<std::ptrdiff_t>(i))) {
      return i;
    }
  }
  return doc.size();
}

}  // namespace

NoisedExample corrupt(const QaExample& example, const NoiseChannelConfig& cfg,
                      const ConfusionSets& confusion) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, example.id));
  const auto& src = example.document_tokens;
  const auto pool = confusion.insertion_pool();

  NoisedExample out;
  out.example.id = example.id;
  out.example.question_tokens = example.question_tokens;
  out.example.answer_text = example.answer_text;
  auto& doc = out.example.document_tokens;
  std::vector<bool> untouched(src.size(), false);
  std::vector<std::size_t> out_pos(src.size(), 0);

  for (std::size_t i = 0; i < src.size(); ++i) {
    // Fixed number of draws per token keeps streams aligned across rates.
    const double u_event = rng.uniform();
    const double u_choice = rng.uniform();
    const double u_ins = rng.uniform();
    const double u_ins_choice = rng.uniform();
    bool emitted = true;
    if (u_event < cfg.p_sub) {
      auto cands = confusion.candidates(src[i]);
      out_pos[i] = doc.size();
      if (cands.empty()) {
        doc.push_back(src[i]);
        untouched[i] = true;
      } else {
        const auto k = std::min(cands.size() - 1,
                                static_cast<std::size_t>(u_choice * static_cast<double>(cands.size())));
        doc.push_back(cands[k]);
      }
      out.provenance.push_back(static_cast<long>(i));
    } else if (u_event < cfg.p_sub + cfg.p_del) {
      emitted = false;
    } else {
      out_pos[i] = doc.size();
      doc.push_back(src[i]);
      untouched[i] = true;
      out.provenance.push_back(static_cast<long>(i));
    }
    if (emitted && u_ins < cfg.p_ins && !pool.empty()) {
      const auto k = std::min(pool.size() - 1,
                              static_cast<std::size_t>(u_ins_choice * static_cast<double>(pool.size())));
      doc.push_back(pool[k]);
      out.provenance.push_back(kInsertedToken);
    }
  }
  if (doc.empty() && !src.empty()) {
    doc.push_back(src[0]);
    out.provenance.push_back(0);
    untouched[0] = true;
    out_pos[0] = 0;
  }

  const std::size_t s = example.answer_start, e = example.answer_end;
  bool exact = s <= e && e < src.size();
  for (std::size_t i = s; exact && i <= e; ++i) exact = untouched[i];
  if (exact && out_pos[e] - out_pos[s] == e - s) {
    out.example.answer_start = out_pos[s];
    out.example.answer_end = out_pos[e];
    out.span_status = SpanStatus::exact;
    return out;
  }
  const auto answer = split_spaces(example.answer_text);
  const auto at = find_first(doc, answer);
  if (at < doc.size()) {
    out.example.answer_start = at;
    out.example.answer_end = at + answer.size() - 1;
    out.span_status = SpanStatus::relocated;
  } else {
    out.example.answer_start = 0;
    out.example.answer_end = 0;
    out.span_status = SpanStatus::lost;
  }
  return out;
}

NoisedDataset corrupt(const Dataset& dataset, const NoiseChannelConfig& cfg,
                      const ConfusionSets& confusion) {
  NoisedDataset out;
  out.split_name = dataset.split_name;
  out.examples.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) out.examples.push_back(corrupt(ex, cfg, confusion));
  return out;
}

// --- WER -------------------------------------------------------------------

EditCounts align_words(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditCounts counts;
  counts.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

double word_error_rate(std::span<const std::string> ref, std::span<const std::string> hyp) {
  if (ref.empty()) throw InvalidArgument("word_error_rate: empty reference");
  const auto c = align_words(ref, hyp);
  return static_cast<double>(c.errors()) / static_cast<double>(ref.size());
}

double corpus_wer(std::span<const QaExample> reference, std::span<const NoisedExample> noised) {
  if (reference.size() != noised.size()) throw InvalidArgument("corpus_wer: size mismatch");
  std::size_t errors = 0, words = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto c = align_words(reference[i].document_tokens, noised[i].example.document_tokens);
    errors += c.errors();
    words += c.reference_length;
  }
  if (words == 0) throw InvalidArgument("corpus_wer: empty reference corpus");
  return static_cast<double>(errors) / static_cast<double>(words);
}

// --- calibration -----------------------------------------------------------

CalibrationResult calibrate_channel(double target_wer, NoiseMode mode,
                                    std::span<const QaExample> sample,
                                    const ConfusionSets& confusion, std::uint64_t seed,
                                    std::size_t confusion_pool_size) {
  if (!std::isfinite(target_wer) || target_wer < 0.0 || target_wer >= 1.0) {
    throw InvalidArgument("target WER must lie in [0, 1)");
  }
  if (sample.empty()) throw InvalidArgument("calibration sample is empty");

  std::size_t words = 0, substitutable = 0;
  for (const auto& ex : sample) {
    for (const auto& t : ex.document_tokens) {
      ++words;
      if (!confusion.candidates(t).empty()) ++substitutable;
    }
  }
  if (words == 0) throw InvalidArgument("calibration sample has no document tokens");

  auto config_for = [&](double strength) {
    NoiseChannelConfig cfg;
    cfg.mode = mode;
    cfg.seed = seed;
    cfg.confusion_pool_size = confusion_pool_size;
    if (mode == NoiseMode::substitution_only) {
      cfg.p_sub = strength;
    } else {
      cfg.p_sub = 0.70 * strength;
      cfg.p_del = 0.15 * strength;
      cfg.p_ins = 0.15 * strength;
    }
    return cfg;
  };
  std::vector<NoisedExample> scratch(sample.size());
  auto measure = [&](const NoiseChannelConfig& cfg) {
    for (std::size_t i = 0; i < sample.size(); ++i) scratch[i] = corrupt(sample[i], cfg, confusion);
    return corpus_wer(sample, scratch);
  };

  CalibrationResult best;
  best.sample_words = words;
  if (target_wer == 0.0) {
    best.config = config_for(0.0);
    best.measured_wer = measure(best.config);
    return best;
  }

  const double frac = static_cast<double>(substitutable) / static_cast<double>(words);
  const double expected_per_unit = mode == NoiseMode::substitution_only ? frac : 0.70 * frac + 0.30;
  double guess = expected_per_unit > 0.0 ? std::clamp(target_wer / expected_per_unit, 0.0, 1.0) : 1.0;

  constexpr std::size_t kMaxRounds = 50;
  constexpr double kStopWithin = 1e-3;
  double lo = 0.0, hi = 1.0;
  auto consider = [&](double strength, std::size_t round) {
    auto cfg = config_for(strength);
    const double m = measure(cfg);
    if (round == 0 || std::abs(m - target_wer) < std::abs(best.measured_wer - target_wer)) {
      best.config = cfg;
      best.measured_wer = m;
    }
    best.rounds = round;
    if (m < target_wer) {
      lo = strength;
    } else {
      hi = strength;
    }
  };
  consider(guess, 0);
  for (std::size_t round = 1; round <= kMaxRounds; ++round) {
    if (std::abs(best.measured_wer - target_wer) <= kStopWithin) break;
    consider(0.5 * (lo + hi), round);
  }
  if (std::abs(best.measured_wer - target_wer) > kCalibrationTolerance) {
    throw CalibrationError("calibration did not reach WER " + std::to_string(target_wer) +
                               " (best " + std::to_string(best.measured_wer) + ")",
                           best.measured_wer);
  }
  return best;
}

// --- sidecar ---------------------------------------------------------------

void save_provenance_jsonl(const NoisedDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& n : dataset.examples) {
    nlohmann::ordered_json j;
    j["id"] = n.example.id;
    j["span_status"] = std::string(to_string(n.span_status));
    j["provenance"] = n.provenance;
    out << j.dump() << '\n';
  }
}

NoisedDataset load_noised(const std::filesystem::path& corpus_path,
                          const std::filesystem::path& provenance_path, std::string split_name) {
  auto ds = load_jsonl(corpus_path, std::move(split_name));
  std::ifstream in(provenance_path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + provenance_path.string());
  struct Record {
    std::vector<long> provenance;
    SpanStatus status;
  };
  std::unordered_map<std::string, Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Record r{j.at("provenance").get<std::vector<long>>(),
               parse_span_status(j.at("span_status").get<std::string>())};
      records[j.at("id").get<std::string>()] = std::move(r);
    } catch (const std::exception& e) {
      throw ParseError(provenance_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  NoisedDataset out;
  out.split_name = ds.split_name;
  for (auto& ex : ds.examples) {
    auto it = records.find(ex.id);
    if (it == records.end()) {
      throw ParseError("no provenance record for example '" + ex.id + "'");
    }
    if (it->second.provenance.size() != ex.document_tokens.size()) {
      throw ParseError("provenance length mismatch for example '" + ex.id + "'");
    }
    NoisedExample n;
    n.example = std::move(ex);
    n.provenance = std::move(it->second.provenance);
    n.span_status = it->second.status;
    out.examples.push_back(std::move(n));
  }
  return out;
}

}  // namespace kdqa
