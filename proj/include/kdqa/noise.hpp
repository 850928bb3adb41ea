#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kdqa/corpus.hpp"

namespace kdqa {

enum class NoiseMode { full, substitution_only };

std::string_view to_string(NoiseMode mode);
NoiseMode parse_noise_mode(std::string_view text);  // "full" | "sub" | "substitution_only"

struct NoiseChannelConfig {
  double p_sub = 0.0;
  double p_del = 0.0;
  double p_ins = 0.0;
  NoiseMode mode = NoiseMode::full;
  std::size_t confusion_pool_size = 5;
  std::uint64_t seed = 0;

  /// Probabilities in [0, 1] summing to at most 1; no deletions or
  /// insertions in substitution_only mode.
  void validate() const;
};

/// Substitution candidates for every regular vocabulary token, plus the
/// pool insertions are drawn from.
class ConfusionSets {
 public:
  ConfusionSets() = default;
  ConfusionSets(std::vector<std::string> insertion_pool,
                std::unordered_map<std::string, std::vector<std::string>> candidates);

  /// Candidates for `token`; empty when the token is unknown or isolated.
  std::span<const std::string> candidates(std::string_view token) const;
  std::span<const std::string> insertion_pool() const { return pool_; }
  std::size_t size() const { return table_.size(); }

 private:
  std::vector<std::string> pool_;
  std::unordered_map<std::string, std::vector<std::string>> table_;
};

std::size_t char_levenshtein(std::string_view a, std::string_view b);

/// For each regular token, up to pool_size other tokens ordered by
/// ascending character edit distance, ties by token.
ConfusionSets build_confusion_sets(const Vocabulary& vocab, std::size_t pool_size);

enum class SpanStatus { exact, relocated, lost };
std::string_view to_string(SpanStatus status);
SpanStatus parse_span_status(std::string_view text);

inline constexpr long kInsertedToken = -1;

struct NoisedExample {
  QaExample example;
  /// Source document index of each output token, or kInsertedToken.
  std::vector<long> provenance;
  SpanStatus span_status = SpanStatus::exact;

  bool operator==(const NoisedExample&) const = default;
};

struct NoisedDataset {
  std::string split_name;
  std::vector<NoisedExample> examples;

  Dataset as_dataset() const;
  bool operator==(const NoisedDataset&) const = default;
};

/// Runs the document of `example` through the channel. Questions are left
/// untouched. Deterministic in (cfg.seed, example.id).
NoisedExample corrupt(const QaExample& example, const NoiseChannelConfig& cfg,
                      const ConfusionSets& confusion);
NoisedDataset corrupt(const Dataset& dataset, const NoiseChannelConfig& cfg,
                      const ConfusionSets& confusion);

/// Wraps clean examples with identity provenance.
NoisedDataset as_clean_noised(const Dataset& dataset);

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;
  std::size_t errors() const { return substitutions + deletions + insertions; }
};

/// Minimal unit-cost word alignment between reference and hypothesis.
EditCounts align_words(std::span<const std::string> ref, std::span<const std::string> hyp);
double word_error_rate(std::span<const std::string> ref, std::span<const std::string> hyp);

/// Sum of edits over sum of reference lengths across paired documents.
double corpus_wer(std::span<const QaExample> reference, std::span<const NoisedExample> noised);

struct CalibrationResult {
  NoiseChannelConfig config;
  double measured_wer = 0.0;
  std::size_t rounds = 0;
  std::size_t sample_words = 0;
};

inline constexpr double kCalibrationTolerance = 0.01;

/// Finds channel rates whose measured corpus WER over `sample` lands within
/// kCalibrationTolerance of target_wer. Throws CalibrationError after 50
/// bisection rounds without reaching the band.
CalibrationResult calibrate_channel(double target_wer, NoiseMode mode,
                                    std::span<const QaExample> sample,
                                    const ConfusionSets& confusion, std::uint64_t seed,
                                    std::size_t confusion_pool_size = 5);

// Sidecar provenance records, one JSON object per line:
// {"id": str, "span_status": str, "provenance": [int]}
void save_provenance_jsonl(const NoisedDataset& dataset, const std::filesystem::path& path);

/// Joins a corpus file with its provenance sidecar (matched by id).
NoisedDataset load_noised(const std::filesystem::path& corpus_path,
                          const std::filesystem::path& provenance_path,
                          std::string split_name = {});

}  // namespace kdqa
