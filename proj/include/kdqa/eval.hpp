#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdqa/corpus.hpp"
#include "kdqa/distill.hpp"
#include "kdqa/model.hpp"
#include "kdqa/noise.hpp"

namespace kdqa {

/// SQuAD v1.1 answer normalization: lowercase, strip punctuation, drop the
/// articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

int exact_match(std::string_view prediction, std::string_view gold);
double f1_score(std::string_view prediction, std::string_view gold);

struct ExampleScore {
  std::string id;
  std::string predicted_text;
  std::string gold_text;
  int em = 0;
  double f1 = 0.0;
};

struct EvalReport {
  double em = 0.0;
  double f1 = 0.0;
  std::size_t n_examples = 0;
  std::vector<ExampleScore> per_example;
  std::string fingerprint;
  double unknown_token_rate = 0.0;
  std::vector<std::string> warnings;
};

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, const Vocabulary& vocab,
                    const Dataset& dataset, std::size_t max_answer_len);

// --- experiment harnesses --------------------------------------------------

/// Clean and noisy views of the same train/dev examples plus the shared
/// vocabulary.
struct ExperimentData {
  Dataset clean_train;
  Dataset clean_dev;
  NoisedDataset noisy_train;
  NoisedDataset noisy_dev;
  Vocabulary vocab;
};

struct NoisePlan {
  double train_wer = 0.2277;
  double dev_wer = 0.2273;
  NoiseMode mode = NoiseMode::full;
  std::size_t confusion_pool_size = 5;
  std::uint64_t seed = 0;
};

struct PreparedExperiment {
  ExperimentData data;
  CalibrationResult train_calibration;
  CalibrationResult dev_calibration;
};

/// Builds the shared vocabulary, calibrates one channel per split against
/// its own documents and corrupts both splits.
PreparedExperiment prepare_experiment(Dataset clean_train, Dataset clean_dev,
                                      const NoisePlan& plan);

struct ScoreCell {
  std::string model;     // teacher | student | student+kd | ...
  std::string eval_set;  // clean_dev | noisy_dev
  double em = 0.0;
  double f1 = 0.0;
};

struct SeedCells {
  std::uint64_t seed = 0;
  std::vector<ScoreCell> cells;
};

struct GridReport {
  ModelConfig teacher_config;
  ModelConfig student_config;
  TrainConfig teacher_training;
  DistillConfig distill;
  std::vector<SeedCells> per_seed;
  std::vector<ScoreCell> median;  // same layout as each per_seed entry

  const ScoreCell& median_cell(std::string_view model, std::string_view eval_set) const;
};

/// Teacher on clean text, student on noisy text without and with KD; each
/// scored on clean and noisy dev. Model and training seeds derive from each
/// entry of `seeds`.
GridReport run_kd_grid(const ExperimentData& data, const ModelConfig& teacher_cfg,
                       const ModelConfig& student_cfg, const TrainConfig& teacher_training,
                       const DistillConfig& distill, std::span<const std::uint64_t> seeds);

struct SweepRow {
  double tau = 0.0;
  double em = 0.0;  // median over seeds
  double f1 = 0.0;
};

struct SweepPoint {
  double tau = 0.0;
  std::uint64_t seed = 0;
  double em = 0.0;
  double f1 = 0.0;
};

struct SweepReport {
  ModelConfig teacher_config;
  ModelConfig student_config;
  TrainConfig teacher_training;
  DistillConfig distill;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepRow> rows;
  std::vector<SweepPoint> points;
};

inline const std::vector<double> kDefaultTaus = {1, 2, 4, 6, 8, 10};

/// One distillation per (tau, seed), scored on noisy dev; the teacher for a
/// seed is trained once and shared across taus.
SweepReport run_tau_sweep(const ExperimentData& data, const ModelConfig& teacher_cfg,
                          const ModelConfig& student_cfg, const TrainConfig& teacher_training,
                          const DistillConfig& distill, std::span<const double> taus,
                          std::span<const std::uint64_t> seeds);

/// "tau,seed,em,f1" header plus one line per point.
std::string sweep_csv(const SweepReport& report);

struct CompressionRow {
  std::string model;
  std::string training_data;  // clean | noisy
  std::string eval_data;
  std::size_t parameters = 0;
  double em = 0.0;
  double f1 = 0.0;
};

struct CompressionReport {
  ModelConfig big_config;
  ModelConfig small_config;
  TrainConfig teacher_training;
  DistillConfig distill;
  std::vector<std::uint64_t> seeds;
  std::size_t big_parameters = 0;
  std::size_t small_parameters = 0;
  std::vector<std::vector<CompressionRow>> per_seed;
  std::vector<CompressionRow> median;

  const CompressionRow& median_row(std::string_view model, std::string_view eval_data) const;
};

CompressionReport run_compression_study(const ExperimentData& data, const ModelConfig& big_cfg,
                                        const ModelConfig& small_cfg,
                                        const TrainConfig& teacher_training,
                                        const DistillConfig& distill,
                                        std::span<const std::uint64_t> seeds);

double median(std::vector<double> values);

}  // namespace kdqa
