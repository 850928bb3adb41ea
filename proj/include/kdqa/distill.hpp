#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "kdqa/corpus.hpp"
#include "kdqa/model.hpp"
#include "kdqa/noise.hpp"
#include "kdqa/tensor.hpp"

namespace kdqa {

enum class KlDirection {
  teacher_to_student,  // KL(p_teacher || p_student): teacher distribution is the target
  student_to_teacher,  // KL(p_student || p_teacher)
};

enum class TeacherInput {
  student_view,  // teacher reads the same noisy document as the student
  clean_paired,  // teacher reads the clean source document (length-preserving noise only)
};

std::string_view to_string(KlDirection d);
std::string_view to_string(TeacherInput t);
KlDirection parse_kl_direction(std::string_view text);
TeacherInput parse_teacher_input(std::string_view text);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DistillConfig {
  double alpha = 0.9;
  double tau = 2.0;
  KlDirection kl_direction = KlDirection::teacher_to_student;
  TeacherInput teacher_input = TeacherInput::student_view;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool drop_lost_spans = true;

  void validate() const;
  TrainConfig train_config() const { return {lr, epochs, batch_size, seed}; }
};

struct EpochStats {
  double loss = 0.0;
  double kl = 0.0;  // mean over heads of the unweighted soft term
  double ce = 0.0;  // mean over heads of the hard-label term
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  std::uint64_t checksum = 0;
  std::uint64_t seed = 0;
  std::size_t examples_used = 0;
  std::size_t examples_dropped = 0;
  bool distilled = false;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Mean over the start and end heads of the cross entropy against the gold
/// boundary positions.
Tensor span_cross_entropy(const SpanLogits& logits, std::size_t gold_start, std::size_t gold_end);

struct KdLoss {
  Tensor total;
  double soft = 0.0;
  double hard = 0.0;
};

/// Per head h in {start, end}:
///   alpha * tau^2 * KL(p_tau(teacher_h) || p_tau(student_h)) + (1 - alpha) * CE(student_h, gold_h)
/// averaged over the two heads. KL arguments swap under student_to_teacher.
/// Teacher logits are treated as constants.
KdLoss kd_loss(const SpanLogits& student, const SpanLogits& teacher, std::size_t gold_start,
               std::size_t gold_end, const DistillConfig& cfg);

/// Adam on span_cross_entropy; examples with invalid spans are skipped.
TrainResult train_supervised(const Dataset& dataset, const Vocabulary& vocab,
                             const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                             const ModelParams* initial = nullptr);

/// Keeps examples whose span survived the noise channel.
Dataset usable_examples(const NoisedDataset& noisy, bool drop_lost_spans = true);

/// Trains a student on `noisy` against kd_loss. The teacher runs in
/// inference mode on the noisy document (student_view) or on the matching
/// example of `clean` (clean_paired).
TrainResult distill_student(const NoisedDataset& noisy, const ModelParams& teacher,
                            const ModelConfig& teacher_cfg, const ModelConfig& student_cfg,
                            const Vocabulary& vocab, const DistillConfig& cfg,
                            const Dataset* clean = nullptr,
                            const ModelParams* student_initial = nullptr);

}  // namespace kdqa
