#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>

#include "kdqa/distill.hpp"
#include "kdqa/error.hpp"
#include "kdqa/ops.hpp"
#include "kdqa/optim.hpp"
#include "kdqa/rng.hpp"

namespace kdqa {

std::string_view to_string(KlDirection d) {
  return d == KlDirection::teacher_to_student ? "teacher_to_student" : "student_to_teacher";
}

std::string_view to_string(TeacherInput t) {
  return t == TeacherInput::student_view ? "student_view" : "clean_paired";
}

KlDirection parse_kl_direction(std::string_view text) {
  if (text == "teacher_to_student") return KlDirection::teacher_to_student;
  if (text == "student_to_teacher") return KlDirection::student_to_teacher;
  throw InvalidArgument("unknown KL direction '" + std::string(text) + "'");
}

TeacherInput parse_teacher_input(std::string_view text) {
  if (text == "student_view") return TeacherInput::student_view;
  if (text == "clean_paired") return TeacherInput::clean_paired;
  throw InvalidArgument("unknown teacher input '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be >= 0");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
}

void DistillConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive");
  train_config().validate();
}

Tensor span_cross_entropy(const SpanLogits& logits, std::size_t gold_start, std::size_t gold_end) {
  return scale(add(cross_entropy(logits.start, gold_start), cross_entropy(logits.end, gold_end)), 0.5);
}

namespace {

std::vector<double> log_softmax(std::span<const double> logits, double tau) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp((v - mx) / tau);
  const double shift = std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (logits[i] - mx) / tau - shift;
  return out;
}

// Fused softmax + KL on one head. The gradient is written in closed form so
// that it vanishes exactly when student and teacher logits coincide; the
// generic composition leaves round-off there, which Adam's epsilon scaling
// turns into real drift.
Tensor soft_target_kl(const Tensor& student, std::span<const double> teacher, double tau,
                      KlDirection direction) {
  const auto ls = log_softmax(student.values(), tau);
  const auto lt = log_softmax(teacher, tau);
  const std::size_t m = ls.size();
  std::vector<double> ps(m), pt(m);
  double kl = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    ps[j] = std::exp(ls[j]);
    pt[j] = std::exp(lt[j]);
    kl += direction == KlDirection::teacher_to_student ? pt[j] * (lt[j] - ls[j])
                                                       : ps[j] * (ls[j] - lt[j]);
  }
  return detail::make_result(
      "soft_target_kl", {}, {kl}, {student},
      [tau, direction, kl, ps = std::move(ps), pt = std::move(pt), ls, lt](detail::Node& self) {
        auto& g = self.inputs[0]->grad;
        const double up = self.grad[0] / tau;
        for (std::size_t j = 0; j < g.size(); ++j) {
          g[j] += direction == KlDirection::teacher_to_student
                      ? up * (ps[j] - pt[j])
                      : up * ps[j] * ((ls[j] - lt[j]) - kl);
        }
      });
}

}  // namespace

KdLoss kd_loss(const SpanLogits& student, const SpanLogits& teacher, std::size_t gold_start,
               std::size_t gold_end, const DistillConfig& cfg) {
  if (student.start.numel() != teacher.start.numel() || student.end.numel() != teacher.end.numel() ||
      student.start.numel() != student.end.numel() || student.start.numel() == 0) {
    throw InvalidArgument("kd_loss: student has " + std::to_string(student.start.numel()) +
                          " positions, teacher " + std::to_string(teacher.start.numel()));
  }
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw InvalidArgument("kd_loss: alpha outside [0, 1]");
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw InvalidArgument("kd_loss: tau must be positive");
  const double a = cfg.alpha;
  const double tau = cfg.tau;

  // Teacher logits enter as plain values, so no gradient can reach them.
  auto soft_term = [&](const Tensor& s, const Tensor& t) {
    return soft_target_kl(s, t.values(), tau, cfg.kl_direction);
  };

  const Tensor hard_start = cross_entropy(student.start, gold_start);
  const Tensor hard_end = cross_entropy(student.end, gold_end);

  KdLoss out;
  out.hard = 0.5 * (hard_start.item() + hard_end.item());
  if (a == 0.0) {
    // Soft term has zero weight; keep the graph identical to plain CE.
    {
      NoGradGuard no_grad;
      out.soft = 0.5 * (soft_term(student.start, teacher.start).item() +
                        soft_term(student.end, teacher.end).item());
    }
    out.total = scale(add(hard_start, hard_end), 0.5);
    return out;
  }
  const Tensor soft_start = soft_term(student.start, teacher.start);
  const Tensor soft_end = soft_term(student.end, teacher.end);
  out.soft = 0.5 * (soft_start.item() + soft_end.item());
  const double soft_weight = a * tau * tau;
  const double hard_weight = 1.0 - a;
  const Tensor head_start = add(scale(soft_start, soft_weight), scale(hard_start, hard_weight));
  const Tensor head_end = add(scale(soft_end, soft_weight), scale(hard_end, hard_weight));
  out.total = scale(add(head_start, head_end), 0.5);
  return out;
}

namespace {

struct TrainItem {
  std::vector<std::size_t> question_ids;
  std::vector<std::size_t> document_ids;
  std::size_t gold_start = 0;
  std::size_t gold_end = 0;
  SpanLogits teacher;  // constant logits, only for distillation
};

struct StepLoss {
  Tensor total;
  double soft = 0.0;
  double hard = 0.0;
};

using LossFn = std::function<StepLoss(const TrainItem&, const SpanLogits&)>;

// Batches group examples of identical document length; batch order and
// membership are reshuffled each epoch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<TrainItem>& items,
                                                   std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (auto i : order) buckets[items[i].document_ids.size()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, members] : buckets) {
    for (std::size_t b = 0; b < members.size(); b += batch_size) {
      const auto last = std::min(members.size(), b + batch_size);
      batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(b),
                           members.begin() + static_cast<std::ptrdiff_t>(last));
    }
  }
  rng.shuffle(std::span<std::vector<std::size_t>>(batches));
  return batches;
}

TrainReport run_training(const std::vector<TrainItem>& items, ModelParams& params,
                         const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                         const LossFn& loss_fn) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = train_cfg.seed;
  report.examples_used = items.size();

  Adam adam(AdamOptions{train_cfg.lr});
  Rng order_rng(derive_seed(train_cfg.seed, "batch-order"));
  Rng dropout_rng(derive_seed(train_cfg.seed, "dropout"));
  auto tensors = params.tensors();
  std::vector<double> totals(items.size()), softs(items.size()), hards(items.size());

  for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    for (const auto& batch : make_batches(items, train_cfg.batch_size, order_rng)) {
      params.zero_grad();
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (auto idx : batch) {
        const auto& item = items[idx];
        ForwardOptions fo{true, &dropout_rng};
        const SpanLogits logits = forward(params, model_cfg, item.question_ids, item.document_ids, fo);
        StepLoss loss = loss_fn(item, logits);
        totals[idx] = loss.total.item();
        softs[idx] = loss.soft;
        hards[idx] = loss.hard;
        backward(scale(loss.total, inv));
      }
      adam.step(tensors);
    }
    EpochStats stats;
    for (std::size_t i = 0; i < items.size(); ++i) {
      stats.loss += totals[i];
      stats.kl += softs[i];
      stats.ce += hards[i];
    }
    const double n = static_cast<double>(items.size());
    stats.loss /= n;
    stats.kl /= n;
    stats.ce /= n;
    report.epochs.push_back(stats);
  }
  params.zero_grad();
  report.checksum = params_checksum(params);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void check_vocab(const ModelConfig& cfg, const Vocabulary& vocab, const char* who) {
  if (cfg.vocab_size != vocab.size()) {
    throw ConfigError(std::string(who) + " config expects vocabulary of " +
                      std::to_string(cfg.vocab_size) + " entries, got " + std::to_string(vocab.size()));
  }
}

ModelParams starting_params(const ModelConfig& cfg, const ModelParams* initial) {
  if (!initial) return init_params(cfg);
  const auto shapes = parameter_shapes(cfg);
  for (const auto& [name, shape] : shapes) {
    if (!initial->contains(name) || initial->at(name).shape() != shape) {
      throw ConfigError("initial parameters do not match the model config at '" + name + "'");
    }
  }
  return initial->clone();
}

}  // namespace

TrainResult train_supervised(const Dataset& dataset, const Vocabulary& vocab,
                             const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                             const ModelParams* initial) {
  model_cfg.validate();
  train_cfg.validate();
  check_vocab(model_cfg, vocab, "model");
  std::vector<TrainItem> items;
  std::size_t dropped = 0;
  for (const auto& ex : dataset.examples) {
    try {
      validate_span(ex);
    } catch (const InvalidArgument&) {
      ++dropped;
      continue;
    }
    if (ex.question_tokens.empty()) {
      ++dropped;
      continue;
    }
    TrainItem item;
    item.question_ids = vocab.encode(ex.question_tokens);
    item.document_ids = vocab.encode(ex.document_tokens);
    item.gold_start = ex.answer_start;
    item.gold_end = ex.answer_end;
    items.push_back(std::move(item));
  }
  if (items.empty()) throw InvalidArgument("train_supervised: no valid training examples");

  TrainResult result{starting_params(model_cfg, initial), {}};
  result.report = run_training(items, result.params, model_cfg, train_cfg,
                               [](const TrainItem& item, const SpanLogits& logits) {
                                 StepLoss l;
                                 l.total = span_cross_entropy(logits, item.gold_start, item.gold_end);
                                 l.hard = l.total.item();
                                 return l;
                               });
  result.report.examples_dropped = dropped;
  return result;
}

Dataset usable_examples(const NoisedDataset& noisy, bool drop_lost_spans) {
  Dataset ds;
  ds.split_name = noisy.split_name;
  for (const auto& n : noisy.examples) {
    if (drop_lost_spans && n.span_status == SpanStatus::lost) continue;
    ds.examples.push_back(n.example);
  }
  return ds;
}

TrainResult distill_student(const NoisedDataset& noisy, const ModelParams& teacher,
                            const ModelConfig& teacher_cfg, const ModelConfig& student_cfg,
                            const Vocabulary& vocab, const DistillConfig& cfg, const Dataset* clean,
                            const ModelParams* student_initial) {
  cfg.validate();
  teacher_cfg.validate();
  student_cfg.validate();
  check_vocab(teacher_cfg, vocab, "teacher");
  check_vocab(student_cfg, vocab, "student");

  std::unordered_map<std::string, const QaExample*> clean_by_id;
  if (cfg.teacher_input == TeacherInput::clean_paired) {
    if (!clean) throw ConfigError("clean_paired teacher input needs the clean source dataset");
    for (const auto& ex : clean->examples) clean_by_id[ex.id] = &ex;
    for (const auto& n : noisy.examples) {
      auto it = clean_by_id.find(n.example.id);
      if (it == clean_by_id.end()) {
        throw ConfigError("clean_paired: no clean example with id '" + n.example.id + "'");
      }
      bool identity = n.provenance.size() == it->second->document_tokens.size() &&
                      n.example.document_tokens.size() == n.provenance.size();
      for (std::size_t i = 0; identity && i < n.provenance.size(); ++i) {
        identity = n.provenance[i] == static_cast<long>(i);
      }
      if (!identity) {
        throw ConfigError("clean_paired teacher input requires length-preserving "
                          "(substitution_only) noise; example '" + n.example.id + "' is not aligned");
      }
    }
  }

  std::vector<TrainItem> items;
  std::size_t dropped = 0;
  {
    NoGradGuard no_grad;
    for (const auto& n : noisy.examples) {
      const auto& ex = n.example;
      if ((cfg.drop_lost_spans && n.span_status == SpanStatus::lost) || ex.question_tokens.empty()) {
        ++dropped;
        continue;
      }
      try {
        validate_span(ex);
      } catch (const InvalidArgument&) {
        ++dropped;
        continue;
      }
      TrainItem item;
      item.question_ids = vocab.encode(ex.question_tokens);
      item.document_ids = vocab.encode(ex.document_tokens);
      item.gold_start = ex.answer_start;
      item.gold_end = ex.answer_end;
      const auto teacher_doc = cfg.teacher_input == TeacherInput::clean_paired
                                   ? vocab.encode(clean_by_id.at(ex.id)->document_tokens)
                                   : item.document_ids;
      item.teacher = forward(teacher, teacher_cfg, item.question_ids, teacher_doc);
      items.push_back(std::move(item));
    }
  }
  if (items.empty()) throw InvalidArgument("distill_student: no usable training examples");

  TrainResult result{starting_params(student_cfg, student_initial), {}};
  result.report = run_training(items, result.params, student_cfg, cfg.train_config(),
                               [&cfg](const TrainItem& item, const SpanLogits& logits) {
                                 auto kd = kd_loss(logits, item.teacher, item.gold_start,
                                                   item.gold_end, cfg);
                                 return StepLoss{kd.total, kd.soft, kd.hard};
                               });
  result.report.examples_dropped = dropped;
  result.report.distilled = true;
  return result;
}

}  // namespace kdqa
