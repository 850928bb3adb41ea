#include <algorithm>
#include <iomanip>
#include <sstream>

#include "kdqa/error.hpp"
#include "kdqa/eval.hpp"
#include "kdqa/rng.hpp"

namespace kdqa {

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

struct SeededRun {
  ModelConfig teacher_cfg;
  TrainConfig teacher_training;
  ModelConfig student_cfg;
  DistillConfig distill;
};

// Teacher and student legs draw independent seeds from the run seed; both
// student legs share initialization and batch order.
SeededRun seeded(std::uint64_t seed, ModelConfig teacher_cfg, TrainConfig teacher_training,
                 ModelConfig student_cfg, DistillConfig distill) {
  teacher_cfg.seed = derive_seed(seed, "teacher-init");
  teacher_training.seed = derive_seed(seed, "teacher-train");
  student_cfg.seed = derive_seed(seed, "student-init");
  distill.seed = derive_seed(seed, "student-train");
  return {teacher_cfg, teacher_training, student_cfg, distill};
}

void check_data(const ExperimentData& data, const ModelConfig& a, const ModelConfig& b) {
  if (a.vocab_size != data.vocab.size() || b.vocab_size != data.vocab.size()) {
    throw ConfigError("model configs must use the shared vocabulary size " +
                      std::to_string(data.vocab.size()));
  }
  if (data.clean_dev.examples.empty() || data.noisy_dev.examples.empty()) {
    throw ConfigError("experiment needs non-empty clean and noisy dev sets");
  }
}

ScoreCell score(const std::string& model, const std::string& set, const ModelParams& params,
                const ModelConfig& cfg, const ExperimentData& data, const Dataset& dev) {
  const auto r = evaluate(params, cfg, data.vocab, dev, cfg.max_answer_len);
  return {model, set, r.em, r.f1};
}

std::vector<ScoreCell> median_cells(const std::vector<SeedCells>& runs) {
  std::vector<ScoreCell> out;
  if (runs.empty()) return out;
  for (std::size_t c = 0; c < runs[0].cells.size(); ++c) {
    std::vector<double> em, f1;
    for (const auto& r : runs) {
      em.push_back(r.cells[c].em);
      f1.push_back(r.cells[c].f1);
    }
    out.push_back({runs[0].cells[c].model, runs[0].cells[c].eval_set, median(em), median(f1)});
  }
  return out;
}

}  // namespace

const ScoreCell& GridReport::median_cell(std::string_view model, std::string_view eval_set) const {
  for (const auto& c : median) {
    if (c.model == model && c.eval_set == eval_set) return c;
  }
  throw InvalidArgument("grid has no cell " + std::string(model) + "/" + std::string(eval_set));
}

GridReport run_kd_grid(const ExperimentData& data, const ModelConfig& teacher_cfg,
                       const ModelConfig& student_cfg, const TrainConfig& teacher_training,
                       const DistillConfig& distill, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InvalidArgument("run_kd_grid: no seeds");
  check_data(data, teacher_cfg, student_cfg);
  GridReport report{teacher_cfg, student_cfg, teacher_training, distill, {}, {}};
  const Dataset noisy_dev = data.noisy_dev.as_dataset();
  const Dataset student_train = usable_examples(data.noisy_train, distill.drop_lost_spans);
  for (auto seed : seeds) {
    const auto run = seeded(seed, teacher_cfg, teacher_training, student_cfg, distill);
    const auto teacher =
        train_supervised(data.clean_train, data.vocab, run.teacher_cfg, run.teacher_training);
    const auto student = train_supervised(student_train, data.vocab, run.student_cfg,
                                          run.distill.train_config());
    const auto kd = distill_student(data.noisy_train, teacher.params, run.teacher_cfg,
                                    run.student_cfg, data.vocab, run.distill, &data.clean_train);
    SeedCells cells{seed, {}};
    const std::pair<std::string, const TrainResult*> legs[] = {
        {"teacher", &teacher}, {"student", &student}, {"student+kd", &kd}};
    for (const auto& [name, leg] : legs) {
      const auto& cfg = name == "teacher" ? run.teacher_cfg : run.student_cfg;
      cells.cells.push_back(score(name, "clean_dev", leg->params, cfg, data, data.clean_dev));
      cells.cells.push_back(score(name, "noisy_dev", leg->params, cfg, data, noisy_dev));
    }
    report.per_seed.push_back(std::move(cells));
  }
  report.median = median_cells(report.per_seed);
  return report;
}

SweepReport run_tau_sweep(const ExperimentData& data, const ModelConfig& teacher_cfg,
                          const ModelConfig& student_cfg, const TrainConfig& teacher_training,
                          const DistillConfig& distill, std::span<const double> taus,
                          std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InvalidArgument("run_tau_sweep: no seeds");
  if (taus.empty()) throw InvalidArgument("run_tau_sweep: no temperatures");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) throw InvalidArgument("run_tau_sweep: temperatures must be positive");
    if (i > 0 && !(taus[i] > taus[i - 1])) {
      throw InvalidArgument("run_tau_sweep: temperatures must be strictly increasing");
    }
  }
  check_data(data, teacher_cfg, student_cfg);
  SweepReport report{teacher_cfg, student_cfg, teacher_training, distill,
                     std::vector<std::uint64_t>(seeds.begin(), seeds.end()), {}, {}};
  const Dataset noisy_dev = data.noisy_dev.as_dataset();
  std::vector<std::vector<SweepPoint>> by_tau(taus.size());
  for (auto seed : seeds) {
    auto run = seeded(seed, teacher_cfg, teacher_training, student_cfg, distill);
    const auto teacher =
        train_supervised(data.clean_train, data.vocab, run.teacher_cfg, run.teacher_training);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      run.distill.tau = taus[t];
      const auto kd = distill_student(data.noisy_train, teacher.params, run.teacher_cfg,
                                      run.student_cfg, data.vocab, run.distill, &data.clean_train);
      const auto r = evaluate(kd.params, run.student_cfg, data.vocab, noisy_dev,
                              run.student_cfg.max_answer_len);
      by_tau[t].push_back({taus[t], seed, r.em, r.f1});
    }
  }
  for (std::size_t t = 0; t < taus.size(); ++t) {
    std::vector<double> em, f1;
    for (const auto& p : by_tau[t]) {
      em.push_back(p.em);
      f1.push_back(p.f1);
      report.points.push_back(p);
    }
    report.rows.push_back({taus[t], median(em), median(f1)});
  }
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::ostringstream os;
  os << "tau,seed,em,f1\n";
  os << std::setprecision(17);
  for (const auto& p : report.points) {
    os << p.tau << ',' << p.seed << ',' << p.em << ',' << p.f1 << '\n';
  }
  return os.str();
}

const CompressionRow& CompressionReport::median_row(std::string_view model,
                                                   std::string_view eval_data) const {
  for (const auto& r : median) {
    if (r.model == model && r.eval_data == eval_data) return r;
  }
  throw InvalidArgument("compression report has no row " + std::string(model) + "/" +
                        std::string(eval_data));
}

CompressionReport run_compression_study(const ExperimentData& data, const ModelConfig& big_cfg,
                                        const ModelConfig& small_cfg,
                                        const TrainConfig& teacher_training,
                                        const DistillConfig& distill,
                                        std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InvalidArgument("run_compression_study: no seeds");
  check_data(data, big_cfg, small_cfg);
  big_cfg.validate();
  small_cfg.validate();
  CompressionReport report;
  report.big_config = big_cfg;
  report.small_config = small_cfg;
  report.teacher_training = teacher_training;
  report.distill = distill;
  report.seeds.assign(seeds.begin(), seeds.end());
  report.big_parameters = init_params(big_cfg).parameter_count();
  report.small_parameters = init_params(small_cfg).parameter_count();
  if (report.small_parameters >= report.big_parameters) {
    throw ConfigError("compression study needs a small config with fewer parameters (" +
                      std::to_string(report.small_parameters) + " vs " +
                      std::to_string(report.big_parameters) + ")");
  }
  const Dataset noisy_dev = data.noisy_dev.as_dataset();
  const Dataset student_train = usable_examples(data.noisy_train, distill.drop_lost_spans);
  for (auto seed : seeds) {
    const auto run = seeded(seed, big_cfg, teacher_training, small_cfg, distill);
    const auto teacher =
        train_supervised(data.clean_train, data.vocab, run.teacher_cfg, run.teacher_training);
    const auto alone =
        train_supervised(student_train, data.vocab, run.student_cfg, run.distill.train_config());
    const auto kd = distill_student(data.noisy_train, teacher.params, run.teacher_cfg,
                                    run.student_cfg, data.vocab, run.distill, &data.clean_train);
    auto row = [&](std::string model, std::string train_data, std::string eval_data,
                   const TrainResult& leg, const ModelConfig& cfg, const Dataset& dev) {
      const auto r = evaluate(leg.params, cfg, data.vocab, dev, cfg.max_answer_len);
      return CompressionRow{std::move(model), std::move(train_data), std::move(eval_data),
                            leg.params.parameter_count(), r.em, r.f1};
    };
    report.per_seed.push_back({
        row("big", "clean", "clean", teacher, run.teacher_cfg, data.clean_dev),
        row("big", "clean", "noisy", teacher, run.teacher_cfg, noisy_dev),
        row("small", "noisy", "noisy", alone, run.student_cfg, noisy_dev),
        row("small+kd", "noisy", "noisy", kd, run.student_cfg, noisy_dev),
    });
  }
  for (std::size_t r = 0; r < report.per_seed[0].size(); ++r) {
    std::vector<double> em, f1;
    for (const auto& rows : report.per_seed) {
      em.push_back(rows[r].em);
      f1.push_back(rows[r].f1);
    }
    auto m = report.per_seed[0][r];
    m.em = median(em);
    m.f1 = median(f1);
    report.median.push_back(std::move(m));
  }
  return report;
}

PreparedExperiment prepare_experiment(Dataset clean_train, Dataset clean_dev,
                                      const NoisePlan& plan) {
  const Dataset splits[] = {clean_train, clean_dev};
  Vocabulary vocab = build_vocab(splits);
  const auto confusion = build_confusion_sets(vocab, plan.confusion_pool_size);
  auto noise_split = [&](const Dataset& split, double target, std::string_view key) {
    auto cal = calibrate_channel(target, plan.mode, split.examples, confusion,
                                 derive_seed(plan.seed, key), plan.confusion_pool_size);
    auto noisy = corrupt(split, cal.config, confusion);
    return std::pair{std::move(noisy), std::move(cal)};
  };
  auto [noisy_train, train_cal] = noise_split(clean_train, plan.train_wer, "noise-train");
  auto [noisy_dev, dev_cal] = noise_split(clean_dev, plan.dev_wer, "noise-dev");
  PreparedExperiment out{
      {std::move(clean_train), std::move(clean_dev), std::move(noisy_train),
       std::move(noisy_dev), std::move(vocab)},
      std::move(train_cal),
      std::move(dev_cal)};
  return out;
}

}  // namespace kdqa
