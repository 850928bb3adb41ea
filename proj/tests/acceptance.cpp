// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Pass criterion numbers to run a subset.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "kdqa/distill.hpp"
#include "kdqa/eval.hpp"
#include "kdqa/noise.hpp"
#include "kdqa/ops.hpp"
#include "support/artifacts.hpp"
#include "support/gradcheck.hpp"
#include "support/metric_oracle.hpp"
#include "support/op_cases.hpp"

using namespace kdqa;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kMinGradCases = 100;
constexpr double kAlgebraTolerance = 1e-12;
constexpr double kTrainWer = 0.2277;
constexpr double kTestWer = 0.2273;
constexpr double kWerBand = 0.01;
constexpr std::size_t kMinSampleWords = 10000;
constexpr double kMinEmDrop = 0.05;
constexpr double kPaperAlpha = 0.9;
constexpr double kPaperTau = 2.0;
const std::vector<double> kTaus = {1, 2, 4, 6, 8, 10};
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

// Desk-scale training setup shared by the directional criteria.
constexpr std::size_t kTrainExamples = 2000;
constexpr std::size_t kDevExamples = 500;
constexpr std::size_t kWidth = 32;
constexpr double kLearningRate = 3e-3;
constexpr std::size_t kEpochs = 20;
constexpr std::size_t kSweepStudentEpochs = 10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Clean toy corpus plus the calibrated noisy views, built once.
const PreparedExperiment& experiment() {
  static const PreparedExperiment prepared = [] {
    auto [train, dev] = generate_toy_corpus({kTrainExamples, kDevExamples}, 2024);
    NoisePlan plan;
    plan.train_wer = kTrainWer;
    plan.dev_wer = kTestWer;
    plan.seed = 7;
    return prepare_experiment(std::move(train), std::move(dev), plan);
  }();
  return prepared;
}

ModelConfig model_config(std::size_t width) {
  ModelConfig cfg;
  cfg.vocab_size = experiment().data.vocab.size();
  cfg.embed_dim = width;
  cfg.hidden_dim = width;
  return cfg;
}

TrainConfig teacher_training() {
  TrainConfig tc;
  tc.lr = kLearningRate;
  tc.epochs = kEpochs;
  return tc;
}

DistillConfig paper_distill(std::size_t epochs = kEpochs) {
  DistillConfig dc;
  dc.alpha = kPaperAlpha;
  dc.tau = kPaperTau;
  dc.lr = kLearningRate;
  dc.epochs = epochs;
  return dc;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  std::size_t cases = 0, failures = 0;
  double worst = 0.0;
  std::string worst_name;
  auto record = [&](const std::string& name, double err) {
    ++cases;
    if (!(err < kGradTolerance)) ++failures;
    if (!(err <= worst)) {
      worst = err;
      worst_name = name;
    }
  };
  for (const auto& c : testing::op_gradient_cases(2718, 4)) {
    record(c.name, testing::gradient_error(c.loss, c.inputs, 1e-5));
  }
  // Full forward pass, every parameter, on random configurations.
  std::mt19937_64 gen(31);
  for (int k = 0; k < 12; ++k) {
    ModelConfig cfg;
    cfg.vocab_size = 10 + gen() % 10;
    cfg.attention_heads = 1 + gen() % 2;
    cfg.embed_dim = cfg.attention_heads * (2 + gen() % 3);
    cfg.hidden_dim = 2 + gen() % 5;
    cfg.encoder_layers = 1 + gen() % 2;
    cfg.dropout_rate = 0.0;
    cfg.seed = gen();
    const auto params = init_params(cfg);
    std::vector<std::size_t> q(1 + gen() % 4), d(1 + gen() % 7);
    for (auto& id : q) id = gen() % cfg.vocab_size;
    for (auto& id : d) id = gen() % cfg.vocab_size;
    std::vector<std::string> names;
    for (const auto& [name, t] : params.named()) names.push_back(name);
    std::vector<double> w(d.size());
    for (auto& x : w) x = std::uniform_real_distribution<double>(-1, 1)(gen);
    const std::size_t gs = gen() % d.size(), ge = gen() % d.size();
    testing::LossFn f = [&](const std::vector<Tensor>& in) {
      ModelParams p;
      for (std::size_t i = 0; i < names.size(); ++i) p.insert(names[i], in[i]);
      const auto out = forward(p, cfg, q, d);
      return add(dot(out.start, Tensor({d.size()}, w)), span_cross_entropy(out, gs, ge));
    };
    record("model_forward", testing::gradient_error(f, params.tensors(), 1e-5));
  }
  return {cases >= kMinGradCases && failures == 0,
          std::to_string(cases) + " cases, " + std::to_string(failures) + " over " + fmt(kGradTolerance, 6) +
              ", worst " + worst_name + " " + std::to_string(worst)};
}

Outcome loss_algebra() {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(-3, 3);
  double worst_ce = 0.0, worst_zero = 0.0, worst_teacher_grad = 0.0;
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(gen);
    return v;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + gen() % 12;
    const Shape shape{n};
    SpanLogits student{Tensor(shape, vec(n), true), Tensor(shape, vec(n), true)};
    SpanLogits teacher{Tensor(shape, vec(n), true), Tensor(shape, vec(n), true)};
    const std::size_t gs = gen() % n, ge = gen() % n;
    DistillConfig cfg;
    cfg.tau = 0.5 + 9.5 * std::abs(u(gen)) / 3.0;
    cfg.kl_direction = trial % 2 ? KlDirection::student_to_teacher : KlDirection::teacher_to_student;

    cfg.alpha = 0.0;
    worst_ce = std::max(worst_ce, std::abs(kd_loss(student, teacher, gs, ge, cfg).total.item() -
                                           span_cross_entropy(student, gs, ge).item()));

    cfg.alpha = 1.0;
    const SpanLogits same{student.start.detach(), student.end.detach()};
    worst_zero = std::max(worst_zero, std::abs(kd_loss(student, same, gs, ge, cfg).total.item()));

    cfg.alpha = std::abs(u(gen)) / 3.0;
    backward(kd_loss(student, teacher, gs, ge, cfg).total);
    for (const auto* t : {&teacher.start, &teacher.end}) {
      for (double g : t->grad()) worst_teacher_grad = std::max(worst_teacher_grad, std::abs(g));
    }
  }
  return {worst_ce <= kAlgebraTolerance && worst_zero <= kAlgebraTolerance && worst_teacher_grad == 0.0,
          "|alpha0 - CE| max " + std::to_string(worst_ce) + ", |alpha1 identical| max " +
              std::to_string(worst_zero) + ", teacher grad max " + std::to_string(worst_teacher_grad)};
}

Outcome wer_calibration() {
  const auto& clean = experiment().data;
  bool pass = true;
  std::string detail;
  for (auto mode : {NoiseMode::full, NoiseMode::substitution_only}) {
    NoisePlan plan;
    plan.train_wer = kTrainWer;
    plan.dev_wer = kTestWer;
    plan.mode = mode;
    plan.seed = 11;
    const auto prepared = prepare_experiment(clean.clean_train, clean.clean_dev, plan);
    const std::pair<const CalibrationResult*, double> runs[] = {{&prepared.train_calibration, kTrainWer},
                                                                {&prepared.dev_calibration, kTestWer}};
    // Recount the corruption independently from the saved documents.
    const std::pair<const Dataset*, const NoisedDataset*> views[] = {
        {&clean.clean_train, &prepared.data.noisy_train}, {&clean.clean_dev, &prepared.data.noisy_dev}};
    for (int i = 0; i < 2; ++i) {
      std::size_t edits = 0, words = 0;
      for (std::size_t k = 0; k < views[i].first->examples.size(); ++k) {
        const auto& ref = views[i].first->examples[k].document_tokens;
        const auto& hyp = views[i].second->examples[k].example.document_tokens;
        edits += align_words(ref, hyp).errors();
        words += ref.size();
      }
      const double measured = static_cast<double>(edits) / static_cast<double>(words);
      const bool ok = std::abs(measured - runs[i].second) <= kWerBand && words >= kMinSampleWords &&
                      measured == runs[i].first->measured_wer;
      pass = pass && ok;
      detail += std::string(to_string(mode)) + (i == 0 ? " train " : " test ") + fmt(measured) + " on " +
                std::to_string(words) + " words; ";
    }
  }
  return {pass, detail + "target " + fmt(kTrainWer) + "/" + fmt(kTestWer) + " +/- " + fmt(kWerBand, 2)};
}

Outcome metric_oracle() {
  bool pass = exact_match("cat sat", "cat sat") == 1 && f1_score("cat sat", "cat sat") == 1.0 &&
              exact_match("the cat", "cat sat") == 0 && f1_score("the cat", "cat sat") == 2.0 / 3.0 &&
              exact_match("", "cat") == 0 && f1_score("", "cat") == 0.0;
  const bool worked = pass;
  std::mt19937_64 gen(4);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = testing::random_answer(gen), g = testing::random_answer(gen);
    if (f1_score(p, g) != testing::oracle_f1(p, g) || exact_match(p, g) != testing::oracle_em(p, g)) {
      ++mismatches;
    }
  }
  pass = pass && mismatches == 0;
  return {pass, std::string("worked examples ") + (worked ? "exact" : "WRONG") + ", " +
                    std::to_string(mismatches) + "/1000 random pairs differ from the oracle"};
}

Outcome degradation() {
  const auto& data = experiment().data;
  std::vector<double> drops, clean_em, noisy_em;
  for (auto seed : kSeeds) {
    auto cfg = model_config(kWidth);
    cfg.seed = derive_seed(seed, "teacher-init");
    auto tc = teacher_training();
    tc.seed = derive_seed(seed, "teacher-train");
    const auto teacher = train_supervised(data.clean_train, data.vocab, cfg, tc);
    const auto clean = evaluate(teacher.params, cfg, data.vocab, data.clean_dev, cfg.max_answer_len);
    const auto noisy = evaluate(teacher.params, cfg, data.vocab, data.noisy_dev.as_dataset(), cfg.max_answer_len);
    clean_em.push_back(clean.em);
    noisy_em.push_back(noisy.em);
    drops.push_back(clean.em - noisy.em);
  }
  const double drop = median(drops);
  return {drop >= kMinEmDrop, "median EM clean " + fmt(median(clean_em)) + " vs noisy " + fmt(median(noisy_em)) +
                                  ", median per-seed drop " + fmt(drop) + " (need >= " + fmt(kMinEmDrop, 2) + ")"};
}

Outcome kd_direction() {
  const auto cfg = model_config(kWidth);
  const auto grid = run_kd_grid(experiment().data, cfg, cfg, teacher_training(), paper_distill(), kSeeds);
  const auto& kd = grid.median_cell("student+kd", "noisy_dev");
  const auto& alone = grid.median_cell("student", "noisy_dev");
  std::vector<double> gains;
  for (const auto& s : grid.per_seed) {
    double with = 0.0, without = 0.0;
    for (const auto& c : s.cells) {
      if (c.eval_set != "noisy_dev") continue;
      if (c.model == "student+kd") with = c.f1;
      if (c.model == "student") without = c.f1;
    }
    gains.push_back(with - without);
  }
  const double gain = median(gains);
  const bool pass = kd.em >= alone.em && kd.f1 >= alone.f1 && kd.f1 - alone.f1 > 0.0 && gain > 0.0;
  return {pass, "noisy dev median EM/F1 student+kd " + fmt(kd.em) + "/" + fmt(kd.f1) + " vs student " +
                    fmt(alone.em) + "/" + fmt(alone.f1) + ", median per-seed F1 gain " + fmt(gain)};
}

Outcome compression() {
  const auto big = model_config(kWidth);
  const auto small = model_config(kWidth / 2);
  const auto study = run_compression_study(experiment().data, big, small, teacher_training(), paper_distill(), kSeeds);
  const auto& kd = study.median_row("small+kd", "noisy");
  const auto& alone = study.median_row("small", "noisy");
  const bool pass = kd.f1 >= alone.f1 && study.small_parameters < study.big_parameters;
  return {pass, "noisy dev median F1 small+kd " + fmt(kd.f1) + " vs small " + fmt(alone.f1) + ", parameters " +
                    std::to_string(study.small_parameters) + " < " + std::to_string(study.big_parameters)};
}

Outcome temperature_sweep() {
  const auto cfg = model_config(kWidth);
  const auto report =
      run_tau_sweep(experiment().data, cfg, cfg, teacher_training(), paper_distill(kSweepStudentEpochs), kTaus, kSeeds);
  bool pass = report.rows.size() == kTaus.size();
  for (std::size_t i = 0; pass && i < kTaus.size(); ++i) pass = report.rows[i].tau == kTaus[i];

  // Parse the CSV back and check every line.
  std::istringstream in(sweep_csv(report));
  std::string line;
  std::getline(in, line);
  pass = pass && line == "tau,seed,em,f1";
  std::set<std::pair<double, std::uint64_t>> seen;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    std::istringstream row(line);
    std::string tau, seed, em, f1;
    const bool four = std::getline(row, tau, ',') && std::getline(row, seed, ',') && std::getline(row, em, ',') &&
                      std::getline(row, f1) && row.peek() == EOF;
    if (!four) {
      pass = false;
      continue;
    }
    const double e = std::stod(em), f = std::stod(f1);
    pass = pass && std::isfinite(e) && std::isfinite(f) && e >= 0 && e <= 1 && f >= 0 && f <= 1 && e <= f;
    seen.insert({std::stod(tau), std::stoull(seed)});
  }
  pass = pass && lines == kTaus.size() * kSeeds.size() && seen.size() == lines;
  std::string rows;
  for (const auto& r : report.rows) rows += " tau " + fmt(r.tau, 0) + ": " + fmt(r.em, 3) + "/" + fmt(r.f1, 3) + ";";
  return {pass, std::to_string(lines) + " CSV rows; median EM/F1" + rows};
}

Outcome reproducibility() {
  testing::TempDir dir;
  auto path = [&](const std::string& name) { return (dir / name).string(); };
  const std::string squad = R"({"version":"1.1","data":[{"title":"t","paragraphs":[{
      "context":"The capital of France is Paris. Its famous tower is the Eiffel Tower.",
      "qas":[
        {"id":"q1","question":"What is the capital of France?","answers":[{"text":"Paris","answer_start":25}]},
        {"id":"q2","question":"Which tower?","answers":[{"text":"the Eiffel Tower","answer_start":52}]}
      ]}]}]})";
  testing::write_file(dir / "squad.json", squad);

  const std::vector<std::string> tiny = {"--embed-dim", "8", "--hidden-dim", "8", "--epochs", "2"};
  const std::vector<std::string> harness = {"--clean", path("gen-a"), "--noisy", path("noise-a"), "--seeds", "1,2",
                                            "--teacher-epochs", "2"};
  auto cat = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  // Each command runs twice; inputs always come from the first run.
  struct Step {
    std::string name;
    std::function<std::vector<std::string>(const std::string&)> args;
    bool single_file = false;
  };
  const std::vector<Step> steps = {
      {"gen", [&](const std::string& o) { return std::vector<std::string>{"gen", "--train", "120", "--dev", "40", "--seed", "5", "--out", o}; }},
      {"import", [&](const std::string& o) { return std::vector<std::string>{"import", "--squad", path("squad.json"), "--dev", path("squad.json"), "--out", o}; }},
      {"noise", [&](const std::string& o) { return std::vector<std::string>{"noise", "--in", path("gen-a"), "--seed", "6", "--out", o}; }},
      {"train-teacher", [&](const std::string& o) { return cat({"train-teacher", "--data", path("gen-a"), "--seed", "7", "--out", o}, tiny); }},
      {"distill", [&](const std::string& o) { return cat({"distill", "--noisy", path("noise-a"), "--teacher", path("train-teacher-a") + "/checkpoint.json", "--seed", "8", "--out", o}, {"--epochs", "2"}); }},
      {"eval", [&](const std::string& o) { return std::vector<std::string>{"eval", "--ckpt", path("distill-a") + "/checkpoint.json", "--data", path("noise-a"), "--out", o + ".json"}; }, true},
      {"grid", [&](const std::string& o) { return cat(cat({"grid", "--out", o}, harness), tiny); }},
      {"sweep", [&](const std::string& o) { return cat(cat({"sweep", "--taus", "1,2", "--out", o}, harness), tiny); }},
      {"compress", [&](const std::string& o) { return cat(cat({"compress", "--out", o}, harness), tiny); }},
  };
  std::vector<std::string> problems;
  std::size_t files = 0;
  for (const auto& step : steps) {
    std::string failed;
    for (const char* run : {"-a", "-b"}) {
      const auto r = testing::run_kdqa(step.args(path(step.name + run)));
      if (r.code != 0) failed = step.name + " exited " + std::to_string(r.code) + ": " + r.err;
    }
    if (!failed.empty()) {
      problems.push_back(failed);
      continue;
    }
    if (step.single_file) {
      ++files;
      if (testing::read_file(path(step.name + "-a.json")) != testing::read_file(path(step.name + "-b.json"))) {
        problems.push_back(step.name + ": report differs");
      }
      continue;
    }
    for (const auto& e : std::filesystem::directory_iterator(dir / (step.name + "-a"))) {
      (void)e;
      ++files;
    }
    for (const auto& f : testing::differing_files(dir / (step.name + "-a"), dir / (step.name + "-b"))) {
      problems.push_back(step.name + ": " + f + " differs");
    }
  }
  std::string detail = std::to_string(steps.size()) + " commands run twice, " + std::to_string(files) +
                       " artifacts compared";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  std::vector<int> only;
  app.add_option("criteria", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int number;
    const char* name;
    double budget_seconds;  // 0 = no budget
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 60, gradient_correctness},
      {2, "loss algebra", 10, loss_algebra},
      {3, "WER calibration", 60, wer_calibration},
      {4, "metric oracle", 10, metric_oracle},
      {5, "degradation direction", 600, degradation},
      {6, "KD direction", 1200, kd_direction},
      {7, "compression direction", 0, compression},
      {8, "temperature sweep", 0, temperature_sweep},
      {9, "reproducibility", 0, reproducibility},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.number) == only.end()) continue;
    if (c.number >= 5 && c.number <= 8) experiment();  // data prep is not part of a criterion's runtime
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_seconds, 0) + "s budget";
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name << "): " << o.detail
              << " [" << fmt(secs, 1) << "s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
