#include "kdqa/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "kdqa/corpus.hpp"
#include "kdqa/distill.hpp"
#include "kdqa/error.hpp"
#include "kdqa/eval.hpp"
#include "kdqa/model.hpp"
#include "kdqa/noise.hpp"
#include "kdqa/report_json.hpp"

namespace kdqa {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
  if (!out) throw ParseError("write failed for " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path make_out_dir(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ParseError("cannot create output directory " + out);
  return dir;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::string_view rest = text;
  while (true) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    const auto value = parse_number<T>(item);
    if (!value) {
      throw UsageError(std::string(flag) + ": '" + std::string(item) + "' is not a number");
    }
    out.push_back(*value);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

// One manifest per artifact directory. Written before the work starts and
// rewritten with results once it ends.
class Manifest {
 public:
  Manifest(std::string command, fs::path dir) : path_(std::move(dir) / "manifest.json") {
    j_["command"] = std::move(command);
    j_["version"] = std::string(kToolVersion);
    j_["config"] = Json::object();
    j_["inputs"] = Json::object();
    j_["out"] = path_.parent_path().string();
    j_["outputs"] = Json::array();
    j_["seeds"] = Json::array();
    j_["results"] = Json::object();
    j_["started_at"] = nullptr;
    j_["finished_at"] = nullptr;
  }

  Json& config() { return j_["config"]; }
  Json& results() { return j_["results"]; }
  void input(const std::string& name, const std::string& path) { j_["inputs"][name] = path; }
  void output(const std::string& file) { j_["outputs"].push_back(file); }
  void seeds(std::span<const std::uint64_t> seeds) {
    for (auto s : seeds) j_["seeds"].push_back(s);
  }

  void begin() {
    j_["started_at"] = utc_now();
    write_json(path_, j_);
  }
  void finish() {
    j_["finished_at"] = utc_now();
    write_json(path_, j_);
  }

 private:
  fs::path path_;
  Json j_;
};

fs::path split_file(const fs::path& dir, const std::string& split) { return dir / (split + ".jsonl"); }
fs::path provenance_file(const fs::path& dir, const std::string& split) {
  return dir / (split + ".provenance.jsonl");
}

Dataset load_split(const fs::path& dir, const std::string& split) {
  return load_jsonl(split_file(dir, split), split);
}

// Noised splits carry a provenance sidecar; plain splits get identity
// provenance.
NoisedDataset load_split_noised(const fs::path& dir, const std::string& split) {
  if (fs::exists(provenance_file(dir, split))) {
    return load_noised(split_file(dir, split), provenance_file(dir, split), split);
  }
  return as_clean_noised(load_split(dir, split));
}

Json span_status_counts(const NoisedDataset& noisy) {
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& ex : noisy.examples) ++counts[static_cast<int>(ex.span_status)];
  Json j;
  for (auto s : {SpanStatus::exact, SpanStatus::relocated, SpanStatus::lost}) {
    j[std::string(to_string(s))] = counts[static_cast<int>(s)];
  }
  return j;
}

// --- flag groups -----------------------------------------------------------

struct ModelFlags {
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t attention_heads = 2;
  std::size_t encoder_layers = 1;
  std::size_t max_answer_len = 8;
  double dropout_rate = 0.1;
  std::vector<CLI::Option*> options;

  void add(CLI::App& cmd) {
    options = {
        cmd.add_option("--embed-dim", embed_dim, "token embedding width")->check(CLI::PositiveNumber),
        cmd.add_option("--hidden-dim", hidden_dim, "projection width")->check(CLI::PositiveNumber),
        cmd.add_option("--heads", attention_heads, "attention heads")->check(CLI::PositiveNumber),
        cmd.add_option("--layers", encoder_layers, "encoder blocks")->check(CLI::PositiveNumber),
        cmd.add_option("--max-answer-len", max_answer_len, "longest predicted span")
            ->check(CLI::PositiveNumber),
        cmd.add_option("--dropout", dropout_rate, "dropout rate")->check(CLI::Range(0.0, 0.99)),
    };
  }

  ModelConfig config(std::size_t vocab_size, std::uint64_t seed) const {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.embed_dim = embed_dim;
    cfg.hidden_dim = hidden_dim;
    cfg.attention_heads = attention_heads;
    cfg.encoder_layers = encoder_layers;
    cfg.max_answer_len = max_answer_len;
    cfg.dropout_rate = dropout_rate;
    cfg.seed = seed;
    return cfg;
  }

  // Keeps `base` for every flag the user did not set.
  ModelConfig overlay(ModelConfig base) const {
    const auto set = [&](std::size_t i) { return options[i]->count() > 0; };
    if (set(0)) base.embed_dim = embed_dim;
    if (set(1)) base.hidden_dim = hidden_dim;
    if (set(2)) base.attention_heads = attention_heads;
    if (set(3)) base.encoder_layers = encoder_layers;
    if (set(4)) base.max_answer_len = max_answer_len;
    if (set(5)) base.dropout_rate = dropout_rate;
    return base;
  }
};

struct DistillFlags {
  double alpha = 0.9;
  double tau = 2.0;
  std::string kl_direction = "teacher_to_student";
  std::string teacher_input = "student_view";
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  bool keep_lost_spans = false;

  void add(CLI::App& cmd) {
    cmd.add_option("--alpha", alpha, "weight of the distillation term")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--tau", tau, "softmax temperature")->check(CLI::PositiveNumber);
    cmd.add_option("--kl-direction", kl_direction)
        ->check(CLI::IsMember({"teacher_to_student", "student_to_teacher"}));
    cmd.add_option("--teacher-input", teacher_input, "document the teacher reads")
        ->check(CLI::IsMember({"student_view", "clean_paired"}));
    cmd.add_option("--lr", lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
    cmd.add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    cmd.add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);
    cmd.add_flag("--keep-lost-spans", keep_lost_spans,
                 "train on examples whose answer did not survive the noise");
  }

  DistillConfig config(std::uint64_t seed) const {
    DistillConfig cfg;
    cfg.alpha = alpha;
    cfg.tau = tau;
    cfg.kl_direction = parse_kl_direction(kl_direction);
    cfg.teacher_input = parse_teacher_input(teacher_input);
    cfg.lr = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.drop_lost_spans = !keep_lost_spans;
    return cfg;
  }
};

// --- commands --------------------------------------------------------------

struct GenArgs {
  std::size_t train = 2000;
  std::size_t dev = 500;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  ToyCorpusSpec spec;
  spec.train_size = a.train;
  spec.dev_size = a.dev;
  const auto dir = make_out_dir(a.out);
  Manifest m("gen", dir);
  m.config() = {{"train_size", spec.train_size},     {"dev_size", spec.dev_size},
                {"min_entities", spec.min_entities}, {"max_entities", spec.max_entities},
                {"min_facts", spec.min_facts},       {"max_facts", spec.max_facts},
                {"seed", a.seed}};
  const std::uint64_t seeds[] = {a.seed};
  m.seeds(seeds);
  m.begin();
  auto [train, dev] = generate_toy_corpus(spec, a.seed);
  save_jsonl(train, dir / "train.jsonl");
  save_jsonl(dev, dir / "dev.jsonl");
  const Dataset both[] = {train, dev};
  const auto vocab = build_vocab(both);
  save_vocab(vocab, dir / "vocab.json");
  for (const char* f : {"train.jsonl", "dev.jsonl", "vocab.json"}) m.output(f);
  m.results() = {{"train_examples", train.examples.size()},
                 {"dev_examples", dev.examples.size()},
                 {"vocab_size", vocab.size()}};
  m.finish();
  out << "gen: " << train.examples.size() << " train, " << dev.examples.size()
      << " dev examples, vocabulary " << vocab.size() << "\n";
  return 0;
}

struct ImportArgs {
  std::string squad;
  std::string dev;
  std::size_t min_count = 1;
  std::string out;
};

int cmd_import(const ImportArgs& a, std::ostream& out) {
  const auto dir = make_out_dir(a.out);
  Manifest m("import", dir);
  m.config() = {{"min_count", a.min_count}};
  m.input("squad", a.squad);
  if (!a.dev.empty()) m.input("dev", a.dev);
  m.begin();
  std::vector<Dataset> splits;
  std::vector<std::pair<std::string, std::string>> sources = {{"train", a.squad}};
  if (!a.dev.empty()) sources.emplace_back("dev", a.dev);
  for (const auto& [split, path] : sources) {
    auto imported = import_squad(path, split);
    save_jsonl(imported.dataset, split_file(dir, split));
    m.output(split + ".jsonl");
    m.results()[split] = {{"examples", imported.dataset.examples.size()},
                          {"skipped", imported.skipped}};
    out << "import " << split << ": " << imported.dataset.examples.size() << " examples, "
        << imported.skipped << " skipped\n";
    splits.push_back(std::move(imported.dataset));
  }
  const auto vocab = build_vocab(splits, a.min_count);
  save_vocab(vocab, dir / "vocab.json");
  m.output("vocab.json");
  m.results()["vocab_size"] = vocab.size();
  m.finish();
  return 0;
}

struct NoiseArgs {
  std::string in;
  double target_wer = 0.2277;
  double dev_target_wer = 0.2273;
  std::string mode = "full";
  std::uint64_t seed = 0;
  std::size_t pool_size = 5;
  std::string out;
};

int cmd_noise(const NoiseArgs& a, std::ostream& out) {
  const fs::path in(a.in);
  const auto mode = parse_noise_mode(a.mode);
  const auto vocab = load_vocab(in / "vocab.json");
  std::vector<std::string> splits;
  for (const char* s : {"train", "dev"}) {
    if (fs::exists(split_file(in, s))) splits.emplace_back(s);
  }
  if (splits.empty()) throw ParseError("no train.jsonl or dev.jsonl under " + a.in);
  const auto dir = make_out_dir(a.out);
  Manifest m("noise", dir);
  m.config() = {{"target_wer", a.target_wer}, {"dev_target_wer", a.dev_target_wer},
                {"mode", std::string(to_string(mode))}, {"confusion_pool_size", a.pool_size},
                {"seed", a.seed}};
  m.input("in", a.in);
  const std::uint64_t seeds[] = {a.seed};
  m.seeds(seeds);
  m.begin();
  const auto confusion = build_confusion_sets(vocab, a.pool_size);
  for (const auto& split : splits) {
    const auto clean = load_split(in, split);
    const double target = split == "dev" ? a.dev_target_wer : a.target_wer;
    // Each split gets its own channel, calibrated on its own documents.
    const auto cal = calibrate_channel(target, mode, clean.examples, confusion,
                                       derive_seed(a.seed, "noise-" + split), a.pool_size);
    const auto noisy = corrupt(clean, cal.config, confusion);
    save_jsonl(noisy.as_dataset(), split_file(dir, split));
    save_provenance_jsonl(noisy, provenance_file(dir, split));
    m.output(split + ".jsonl");
    m.output(split + ".provenance.jsonl");
    m.results()[split] = {{"target_wer", target},
                          {"measured_wer", cal.measured_wer},
                          {"rounds", cal.rounds},
                          {"sample_words", cal.sample_words},
                          {"channel", to_json(cal.config)},
                          {"span_status", span_status_counts(noisy)}};
    out << "noise " << split << ": target WER " << target << ", measured " << cal.measured_wer
        << "\n";
  }
  save_vocab(vocab, dir / "vocab.json");
  m.output("vocab.json");
  m.finish();
  return 0;
}

struct TrainArgs {
  std::string data;
  ModelFlags model;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool keep_lost_spans = false;
  std::string out;
};

int cmd_train_teacher(const TrainArgs& a, std::ostream& out) {
  const fs::path data(a.data);
  const auto vocab = load_vocab(data / "vocab.json");
  const auto train = usable_examples(load_split_noised(data, "train"), !a.keep_lost_spans);
  const auto cfg = a.model.config(vocab.size(), derive_seed(a.seed, "init"));
  const TrainConfig tc{a.lr, a.epochs, a.batch_size, derive_seed(a.seed, "train")};
  cfg.validate();
  tc.validate();
  const auto dir = make_out_dir(a.out);
  Manifest m("train-teacher", dir);
  m.config() = {{"model", to_json(cfg)}, {"training", to_json(tc)},
                {"keep_lost_spans", a.keep_lost_spans}};
  m.input("data", a.data);
  const std::uint64_t seeds[] = {a.seed};
  m.seeds(seeds);
  m.begin();
  const auto result = train_supervised(train, vocab, cfg, tc);
  save_checkpoint(result.params, cfg, vocab, dir / "checkpoint.json");
  write_json(dir / "train_report.json", to_json(result.report));
  m.output("checkpoint.json");
  m.output("train_report.json");
  m.results() = {{"checksum", checksum_hex(result.report.checksum)},
                 {"final_loss", result.report.epochs.back().loss},
                 {"examples_used", result.report.examples_used},
                 {"wall_seconds", result.report.wall_seconds}};
  m.finish();
  out << "train-teacher: checksum " << checksum_hex(result.report.checksum) << ", final loss "
      << result.report.epochs.back().loss << "\n";
  return 0;
}

struct DistillArgs {
  std::string noisy;
  std::string teacher;
  std::string clean;
  ModelFlags model;
  DistillFlags distill;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_distill(const DistillArgs& a, std::ostream& out) {
  const fs::path noisy_dir(a.noisy);
  const auto teacher = load_checkpoint(a.teacher);
  const auto vocab = load_vocab(noisy_dir / "vocab.json");
  if (!(vocab == teacher.vocab)) {
    throw ConfigError("vocabulary of " + a.noisy + " differs from the teacher checkpoint");
  }
  const auto cfg = a.distill.config(derive_seed(a.seed, "train"));
  auto student_cfg = a.model.overlay(teacher.config);
  student_cfg.seed = derive_seed(a.seed, "init");
  student_cfg.validate();
  cfg.validate();
  std::optional<Dataset> clean;
  if (cfg.teacher_input == TeacherInput::clean_paired) {
    if (a.clean.empty()) throw ConfigError("--teacher-input clean_paired needs --clean DIR");
    clean = load_split(a.clean, "train");
  }
  const auto noisy = load_split_noised(noisy_dir, "train");
  const auto dir = make_out_dir(a.out);
  Manifest m("distill", dir);
  m.config() = {{"student", to_json(student_cfg)},
                {"teacher", to_json(teacher.config)},
                {"distill", to_json(cfg)}};
  m.input("noisy", a.noisy);
  m.input("teacher", a.teacher);
  if (!a.clean.empty()) m.input("clean", a.clean);
  const std::uint64_t seeds[] = {a.seed};
  m.seeds(seeds);
  m.begin();
  const auto result = distill_student(noisy, teacher.params, teacher.config, student_cfg, vocab,
                                      cfg, clean ? &*clean : nullptr);
  save_checkpoint(result.params, student_cfg, vocab, dir / "checkpoint.json");
  write_json(dir / "train_report.json", to_json(result.report));
  m.output("checkpoint.json");
  m.output("train_report.json");
  m.results() = {{"checksum", checksum_hex(result.report.checksum)},
                 {"final_loss", result.report.epochs.back().loss},
                 {"examples_used", result.report.examples_used},
                 {"examples_dropped", result.report.examples_dropped},
                 {"wall_seconds", result.report.wall_seconds}};
  m.finish();
  out << "distill: checksum " << checksum_hex(result.report.checksum) << ", final loss "
      << result.report.epochs.back().loss << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string split = "dev";
  std::size_t max_answer_len = 0;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto ckpt = load_checkpoint(a.ckpt);
  const auto dataset = load_split(a.data, a.split);
  const std::size_t max_len = a.max_answer_len ? a.max_answer_len : ckpt.config.max_answer_len;
  const auto report = evaluate(ckpt.params, ckpt.config, ckpt.vocab, dataset, max_len);
  const fs::path path(a.out);
  if (path.has_parent_path()) make_out_dir(path.parent_path().string());
  write_json(path, to_json(report));
  out << "eval: em " << report.em << ", f1 " << report.f1 << " over " << report.n_examples
      << " examples\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return 0;
}

struct HarnessArgs {
  std::string clean;
  std::string noisy;
  std::string seeds;
  std::string taus = "1,2,4,6,8,10";
  ModelFlags model;
  std::size_t student_embed_dim = 0;
  std::size_t student_hidden_dim = 0;
  double teacher_lr = 1e-3;
  std::size_t teacher_epochs = 10;
  DistillFlags distill;
  std::string out;

  void add(CLI::App& cmd, bool sweep) {
    cmd.add_option("--clean", clean, "clean corpus directory")->required();
    cmd.add_option("--noisy", noisy, "noised corpus directory")->required();
    cmd.add_option("--seeds", seeds, "comma-separated run seeds")->required();
    if (sweep) cmd.add_option("--taus", taus, "comma-separated temperatures");
    model.add(cmd);
    cmd.add_option("--student-embed-dim", student_embed_dim)->check(CLI::PositiveNumber);
    cmd.add_option("--student-hidden-dim", student_hidden_dim)->check(CLI::PositiveNumber);
    cmd.add_option("--teacher-lr", teacher_lr)->check(CLI::NonNegativeNumber);
    cmd.add_option("--teacher-epochs", teacher_epochs)->check(CLI::PositiveNumber);
    distill.add(cmd);
    cmd.add_option("--out", out, "output directory")->required();
  }
};

struct HarnessSetup {
  ExperimentData data;
  ModelConfig teacher;
  ModelConfig student;
  TrainConfig teacher_training;
  DistillConfig distill;
  std::vector<std::uint64_t> seeds;
};

// Student widths default to the teacher's, or to half of them when `halve`.
HarnessSetup load_harness(const HarnessArgs& a, bool halve) {
  HarnessSetup s;
  s.seeds = parse_list<std::uint64_t>(a.seeds, "--seeds");
  const fs::path clean(a.clean), noisy(a.noisy);
  s.data.vocab = load_vocab(clean / "vocab.json");
  if (!(load_vocab(noisy / "vocab.json") == s.data.vocab)) {
    throw ConfigError("vocabularies of " + a.clean + " and " + a.noisy + " differ");
  }
  s.data.clean_train = load_split(clean, "train");
  s.data.clean_dev = load_split(clean, "dev");
  s.data.noisy_train = load_split_noised(noisy, "train");
  s.data.noisy_dev = load_split_noised(noisy, "dev");
  s.teacher = a.model.config(s.data.vocab.size(), 0);
  s.student = s.teacher;
  const auto shrink = [&](std::size_t v) { return halve ? std::max<std::size_t>(1, v / 2) : v; };
  s.student.embed_dim = a.student_embed_dim ? a.student_embed_dim : shrink(s.teacher.embed_dim);
  s.student.hidden_dim =
      a.student_hidden_dim ? a.student_hidden_dim : shrink(s.teacher.hidden_dim);
  s.teacher.validate();
  s.student.validate();
  s.teacher_training = {a.teacher_lr, a.teacher_epochs, a.distill.batch_size, 0};
  s.teacher_training.validate();
  s.distill = a.distill.config(0);
  s.distill.validate();
  return s;
}

Manifest begin_harness(const std::string& command, const fs::path& dir, const HarnessArgs& a,
                       const HarnessSetup& s) {
  Manifest m(command, dir);
  m.config() = {{"teacher", to_json(s.teacher)},
                {"student", to_json(s.student)},
                {"teacher_training", to_json(s.teacher_training)},
                {"distill", to_json(s.distill)}};
  m.input("clean", a.clean);
  m.input("noisy", a.noisy);
  m.seeds(s.seeds);
  m.begin();
  return m;
}

int cmd_grid(const HarnessArgs& a, std::ostream& out) {
  const auto s = load_harness(a, false);
  const auto dir = make_out_dir(a.out);
  auto m = begin_harness("grid", dir, a, s);
  const auto report = run_kd_grid(s.data, s.teacher, s.student, s.teacher_training, s.distill, s.seeds);
  write_json(dir / "grid.json", to_json(report));
  m.output("grid.json");
  m.finish();
  for (const auto& c : report.median) {
    out << "grid median " << c.model << " " << c.eval_set << ": em " << c.em << ", f1 " << c.f1
        << "\n";
  }
  return 0;
}

int cmd_sweep(const HarnessArgs& a, std::ostream& out) {
  const auto taus = parse_list<double>(a.taus, "--taus");
  const auto s = load_harness(a, false);
  const auto dir = make_out_dir(a.out);
  auto m = begin_harness("sweep", dir, a, s);
  m.config()["taus"] = taus;
  const auto report =
      run_tau_sweep(s.data, s.teacher, s.student, s.teacher_training, s.distill, taus, s.seeds);
  write_json(dir / "sweep.json", to_json(report));
  write_text(dir / "sweep.csv", sweep_csv(report));
  m.output("sweep.json");
  m.output("sweep.csv");
  m.finish();
  for (const auto& r : report.rows) {
    out << "sweep tau " << r.tau << ": em " << r.em << ", f1 " << r.f1 << "\n";
  }
  return 0;
}

int cmd_compress(const HarnessArgs& a, std::ostream& out) {
  const auto s = load_harness(a, true);
  const auto dir = make_out_dir(a.out);
  auto m = begin_harness("compress", dir, a, s);
  const auto report =
      run_compression_study(s.data, s.teacher, s.student, s.teacher_training, s.distill, s.seeds);
  write_json(dir / "compress.json", to_json(report));
  m.output("compress.json");
  m.results() = {{"big_parameters", report.big_parameters},
                 {"small_parameters", report.small_parameters}};
  m.finish();
  for (const auto& r : report.median) {
    out << "compress median " << r.model << " (" << r.parameters << " params) on "
        << r.eval_data << ": em " << r.em << ", f1 " << r.f1 << "\n";
  }
  return 0;
}

// --- config files ------------------------------------------------------------

std::string config_value(const std::string& key, const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) {
      if (!item.is_number() && !item.is_string()) {
        throw ConfigError("config key '" + key + "': list items must be numbers or strings");
      }
      if (!joined.empty()) joined += ',';
      joined += item.is_string() ? item.get<std::string>() : item.dump();
    }
    return joined;
  }
  throw ConfigError("config key '" + key + "' has an unsupported value");
}

struct ConfigArgs {
  std::vector<std::string> flags;  // "--name=value", config order
  std::vector<std::string> names;  // "--name"
};

// Reads --config FILE from the subcommand's arguments. Keys mirror flag
// names ("embed-dim" or "embed_dim").
ConfigArgs read_config(std::span<const std::string> args) {
  ConfigArgs cfg;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return cfg;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config file " + path + " does not parse: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") throw ConfigError("config file may not name another config");
    cfg.names.push_back("--" + name);
    cfg.flags.push_back("--" + name + "=" + config_value(key, value));
  }
  return cfg;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge distillation for spoken-style extractive QA on a toy corpus", "kdqa"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate the toy train/dev corpus");
  gen_cmd->add_option("--train", gen.train, "training examples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dev", gen.dev, "dev examples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed)->required();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  ImportArgs imp;
  auto* import_cmd = app.add_subcommand("import", "convert SQuAD v1.1 JSON to JSONL");
  import_cmd->add_option("--squad", imp.squad, "SQuAD file for the train split")->required();
  import_cmd->add_option("--dev", imp.dev, "optional SQuAD file for the dev split");
  import_cmd->add_option("--min-count", imp.min_count, "vocabulary cutoff")->check(CLI::PositiveNumber);
  import_cmd->add_option("--out", imp.out, "output directory")->required();

  NoiseArgs noise;
  auto* noise_cmd = app.add_subcommand("noise", "calibrate the noise channel and corrupt a corpus");
  noise_cmd->add_option("--in", noise.in, "clean corpus directory")->required();
  noise_cmd->add_option("--target-wer", noise.target_wer, "target WER of the train split")
      ->check(CLI::Range(0.0, 1.0));
  noise_cmd->add_option("--dev-target-wer", noise.dev_target_wer, "target WER of the dev split")
      ->check(CLI::Range(0.0, 1.0));
  noise_cmd->add_option("--mode", noise.mode)->check(CLI::IsMember({"full", "sub", "substitution_only"}));
  noise_cmd->add_option("--seed", noise.seed)->required();
  noise_cmd->add_option("--pool-size", noise.pool_size, "confusion candidates per token")
      ->check(CLI::PositiveNumber);
  noise_cmd->add_option("--out", noise.out, "output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-teacher", "train a span model with cross entropy");
  train_cmd->add_option("--data", train.data, "corpus directory (train split)")->required();
  train.model.add(*train_cmd);
  train_cmd->add_option("--lr", train.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", train.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed)->required();
  train_cmd->add_flag("--keep-lost-spans", train.keep_lost_spans,
                      "train on noised examples whose answer was lost");
  train_cmd->add_option("--out", train.out, "output directory")->required();

  DistillArgs dist;
  auto* distill_cmd = app.add_subcommand("distill", "train a student against a teacher checkpoint");
  distill_cmd->add_option("--noisy", dist.noisy, "noised corpus directory")->required();
  distill_cmd->add_option("--teacher", dist.teacher, "teacher checkpoint")->required();
  distill_cmd->add_option("--clean", dist.clean, "clean corpus directory for clean_paired");
  dist.model.add(*distill_cmd);
  dist.distill.add(*distill_cmd);
  distill_cmd->add_option("--seed", dist.seed)->required();
  distill_cmd->add_option("--out", dist.out, "output directory")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint with EM and F1");
  eval_cmd->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
  eval_cmd->add_option("--data", ev.data, "corpus directory")->required();
  eval_cmd->add_option("--split", ev.split, "split to score");
  eval_cmd->add_option("--max-answer-len", ev.max_answer_len, "0 keeps the checkpoint's value");
  eval_cmd->add_option("--out", ev.out, "report file")->required();

  HarnessArgs sweep, grid, compress;
  auto* sweep_cmd = app.add_subcommand("sweep", "distill once per temperature and seed");
  sweep.add(*sweep_cmd, true);
  auto* grid_cmd = app.add_subcommand("grid", "teacher / student / student+kd grid");
  grid.add(*grid_cmd, false);
  auto* compress_cmd = app.add_subcommand("compress", "big teacher into half-width student");
  compress.add(*compress_cmd, false);

  for (auto* cmd : app.get_subcommands({})) {
    cmd->add_option("--config", "JSON file whose keys mirror flag names; flags win");
  }

  try {
    // Config values go in front of the command-line flags so the latter win.
    std::vector<std::string> argv(args.begin(), args.end());
    const auto sub = std::find_if(argv.begin(), argv.end(),
                                  [](const std::string& a) { return !a.starts_with("-"); });
    if (sub != argv.end()) {
      if (auto* cmd = app.get_subcommand_no_throw(*sub)) {
        const auto cfg = read_config(std::span(sub + 1, argv.end()));
        for (const auto& name : cfg.names) {
          if (name == "--help" || !cmd->get_option_no_throw(name)) {
            throw ConfigError("config key '" + name.substr(2) + "' is not a flag of " + *sub);
          }
        }
        argv.insert(sub + 1, cfg.flags.begin(), cfg.flags.end());
      }
    }
    std::reverse(argv.begin(), argv.end());
    try {
      app.parse(argv);
    } catch (const CLI::Success& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      err << "error: usage: " << one_line(e.what()) << "\n";
      return 2;
    }

    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (import_cmd->parsed()) return cmd_import(imp, out);
    if (noise_cmd->parsed()) return cmd_noise(noise, out);
    if (train_cmd->parsed()) return cmd_train_teacher(train, out);
    if (distill_cmd->parsed()) return cmd_distill(dist, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out);
    if (grid_cmd->parsed()) return cmd_grid(grid, out);
    if (compress_cmd->parsed()) return cmd_compress(compress, out);
    err << "error: usage: no command given\n";
    return 2;
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: config: " << one_line(e.what()) << "\n";
  } catch (const CalibrationError& e) {
    err << "error: calibration: " << one_line(e.what()) << "\n";
  } catch (const ParseError& e) {
    err << "error: data: " << one_line(e.what()) << "\n";
  } catch (const CheckpointError& e) {
    err << "error: checkpoint: " << one_line(e.what()) << "\n";
  } catch (const InvalidArgument& e) {
    err << "error: config: " << one_line(e.what()) << "\n";
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
  }
  return 1;
}

}  // namespace kdqa
