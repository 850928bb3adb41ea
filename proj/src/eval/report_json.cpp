#include "kdqa/report_json.hpp"

namespace kdqa {

Json to_json(const ModelConfig& cfg) {
  Json j;
  j["vocab_size"] = cfg.vocab_size;
  j["embed_dim"] = cfg.embed_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["attention_heads"] = cfg.attention_heads;
  j["encoder_layers"] = cfg.encoder_layers;
  j["max_answer_len"] = cfg.max_answer_len;
  j["dropout_rate"] = cfg.dropout_rate;
  j["seed"] = cfg.seed;
  return j;
}

Json to_json(const TrainConfig& cfg) {
  Json j;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  return j;
}

Json to_json(const DistillConfig& cfg) {
  Json j;
  j["alpha"] = cfg.alpha;
  j["tau"] = cfg.tau;
  j["kl_direction"] = std::string(to_string(cfg.kl_direction));
  j["teacher_input"] = std::string(to_string(cfg.teacher_input));
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["drop_lost_spans"] = cfg.drop_lost_spans;
  return j;
}

Json to_json(const NoiseChannelConfig& cfg) {
  Json j;
  j["p_sub"] = cfg.p_sub;
  j["p_del"] = cfg.p_del;
  j["p_ins"] = cfg.p_ins;
  j["mode"] = std::string(to_string(cfg.mode));
  j["confusion_pool_size"] = cfg.confusion_pool_size;
  j["seed"] = cfg.seed;
  return j;
}

Json to_json(const TrainReport& report) {
  Json j;
  Json epochs = Json::array();
  for (const auto& e : report.epochs) {
    Json row;
    row["loss"] = e.loss;
    if (report.distilled) {
      row["kl"] = e.kl;
      row["ce"] = e.ce;
    }
    epochs.push_back(std::move(row));
  }
  j["epochs"] = std::move(epochs);
  j["checksum"] = checksum_hex(report.checksum);
  j["seed"] = report.seed;
  j["examples_used"] = report.examples_used;
  j["examples_dropped"] = report.examples_dropped;
  j["distilled"] = report.distilled;
  return j;
}

Json to_json(const EvalReport& report) {
  Json j;
  j["em"] = report.em;
  j["f1"] = report.f1;
  j["n_examples"] = report.n_examples;
  j["fingerprint"] = report.fingerprint;
  j["unknown_token_rate"] = report.unknown_token_rate;
  j["warnings"] = report.warnings;
  Json rows = Json::array();
  for (const auto& s : report.per_example) {
    Json r;
    r["id"] = s.id;
    r["predicted_text"] = s.predicted_text;
    r["gold_text"] = s.gold_text;
    r["em"] = s.em;
    r["f1"] = s.f1;
    rows.push_back(std::move(r));
  }
  j["per_example"] = std::move(rows);
  return j;
}

namespace {

Json cells_json(const std::vector<ScoreCell>& cells) {
  Json arr = Json::array();
  for (const auto& c : cells) {
    Json r;
    r["model"] = c.model;
    r["eval_set"] = c.eval_set;
    r["em"] = c.em;
    r["f1"] = c.f1;
    arr.push_back(std::move(r));
  }
  return arr;
}

Json rows_json(const std::vector<CompressionRow>& rows) {
  Json arr = Json::array();
  for (const auto& c : rows) {
    Json r;
    r["model"] = c.model;
    r["training_data"] = c.training_data;
    r["eval_data"] = c.eval_data;
    r["parameters"] = c.parameters;
    r["em"] = c.em;
    r["f1"] = c.f1;
    arr.push_back(std::move(r));
  }
  return arr;
}

}  // namespace

Json to_json(const GridReport& report) {
  Json j;
  j["teacher_config"] = to_json(report.teacher_config);
  j["student_config"] = to_json(report.student_config);
  j["teacher_training"] = to_json(report.teacher_training);
  j["distill"] = to_json(report.distill);
  Json seeds = Json::array();
  for (const auto& s : report.per_seed) {
    Json r;
    r["seed"] = s.seed;
    r["cells"] = cells_json(s.cells);
    seeds.push_back(std::move(r));
  }
  j["per_seed"] = std::move(seeds);
  j["median"] = cells_json(report.median);
  return j;
}

Json to_json(const SweepReport& report) {
  Json j;
  j["teacher_config"] = to_json(report.teacher_config);
  j["student_config"] = to_json(report.student_config);
  j["teacher_training"] = to_json(report.teacher_training);
  j["distill"] = to_json(report.distill);
  j["seeds"] = report.seeds;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row;
    row["tau"] = r.tau;
    row["em"] = r.em;
    row["f1"] = r.f1;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  Json points = Json::array();
  for (const auto& p : report.points) {
    Json row;
    row["tau"] = p.tau;
    row["seed"] = p.seed;
    row["em"] = p.em;
    row["f1"] = p.f1;
    points.push_back(std::move(row));
  }
  j["points"] = std::move(points);
  return j;
}

Json to_json(const CompressionReport& report) {
  Json j;
  j["big_config"] = to_json(report.big_config);
  j["small_config"] = to_json(report.small_config);
  j["teacher_training"] = to_json(report.teacher_training);
  j["distill"] = to_json(report.distill);
  j["seeds"] = report.seeds;
  j["big_parameters"] = report.big_parameters;
  j["small_parameters"] = report.small_parameters;
  Json per_seed = Json::array();
  for (const auto& rows : report.per_seed) per_seed.push_back(rows_json(rows));
  j["per_seed"] = std::move(per_seed);
  j["median"] = rows_json(report.median);
  return j;
}

}  // namespace kdqa
