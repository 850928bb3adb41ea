#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kdqa/error.hpp"
#include "kdqa/model.hpp"

namespace kdqa {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json config_json(const ModelConfig& cfg) {
  ordered_json j;
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

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  cfg.attention_heads = j.at("attention_heads").get<std::size_t>();
  cfg.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  cfg.max_answer_len = j.at("max_answer_len").get<std::size_t>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

std::string checkpoint_to_json(const ModelParams& params, const ModelConfig& cfg,
                               const Vocabulary& vocab) {
  ordered_json root;
  root["version"] = kCheckpointVersion;
  root["config"] = config_json(cfg);
  ordered_json tensors = ordered_json::object();
  for (const auto& [name, t] : params.named()) {
    ordered_json entry;
    entry["shape"] = t.shape();
    entry["values"] = std::vector<double>(t.values().begin(), t.values().end());
    tensors[name] = std::move(entry);
  }
  root["params"] = std::move(tensors);
  root["vocab"] = vocab.regular_tokens();
  return root.dump();
}

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params, cfg, vocab) << '\n';
  if (!out) throw CheckpointError("write failed for checkpoint " + path.string());
}

Checkpoint checkpoint_from_json(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint does not parse: ") + e.what());
  }
  try {
    const int version = root.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    ck.config = config_from_json(root.at("config"));
    try {
      ck.config.validate();
    } catch (const InvalidArgument& e) {
      throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
    const auto expected = parameter_shapes(ck.config);
    const auto& tensors = root.at("params");
    for (const auto& [name, shape] : expected) {
      if (!tensors.contains(name)) throw CheckpointError("checkpoint lacks parameter '" + name + "'");
      const auto& entry = tensors.at(name);
      const auto stored = entry.at("shape").get<Shape>();
      if (stored != shape) {
        throw CheckpointError("shape mismatch for parameter '" + name + "': stored " +
                              shape_str(stored) + ", config implies " + shape_str(shape));
      }
      auto values = entry.at("values").get<std::vector<double>>();
      if (values.size() != shape_numel(shape)) {
        throw CheckpointError("parameter '" + name + "' has " + std::to_string(values.size()) +
                              " values for shape " + shape_str(shape));
      }
      ck.params.insert(name, Tensor(shape, std::move(values), true));
    }
    for (const auto& item : tensors.items()) {
      if (!expected.count(item.key())) {
        throw CheckpointError("unexpected parameter '" + item.key() + "' in checkpoint");
      }
    }
    if (root.contains("vocab")) {
      auto tokens = root.at("vocab").get<std::vector<std::string>>();
      ck.vocab = Vocabulary(tokens);
      if (ck.vocab.size() != ck.config.vocab_size) {
        throw CheckpointError("checkpoint vocabulary has " + std::to_string(ck.vocab.size()) +
                              " entries but config says " + std::to_string(ck.config.vocab_size));
      }
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace kdqa
