#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kdqa/corpus.hpp"
#include "kdqa/rng.hpp"
#include "kdqa/tensor.hpp"

namespace kdqa {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t attention_heads = 2;
  std::size_t encoder_layers = 1;
  std::size_t max_answer_len = 8;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Named parameter tensors; std::map keeps iteration order stable, which
/// checksums and checkpoints rely on.
class ModelParams {
 public:
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void insert(std::string name, Tensor tensor);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  std::size_t parameter_count() const;
  std::vector<Tensor> tensors() const;  // handles, in name order
  const std::map<std::string, Tensor>& named() const { return tensors_; }

  /// Independent copy with fresh leaves.
  ModelParams clone() const;
  void zero_grad();

 private:
  std::map<std::string, Tensor> tensors_;
};

/// Declared parameter shapes for a configuration, in name order.
std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, unit layer-norm gains,
/// zero PAD embedding row. Deterministic in cfg.seed.
ModelParams init_params(const ModelConfig& cfg);

struct SpanLogits {
  Tensor start;
  Tensor end;
  std::size_t size() const { return start.numel(); }
};

struct ForwardOptions {
  bool train_mode = false;
  Rng* dropout_rng = nullptr;  // required when train_mode and dropout_rate > 0
};

SpanLogits forward(const ModelParams& params, const ModelConfig& cfg,
                   std::span<const std::size_t> question_ids,
                   std::span<const std::size_t> document_ids, ForwardOptions options = {});

/// Highest start[s] + end[e] over s <= e <= s + max_answer_len - 1; ties go
/// to the smallest s, then the smallest e.
std::pair<std::size_t, std::size_t> extract_span(std::span<const double> start,
                                                 std::span<const double> end,
                                                 std::size_t max_answer_len);
std::pair<std::size_t, std::size_t> extract_span(const SpanLogits& logits, std::size_t max_answer_len);

/// Sinusoidal position table, [length, dim].
Tensor positional_encoding(std::size_t length, std::size_t dim);

/// FNV-1a over every parameter's bit pattern in name order.
std::uint64_t params_checksum(const ModelParams& params);
std::string checksum_hex(std::uint64_t checksum);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  Vocabulary vocab;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const Vocabulary& vocab,
                     const std::filesystem::path& path);
std::string checkpoint_to_json(const ModelParams& params, const ModelConfig& cfg,
                               const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace kdqa
