#include <cmath>
#include <cstring>

#include "kdqa/error.hpp"
#include "kdqa/model.hpp"
#include "kdqa/ops.hpp"

namespace kdqa {

void ModelConfig::validate() const {
  if (vocab_size < 2) throw InvalidArgument("model config: vocab_size must cover PAD and UNK");
  if (embed_dim < 1 || hidden_dim < 1 || attention_heads < 1 || encoder_layers < 1 ||
      max_answer_len < 1) {
    throw InvalidArgument("model config: all dimensions must be >= 1");
  }
  if (embed_dim % attention_heads != 0) {
    throw InvalidArgument("model config: embed_dim " + std::to_string(embed_dim) +
                          " not divisible by attention_heads " + std::to_string(attention_heads));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("model config: dropout_rate must lie in [0, 1)");
  }
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvalidArgument("no parameter named '" + name + "'");
  return it->second;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvalidArgument("no parameter named '" + name + "'");
  return it->second;
}

void ModelParams::insert(std::string name, Tensor tensor) {
  tensors_.insert_or_assign(std::move(name), std::move(tensor));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.numel();
  return n;
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(t);
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  for (const auto& [name, t] : tensors_) copy.insert(name, t.clone(true));
  return copy;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

namespace {

std::string layer_name(std::size_t layer, const char* suffix) {
  return "encoder." + std::to_string(layer) + "." + suffix;
}

// fan-in used for the initialization range of each parameter
std::size_t fan_in(const std::string& name, const Shape& shape, const ModelConfig& cfg) {
  if (name == "embedding") return 1;
  if (name == "start_head" || name == "end_head") return 3 * cfg.hidden_dim;
  if (shape.size() == 2) return shape[0];
  if (name.ends_with("ffn_in_bias")) return cfg.embed_dim;
  if (name.ends_with("ffn_out_bias")) return cfg.hidden_dim;
  return cfg.embed_dim;  // projection biases
}

}  // namespace

std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg) {
  const std::size_t d = cfg.embed_dim, h = cfg.hidden_dim;
  std::map<std::string, Shape> shapes;
  shapes["embedding"] = {cfg.vocab_size, d};
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
    for (const char* w : {"attn_q", "attn_k", "attn_v", "attn_out"}) shapes[layer_name(l, w)] = {d, d};
    shapes[layer_name(l, "norm1_gain")] = {d};
    shapes[layer_name(l, "norm1_bias")] = {d};
    shapes[layer_name(l, "ffn_in")] = {d, h};
    shapes[layer_name(l, "ffn_in_bias")] = {h};
    shapes[layer_name(l, "ffn_out")] = {h, d};
    shapes[layer_name(l, "ffn_out_bias")] = {d};
    shapes[layer_name(l, "norm2_gain")] = {d};
    shapes[layer_name(l, "norm2_bias")] = {d};
  }
  shapes["question_proj"] = {d, h};
  shapes["question_proj_bias"] = {h};
  shapes["document_proj"] = {d, h};
  shapes["document_proj_bias"] = {h};
  shapes["bilinear"] = {h, h};
  shapes["start_head"] = {3 * h};
  shapes["end_head"] = {3 * h};
  return shapes;
}

ModelParams init_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams params;
  for (const auto& [name, shape] : parameter_shapes(cfg)) {
    std::vector<double> values(shape_numel(shape));
    if (name.ends_with("_gain")) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (name.ends_with("norm1_bias") || name.ends_with("norm2_bias")) {
      std::fill(values.begin(), values.end(), 0.0);
    } else {
      Rng rng(derive_seed(cfg.seed, name));
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(name, shape, cfg)));
      for (auto& v : values) v = rng.uniform(-bound, bound);
    }
    if (name == "embedding") {
      std::fill_n(values.begin(), cfg.embed_dim, 0.0);  // PAD row
    }
    params.insert(name, Tensor(shape, std::move(values), true));
  }
  return params;
}

Tensor positional_encoding(std::size_t length, std::size_t dim) {
  std::vector<double> pe(length * dim);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor({length, dim}, std::move(pe));
}

namespace {

Tensor maybe_dropout(const Tensor& x, const ModelConfig& cfg, const ForwardOptions& opt) {
  if (!opt.train_mode || cfg.dropout_rate == 0.0) return x;
  return dropout(x, cfg.dropout_rate, *opt.dropout_rng);
}

Tensor row_times_matrix(const Tensor& row, const Tensor& matrix) {
  return reshape(matmul(reshape(row, {1, row.numel()}), matrix), {matrix.dim(1)});
}

Tensor encoder_block(const ModelParams& p, const ModelConfig& cfg, std::size_t layer,
                     const Tensor& x, const ForwardOptions& opt) {
  const std::size_t d = cfg.embed_dim;
  const std::size_t heads = cfg.attention_heads;
  const std::size_t head_dim = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Tensor q = matmul(x, p.at(layer_name(layer, "attn_q")));
  const Tensor k = matmul(x, p.at(layer_name(layer, "attn_k")));
  const Tensor v = matmul(x, p.at(layer_name(layer, "attn_v")));
  std::vector<Tensor> head_out;
  head_out.reserve(heads);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const Tensor qh = heads == 1 ? q : slice_cols(q, hd * head_dim, head_dim);
    const Tensor kh = heads == 1 ? k : slice_cols(k, hd * head_dim, head_dim);
    const Tensor vh = heads == 1 ? v : slice_cols(v, hd * head_dim, head_dim);
    const Tensor weights = softmax_temp(scale(matmul_nt(qh, kh), inv_sqrt), 1.0);
    head_out.push_back(matmul(weights, vh));
  }
  const Tensor merged = heads == 1 ? head_out[0] : concat_cols(head_out);
  Tensor attn = maybe_dropout(matmul(merged, p.at(layer_name(layer, "attn_out"))), cfg, opt);
  Tensor h1 = layer_norm(add(x, attn), p.at(layer_name(layer, "norm1_gain")),
                         p.at(layer_name(layer, "norm1_bias")));

  Tensor ff = relu(add_row(matmul(h1, p.at(layer_name(layer, "ffn_in"))),
                           p.at(layer_name(layer, "ffn_in_bias"))));
  ff = add_row(matmul(ff, p.at(layer_name(layer, "ffn_out"))), p.at(layer_name(layer, "ffn_out_bias")));
  ff = maybe_dropout(ff, cfg, opt);
  return layer_norm(add(h1, ff), p.at(layer_name(layer, "norm2_gain")),
                    p.at(layer_name(layer, "norm2_bias")));
}

void check_ids(std::span<const std::size_t> ids, std::size_t vocab_size, const char* what) {
  for (auto id : ids) {
    if (id >= vocab_size) {
      throw InvalidArgument(std::string("forward: ") + what + " token id " + std::to_string(id) +
                            " out of range for vocabulary of " + std::to_string(vocab_size));
    }
  }
}

}  // namespace

SpanLogits forward(const ModelParams& params, const ModelConfig& cfg,
                   std::span<const std::size_t> question_ids,
                   std::span<const std::size_t> document_ids, ForwardOptions options) {
  if (document_ids.empty()) throw InvalidArgument("forward: empty document");
  if (question_ids.empty()) throw InvalidArgument("forward: empty question");
  check_ids(document_ids, cfg.vocab_size, "document");
  check_ids(question_ids, cfg.vocab_size, "question");
  if (options.train_mode && cfg.dropout_rate > 0.0 && options.dropout_rng == nullptr) {
    throw InvalidArgument("forward: train mode with dropout needs a random source");
  }
  const std::size_t length = document_ids.size();
  const Tensor& embedding = params.at("embedding");

  Tensor x = add(gather_rows(embedding, document_ids), positional_encoding(length, cfg.embed_dim));
  x = maybe_dropout(x, cfg, options);
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l) x = encoder_block(params, cfg, l, x, options);

  // [L, h] document view and [h] pooled question view.
  const Tensor doc = add_row(matmul(x, params.at("document_proj")), params.at("document_proj_bias"));
  const Tensor question_mean = mean_rows(gather_rows(embedding, question_ids));
  const Tensor question = add(row_times_matrix(question_mean, params.at("question_proj")),
                              params.at("question_proj_bias"));

  // Bilinear question-to-document attention.
  const Tensor query = matvec(params.at("bilinear"), question);
  const Tensor attention = softmax_temp(matvec(doc, query), 1.0);
  const Tensor summary = row_times_matrix(attention, doc);

  const Tensor parts[] = {doc, mul_row(doc, query), mul_row(doc, summary)};
  const Tensor fused = concat_cols(parts);

  SpanLogits out;
  out.start = matvec(fused, params.at("start_head"));
  out.end = matvec(fused, params.at("end_head"));
  return out;
}

std::pair<std::size_t, std::size_t> extract_span(std::span<const double> start,
                                                 std::span<const double> end,
                                                 std::size_t max_answer_len) {
  if (start.empty() || start.size() != end.size()) {
    throw InvalidArgument("extract_span: start/end logits must be non-empty and equal length");
  }
  if (max_answer_len < 1) throw InvalidArgument("extract_span: max_answer_len must be >= 1");
  std::pair<std::size_t, std::size_t> best{0, 0};
  double best_score = start[0] + end[0];
  for (std::size_t s = 0; s < start.size(); ++s) {
    const std::size_t last = std::min(start.size() - 1, s + max_answer_len - 1);
    for (std::size_t e = s; e <= last; ++e) {
      const double score = start[s] + end[e];
      if (score > best_score) {
        best_score = score;
        best = {s, e};
      }
    }
  }
  return best;
}

std::pair<std::size_t, std::size_t> extract_span(const SpanLogits& logits,
                                                 std::size_t max_answer_len) {
  return extract_span(logits.start.values(), logits.end.values(), max_answer_len);
}

std::uint64_t params_checksum(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : params.named()) {
    feed(name.data(), name.size());
    for (double v : t.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      feed(&bits, sizeof bits);
    }
  }
  return h;
}

std::string checksum_hex(std::uint64_t checksum) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kHex[checksum & 0xF];
    checksum >>= 4;
  }
  return s;
}

}  // namespace kdqa
