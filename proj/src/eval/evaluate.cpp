#include <algorithm>

#include "kdqa/error.hpp"
#include "kdqa/eval.hpp"
#include "kdqa/rng.hpp"

namespace kdqa {

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, const Vocabulary& vocab,
                    const Dataset& dataset, std::size_t max_answer_len) {
  if (dataset.examples.empty()) throw InvalidArgument("evaluate: dataset is empty");
  if (cfg.vocab_size != vocab.size()) {
    throw ConfigError("evaluate: model expects " + std::to_string(cfg.vocab_size) +
                      " vocabulary entries, got " + std::to_string(vocab.size()));
  }
  NoGradGuard no_grad;
  EvalReport report;
  std::size_t tokens = 0, unknown = 0;
  std::uint64_t data_hash = 0;
  for (const auto& ex : dataset.examples) {
    data_hash ^= derive_seed(0, ex.id);
    const auto q = vocab.encode(ex.question_tokens);
    const auto d = vocab.encode(ex.document_tokens);
    for (auto id : q) unknown += id == Vocabulary::kUnk;
    for (auto id : d) unknown += id == Vocabulary::kUnk;
    tokens += q.size() + d.size();

    ExampleScore score;
    score.id = ex.id;
    score.gold_text = ex.answer_text;
    if (!d.empty() && !q.empty()) {
      const auto logits = forward(params, cfg, q, d);
      const auto [s, e] = extract_span(logits, max_answer_len);
      score.predicted_text = join_tokens(
          std::span<const std::string>(ex.document_tokens).subspan(s, e - s + 1));
    }
    score.em = exact_match(score.predicted_text, score.gold_text);
    score.f1 = f1_score(score.predicted_text, score.gold_text);
    report.per_example.push_back(std::move(score));
  }
  report.n_examples = report.per_example.size();
  // Sum in id order so aggregates do not depend on dataset order.
  std::vector<const ExampleScore*> by_id;
  for (const auto& s : report.per_example) by_id.push_back(&s);
  std::sort(by_id.begin(), by_id.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const auto* s : by_id) {
    report.em += s->em;
    report.f1 += s->f1;
  }
  report.em /= static_cast<double>(report.n_examples);
  report.f1 /= static_cast<double>(report.n_examples);
  report.unknown_token_rate = tokens ? static_cast<double>(unknown) / static_cast<double>(tokens) : 0.0;
  if (report.unknown_token_rate > 0.99) {
    report.warnings.push_back("vocabulary mismatch: " + std::to_string(report.unknown_token_rate) +
                              " of tokens are unknown to the model");
  }
  report.fingerprint = checksum_hex(params_checksum(params)) + "-" + checksum_hex(data_hash) + "-" +
                       std::to_string(max_answer_len);
  return report;
}

}  // namespace kdqa
