#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kdqa {

/// One (question, document, answer span) triple. Span indices are
/// inclusive token positions into document_tokens.
struct QaExample {
  std::string id;
  std::vector<std::string> question_tokens;
  std::vector<std::string> document_tokens;
  std::size_t answer_start = 0;
  std::size_t answer_end = 0;
  std::string answer_text;

  bool operator==(const QaExample&) const = default;
};

/// Throws InvalidArgument naming the example id when the span is out of
/// bounds or the document is empty.
void validate_span(const QaExample& example);

struct Dataset {
  std::string split_name;
  std::vector<QaExample> examples;

  bool operator==(const Dataset&) const = default;
};

/// Span bounds of every example plus id uniqueness.
void validate(const Dataset& dataset);

// --- tokenization ----------------------------------------------------------

struct TokenOffset {
  std::string token;
  std::size_t begin = 0;  // byte offsets into the source text, [begin, end)
  std::size_t end = 0;
};

/// Lowercase, split on whitespace (ASCII and Unicode space separators),
/// strip leading/trailing ASCII punctuation from each piece, drop empties.
std::vector<std::string> tokenize(std::string_view text);
std::vector<TokenOffset> tokenize_with_offsets(std::string_view text);

std::string join_tokens(std::span<const std::string> tokens);
std::vector<std::string> split_spaces(std::string_view text);

// --- vocabulary ------------------------------------------------------------

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  /// Reserved slots followed by `tokens` in the given order.
  explicit Vocabulary(std::span<const std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  std::size_t index_of(std::string_view token) const;  // kUnk when absent
  const std::string& token(std::size_t index) const;
  /// All entries including the reserved ones.
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// Entries after the reserved slots.
  std::span<const std::string> regular_tokens() const;

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Tokens (questions and documents) with count >= min_count, ordered by
/// count descending then token ascending.
Vocabulary build_vocab(std::span<const Dataset> datasets, std::size_t min_count = 1);

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);

// --- synthetic corpus ------------------------------------------------------

struct ToyCorpusSpec {
  std::size_t train_size = 2000;
  std::size_t dev_size = 500;
  std::size_t min_entities = 2;
  std::size_t max_entities = 3;
  std::size_t min_facts = 2;  // per entity
  std::size_t max_facts = 3;
};

/// Word pools used by the generator; the pools are pairwise disjoint.
struct ToyLexicon {
  std::vector<std::string> entities;
  std::vector<std::string> attributes;
  std::vector<std::vector<std::string>> values;  // one pool per attribute
  std::vector<std::string> function_words;
};

const ToyLexicon& toy_lexicon();

std::pair<Dataset, Dataset> generate_toy_corpus(const ToyCorpusSpec& spec, std::uint64_t seed);

// --- files -----------------------------------------------------------------

std::string example_to_json_line(const QaExample& example);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_jsonl(const std::filesystem::path& path, std::string split_name = {});

struct SquadImport {
  Dataset dataset;
  std::size_t skipped = 0;
};

/// Reads the SQuAD v1.1 JSON layout, keeping the first answer of each
/// question and converting its character offset to a token span.
SquadImport import_squad(const std::filesystem::path& path, std::string split_name = "train");
SquadImport import_squad_text(std::string_view json_text, std::string split_name = "train");

}  // namespace kdqa
