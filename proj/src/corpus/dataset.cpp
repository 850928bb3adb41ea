#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "kdqa/corpus.hpp"
#include "kdqa/error.hpp"

namespace kdqa {

using ordered_json = nlohmann::ordered_json;

void validate_span(const QaExample& example) {
  if (example.document_tokens.empty()) {
    throw InvalidArgument("example '" + example.id + "': empty document");
  }
  if (example.answer_start > example.answer_end ||
      example.answer_end >= example.document_tokens.size()) {
    throw InvalidArgument("example '" + example.id + "': answer span [" +
                          std::to_string(example.answer_start) + ", " +
                          std::to_string(example.answer_end) + "] invalid for document of " +
                          std::to_string(example.document_tokens.size()) + " tokens");
  }
}

void validate(const Dataset& dataset) {
  std::unordered_set<std::string> seen;
  for (const auto& ex : dataset.examples) {
    validate_span(ex);
    if (!seen.insert(ex.id).second) {
      throw InvalidArgument("duplicate example id '" + ex.id + "' in split '" +
                            dataset.split_name + "'");
    }
  }
}

// --- vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::span<const std::string>{}) {}

Vocabulary::Vocabulary(std::span<const std::string> tokens) {
  tokens_.emplace_back(kPadToken);
  tokens_.emplace_back(kUnkToken);
  index_.emplace(std::string(kPadToken), kPad);
  index_.emplace(std::string(kUnkToken), kUnk);
  for (const auto& t : tokens) {
    if (index_.count(t)) throw InvalidArgument("vocabulary entry '" + t + "' repeated or reserved");
    index_.emplace(t, tokens_.size());
    tokens_.push_back(t);
  }
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) {
    throw InvalidArgument("vocabulary index " + std::to_string(index) + " out of range");
  }
  return tokens_[index];
}

std::span<const std::string> Vocabulary::regular_tokens() const {
  return std::span<const std::string>(tokens_).subspan(2);
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index_of(t));
  return ids;
}

Vocabulary build_vocab(std::span<const Dataset> datasets, std::size_t min_count) {
  if (min_count < 1) throw InvalidArgument("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& ds : datasets) {
    for (const auto& ex : ds.examples) {
      for (const auto& t : ex.question_tokens) ++counts[t];
      for (const auto& t : ex.document_tokens) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != Vocabulary::kPadToken && tok != Vocabulary::kUnkToken) {
      kept.emplace_back(tok, n);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary(tokens);
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write vocabulary to " + path.string());
  ordered_json j;
  j["tokens"] = vocab.regular_tokens();
  out << j.dump() << '\n';
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open vocabulary " + path.string());
  try {
    auto j = ordered_json::parse(in);
    auto tokens = j.at("tokens").get<std::vector<std::string>>();
    return Vocabulary(tokens);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// --- JSONL -----------------------------------------------------------------

std::string example_to_json_line(const QaExample& ex) {
  ordered_json j;
  j["id"] = ex.id;
  j["question"] = ex.question_tokens;
  j["document"] = ex.document_tokens;
  j["answer_start"] = ex.answer_start;
  j["answer_end"] = ex.answer_end;
  j["answer_text"] = ex.answer_text;
  return j.dump();
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& ex : dataset.examples) out << example_to_json_line(ex) << '\n';
  if (!out) throw ParseError("write failed for " + path.string());
}

namespace {

QaExample parse_example(const ordered_json& j) {
  QaExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.question_tokens = j.at("question").get<std::vector<std::string>>();
  ex.document_tokens = j.at("document").get<std::vector<std::string>>();
  const auto start = j.at("answer_start").get<long long>();
  const auto end = j.at("answer_end").get<long long>();
  ex.answer_text = j.at("answer_text").get<std::string>();
  if (start < 0 || end < 0) {
    throw InvalidArgument("example '" + ex.id + "': negative answer index");
  }
  ex.answer_start = static_cast<std::size_t>(start);
  ex.answer_end = static_cast<std::size_t>(end);
  return ex;
}

}  // namespace

Dataset load_jsonl(const std::filesystem::path& path, std::string split_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  Dataset ds;
  ds.split_name = split_name.empty() ? path.stem().string() : std::move(split_name);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    QaExample ex;
    try {
      ex = parse_example(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      validate_span(ex);
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(ex.id).second) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": duplicate example id '" +
                       ex.id + "'");
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// --- SQuAD -----------------------------------------------------------------

SquadImport import_squad_text(std::string_view json_text, std::string split_name) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("SQuAD file does not parse: ") + e.what());
  }
  SquadImport result;
  result.dataset.split_name = std::move(split_name);
  std::unordered_set<std::string> seen;
  try {
    for (const auto& article : root.at("data")) {
      for (const auto& para : article.at("paragraphs")) {
        const auto context = para.at("context").get<std::string>();
        const auto offsets = tokenize_with_offsets(context);
        std::vector<std::string> doc;
        doc.reserve(offsets.size());
        for (const auto& o : offsets) doc.push_back(o.token);
        for (const auto& qa : para.at("qas")) {
          const auto& answers = qa.at("answers");
          std::string id = qa.at("id").get<std::string>();
          if (answers.empty() || doc.empty() || seen.count(id)) {
            ++result.skipped;
            continue;
          }
          const auto text = answers[0].at("text").get<std::string>();
          auto char_start = answers[0].at("answer_start").get<long long>();
          if (char_start < 0 || static_cast<std::size_t>(char_start) + text.size() > context.size() ||
              context.compare(static_cast<std::size_t>(char_start), text.size(), text) != 0) {
            const auto found = context.find(text);
            if (text.empty() || found == std::string::npos) {
              ++result.skipped;
              continue;
            }
            char_start = static_cast<long long>(found);
          }
          const std::size_t a = static_cast<std::size_t>(char_start);
          const std::size_t b = a + text.size();
          std::size_t first = offsets.size(), last = offsets.size();
          for (std::size_t i = 0; i < offsets.size(); ++i) {
            if (offsets[i].end > a && offsets[i].begin < b) {
              if (first == offsets.size()) first = i;
              last = i;
            }
          }
          const auto answer_tokens = tokenize(text);
          if (first == offsets.size() || answer_tokens.empty() ||
              answer_tokens.size() != last - first + 1 ||
              !std::equal(answer_tokens.begin(), answer_tokens.end(),
                          doc.begin() + static_cast<std::ptrdiff_t>(first))) {
            ++result.skipped;
            continue;
          }
          QaExample ex;
          ex.id = id;
          ex.question_tokens = tokenize(qa.at("question").get<std::string>());
          ex.document_tokens = doc;
          ex.answer_start = first;
          ex.answer_end = last;
          ex.answer_text = join_tokens(answer_tokens);
          seen.insert(ex.id);
          result.dataset.examples.push_back(std::move(ex));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("SQuAD layout error: ") + e.what());
  }
  return result;
}

SquadImport import_squad(const std::filesystem::path& path, std::string split_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return import_squad_text(buf.str(), std::move(split_name));
}

}  // namespace kdqa
