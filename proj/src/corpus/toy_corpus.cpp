#include <algorithm>
#include <array>
#include <set>
#include <unordered_set>

#include "kdqa/corpus.hpp"
#include "kdqa/error.hpp"
#include "kdqa/rng.hpp"

namespace kdqa {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

constexpr std::array<std::string_view, 8> kAttributes = {
    "color", "capital", "founder", "river", "mascot", "currency", "anthem", "festival"};

constexpr std::array<std::string_view, 14> kFunctionWords = {
    "the", "of", "is", "what", "has", "a", "called", "for", "was", "which", "does", "have",
    "name", "known"};

constexpr std::size_t kEntityCount = 40;
constexpr std::size_t kValuesPerAttribute = 20;

// pattern: 'C' consonant, 'V' vowel.
std::string pseudo_word(Rng& rng, std::string_view pattern) {
  std::string w;
  for (char c : pattern) {
    w.push_back(c == 'C' ? kConsonants[rng.below(kConsonants.size())]
                         : kVowels[rng.below(kVowels.size())]);
  }
  return w;
}

std::vector<std::string> unique_words(Rng& rng, std::string_view pattern, std::size_t n,
                                      std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (out.size() < n) {
    auto w = pseudo_word(rng, pattern);
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

ToyLexicon make_lexicon() {
  ToyLexicon lex;
  std::set<std::string> taken;
  for (auto w : kFunctionWords) {
    lex.function_words.emplace_back(w);
    taken.emplace(w);
  }
  for (auto w : kAttributes) {
    lex.attributes.emplace_back(w);
    taken.emplace(w);
  }
  Rng rng(0x70795eedULL);
  lex.entities = unique_words(rng, "CVCVC", kEntityCount, taken);
  for (std::size_t a = 0; a < kAttributes.size(); ++a) {
    lex.values.push_back(unique_words(rng, (a % 2 == 0) ? "CVCV" : "CVCVCV", kValuesPerAttribute, taken));
  }
  return lex;
}

struct Fact {
  std::size_t entity;
  std::size_t attribute;
  std::vector<std::string> value;
};

void render_fact(const ToyLexicon& lex, const Fact& f, std::size_t tmpl,
                 std::vector<std::string>& doc, std::size_t& value_start) {
  const auto& ent = lex.entities[f.entity];
  const auto& attr = lex.attributes[f.attribute];
  auto push = [&](std::initializer_list<std::string_view> words) {
    for (auto w : words) doc.emplace_back(w);
  };
  switch (tmpl) {
    case 0:
      push({"the", attr, "of", ent, "is"});
      break;
    case 1:
      push({ent, "has", "a", attr, "called"});
      break;
    default:
      push({"for", ent, "the", attr, "was"});
      break;
  }
  value_start = doc.size();
  doc.insert(doc.end(), f.value.begin(), f.value.end());
}

std::vector<std::string> render_question(const ToyLexicon& lex, const Fact& f, std::size_t tmpl) {
  const auto& ent = lex.entities[f.entity];
  const auto& attr = lex.attributes[f.attribute];
  switch (tmpl) {
    case 0:
      return {"what", "is", "the", attr, "of", ent};
    case 1:
      return {"which", attr, "does", ent, "have"};
    default:
      return {"name", "the", attr, "of", ent};
  }
}

std::size_t count_occurrences(const std::vector<std::string>& doc,
                              const std::vector<std::string>& needle) {
  std::size_t n = 0;
  if (needle.empty() || needle.size() > doc.size()) return 0;
  for (std::size_t i = 0; i + needle.size() <= doc.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), doc.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
  }
  return n;
}

QaExample make_example(const ToyLexicon& lex, const ToyCorpusSpec& spec, Rng& rng, std::string id) {
  while (true) {
    const std::size_t n_ent =
        spec.min_entities + rng.below(spec.max_entities - spec.min_entities + 1);
    std::vector<std::size_t> ents;
    while (ents.size() < n_ent) {
      auto e = rng.below(lex.entities.size());
      if (std::find(ents.begin(), ents.end(), e) == ents.end()) ents.push_back(e);
    }
    std::vector<Fact> facts;
    for (auto e : ents) {
      const std::size_t n_fact = spec.min_facts + rng.below(spec.max_facts - spec.min_facts + 1);
      std::vector<std::size_t> attrs;
      while (attrs.size() < n_fact) {
        auto a = rng.below(lex.attributes.size());
        if (std::find(attrs.begin(), attrs.end(), a) == attrs.end()) attrs.push_back(a);
      }
      for (auto a : attrs) {
        Fact f{e, a, {}};
        const double r = rng.uniform();
        const std::size_t len = r < 0.4 ? 1 : (r < 0.8 ? 2 : 3);
        const auto& pool = lex.values[a];
        while (f.value.size() < len) {
          const auto& w = pool[rng.below(pool.size())];
          if (std::find(f.value.begin(), f.value.end(), w) == f.value.end()) f.value.push_back(w);
        }
        facts.push_back(std::move(f));
      }
    }
    rng.shuffle(std::span<Fact>(facts));
    const std::size_t target = rng.below(facts.size());
    std::vector<std::string> doc;
    std::size_t answer_start = 0;
    for (std::size_t i = 0; i < facts.size(); ++i) {
      std::size_t vs = 0;
      render_fact(lex, facts[i], rng.below(3), doc, vs);
      if (i == target) answer_start = vs;
    }
    const auto& answer = facts[target].value;
    if (count_occurrences(doc, answer) != 1) continue;
    QaExample ex;
    ex.id = std::move(id);
    ex.question_tokens = render_question(lex, facts[target], rng.below(3));
    ex.document_tokens = std::move(doc);
    ex.answer_start = answer_start;
    ex.answer_end = answer_start + answer.size() - 1;
    ex.answer_text = join_tokens(answer);
    return ex;
  }
}

std::string pair_key(const QaExample& ex) {
  return join_tokens(ex.question_tokens) + "|" + join_tokens(ex.document_tokens);
}

std::string make_id(std::string_view split, std::size_t i) {
  std::string num = std::to_string(i);
  return std::string(split) + "-" + std::string(num.size() < 6 ? 6 - num.size() : 0, '0') + num;
}

}  // namespace

const ToyLexicon& toy_lexicon() {
  static const ToyLexicon lex = make_lexicon();
  return lex;
}

std::pair<Dataset, Dataset> generate_toy_corpus(const ToyCorpusSpec& spec, std::uint64_t seed) {
  if (spec.train_size < 1 || spec.dev_size < 1) {
    throw InvalidArgument("toy corpus sizes must be >= 1");
  }
  if (spec.min_entities < 1 || spec.max_entities < spec.min_entities || spec.min_facts < 1 ||
      spec.max_facts < spec.min_facts || spec.max_facts > kAttributes.size() ||
      spec.max_entities > kEntityCount) {
    throw InvalidArgument("toy corpus entity/fact ranges are inconsistent");
  }
  const auto& lex = toy_lexicon();
  std::pair<Dataset, Dataset> out;
  out.first.split_name = "train";
  out.second.split_name = "dev";

  std::unordered_set<std::string> train_keys;
  Rng train_rng(derive_seed(seed, "toy-train"));
  for (std::size_t i = 0; i < spec.train_size; ++i) {
    auto ex = make_example(lex, spec, train_rng, make_id("train", i));
    train_keys.insert(pair_key(ex));
    out.first.examples.push_back(std::move(ex));
  }
  Rng dev_rng(derive_seed(seed, "toy-dev"));
  for (std::size_t i = 0; i < spec.dev_size; ++i) {
    QaExample ex;
    do {
      ex = make_example(lex, spec, dev_rng, make_id("dev", i));
    } while (train_keys.count(pair_key(ex)));
    out.second.examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace kdqa
