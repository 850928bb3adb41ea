#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "kdqa/error.hpp"
#include "kdqa/noise.hpp"
#include "support/tempdir.hpp"

using namespace kdqa;
using Tokens = std::vector<std::string>;

namespace {

Vocabulary vocab_of(const Tokens& tokens) { return Vocabulary(tokens); }

// Memoized recursion over (i, j) suffixes; deliberately not the row-rolling
// table used by the library.
std::size_t edit_distance(const Tokens& a, const Tokens& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = std::min(go(i + 1, j) + 1, go(i, j + 1) + 1);
    best = std::min(best, go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1));
    return memo[key] = best;
  };
  return go(0, 0);
}

std::size_t char_distance(const std::string& a, const std::string& b) {
  Tokens x, y;
  for (char c : a) x.emplace_back(1, c);
  for (char c : b) y.emplace_back(1, c);
  return edit_distance(x, y);
}

std::string random_word(std::mt19937_64& gen) {
  std::string w;
  const std::size_t len = 1 + gen() % 5;
  for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + gen() % 4);
  return w;
}

QaExample make_example(std::string id, Tokens doc, std::size_t s, std::size_t e) {
  QaExample ex;
  ex.id = std::move(id);
  ex.question_tokens = {"what", "is", "it"};
  ex.document_tokens = std::move(doc);
  ex.answer_start = s;
  ex.answer_end = e;
  ex.answer_text = join_tokens(std::span(ex.document_tokens).subspan(s, e - s + 1));
  return ex;
}

Dataset toy_dev() { return generate_toy_corpus({1, 500}, 11).second; }

}  // namespace

TEST_SUITE("noise") {
  TEST_CASE("char_levenshtein known values") {
    CHECK(char_levenshtein("kitten", "sitting") == 3);
    CHECK(char_levenshtein("", "abc") == 3);
    CHECK(char_levenshtein("same", "same") == 0);
  }

  TEST_CASE("confusion sets worked examples") {
    const auto single = build_confusion_sets(vocab_of({"a"}), 3);
    CHECK(single.candidates("a").empty());
    const auto three = build_confusion_sets(vocab_of({"cat", "bat", "dog"}), 1);
    CHECK(Tokens(three.candidates("cat").begin(), three.candidates("cat").end()) == Tokens{"bat"});
    CHECK(three.candidates("unseen").empty());
  }

  TEST_CASE("confusion sets match brute-force all-pairs ranking") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 5; ++trial) {
      std::set<std::string> words;
      while (words.size() < 50) words.insert(random_word(gen));
      const Tokens tokens(words.begin(), words.end());
      const std::size_t pool = 1 + trial * 2;
      const auto sets = build_confusion_sets(vocab_of(tokens), pool);
      for (const auto& t : tokens) {
        std::vector<std::pair<std::size_t, std::string>> all;
        for (const auto& u : tokens) {
          if (u != t) all.emplace_back(char_distance(t, u), u);
        }
        std::sort(all.begin(), all.end());
        Tokens expect;
        for (std::size_t k = 0; k < pool && k < all.size(); ++k) expect.push_back(all[k].second);
        CHECK(Tokens(sets.candidates(t).begin(), sets.candidates(t).end()) == expect);
      }
    }
  }

  TEST_CASE("channel config validation") {
    NoiseChannelConfig cfg;
    cfg.p_sub = 0.6;
    cfg.p_del = 0.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.mode = NoiseMode::substitution_only;
    cfg.p_ins = 0.1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.p_sub = -0.1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    CHECK(parse_noise_mode("sub") == NoiseMode::substitution_only);
    CHECK(parse_noise_mode("full") == NoiseMode::full);
    CHECK_THROWS_AS(parse_noise_mode("loud"), InvalidArgument);
  }

  TEST_CASE("identity channel leaves the example untouched") {
    auto ds = toy_dev();
    const Dataset splits[] = {ds};
    const auto confusion = build_confusion_sets(build_vocab(splits), 5);
    NoiseChannelConfig cfg;
    for (const auto& ex : ds.examples) {
      const auto n = corrupt(ex, cfg, confusion);
      CHECK(n.example == ex);
      CHECK(n.span_status == SpanStatus::exact);
      for (std::size_t i = 0; i < n.provenance.size(); ++i) CHECK(n.provenance[i] == static_cast<long>(i));
    }
  }

  TEST_CASE("full-strength substitution changes every token and keeps length") {
    const Tokens words = {"cat", "bat", "hat", "rat", "mat"};
    const auto confusion = build_confusion_sets(vocab_of(words), 2);
    NoiseChannelConfig cfg;
    cfg.mode = NoiseMode::substitution_only;
    cfg.p_sub = 1.0;
    for (int k = 0; k < 50; ++k) {
      const auto ex = make_example("s" + std::to_string(k), {"cat", "hat", "mat", "bat", "rat", "cat"}, 1, 2);
      const auto n = corrupt(ex, cfg, confusion);
      REQUIRE(n.example.document_tokens.size() == ex.document_tokens.size());
      for (std::size_t i = 0; i < ex.document_tokens.size(); ++i) {
        CHECK(n.example.document_tokens[i] != ex.document_tokens[i]);
        CHECK(n.provenance[i] == static_cast<long>(i));
      }
      CHECK(n.example.question_tokens == ex.question_tokens);
    }
  }

  TEST_CASE("span status agrees with an independent re-scan") {
    auto ds = toy_dev();
    const Dataset splits[] = {ds};
    const auto confusion = build_confusion_sets(build_vocab(splits), 5);
    std::map<SpanStatus, std::size_t> seen;
    for (double strength : {0.1, 0.3, 0.6}) {
      NoiseChannelConfig cfg;
      cfg.p_sub = 0.7 * strength;
      cfg.p_del = 0.15 * strength;
      cfg.p_ins = 0.15 * strength;
      cfg.seed = 5;
      for (const auto& ex : ds.examples) {
        const auto n = corrupt(ex, cfg, confusion);
        const auto& doc = n.example.document_tokens;
        REQUIRE(n.provenance.size() == doc.size());
        CHECK(n.example.question_tokens == ex.question_tokens);
        CHECK(n.example.answer_text == ex.answer_text);
        // Source positions appear in increasing order.
        long last = -1;
        for (long p : n.provenance) {
          if (p == kInsertedToken) continue;
          CHECK(p > last);
          last = p;
        }
        // Exact: every answer token kept verbatim at consecutive positions.
        std::vector<long> where(ex.document_tokens.size(), -1);
        for (std::size_t j = 0; j < doc.size(); ++j) {
          const long p = n.provenance[j];
          if (p != kInsertedToken && doc[j] == ex.document_tokens[static_cast<std::size_t>(p)]) {
            where[static_cast<std::size_t>(p)] = static_cast<long>(j);
          }
        }
        bool exact = true;
        for (std::size_t i = ex.answer_start; i <= ex.answer_end; ++i) {
          exact = exact && where[i] >= 0 &&
                  (i == ex.answer_start || where[i] == where[i - 1] + 1);
        }
        const Tokens answer = split_spaces(ex.answer_text);
        long first = -1;
        for (std::size_t j = 0; first < 0 && j + answer.size() <= doc.size(); ++j) {
          if (std::equal(answer.begin(), answer.end(), doc.begin() + j)) first = static_cast<long>(j);
        }
        if (exact) {
          CHECK(n.span_status == SpanStatus::exact);
          CHECK(n.example.answer_start == static_cast<std::size_t>(where[ex.answer_start]));
          CHECK(n.example.answer_end == static_cast<std::size_t>(where[ex.answer_end]));
        } else if (first >= 0) {
          CHECK(n.span_status == SpanStatus::relocated);
          CHECK(n.example.answer_start == static_cast<std::size_t>(first));
          CHECK(n.example.answer_end == first + answer.size() - 1);
        } else {
          CHECK(n.span_status == SpanStatus::lost);
        }
        if (n.span_status != SpanStatus::lost) CHECK_NOTHROW(validate_span(n.example));
        ++seen[n.span_status];
      }
    }
    CHECK(seen[SpanStatus::exact] > 0);
    CHECK(seen[SpanStatus::lost] > 0);
  }

  TEST_CASE("corrupt is deterministic and independent of corpus order") {
    auto ds = toy_dev();
    const Dataset splits[] = {ds};
    const auto confusion = build_confusion_sets(build_vocab(splits), 5);
    NoiseChannelConfig cfg;
    cfg.p_sub = 0.2;
    cfg.p_del = 0.05;
    cfg.p_ins = 0.05;
    cfg.seed = 77;
    const auto a = corrupt(ds, cfg, confusion);
    CHECK(a == corrupt(ds, cfg, confusion));
    auto reversed = ds;
    std::reverse(reversed.examples.begin(), reversed.examples.end());
    const auto b = corrupt(reversed, cfg, confusion);
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
      CHECK(a.examples[i] == b.examples[a.examples.size() - 1 - i]);
    }
  }

  TEST_CASE("substitution_only keeps length and identity provenance") {
    auto ds = toy_dev();
    const Dataset splits[] = {ds};
    const auto confusion = build_confusion_sets(build_vocab(splits), 5);
    NoiseChannelConfig cfg;
    cfg.mode = NoiseMode::substitution_only;
    cfg.p_sub = 0.4;
    for (const auto& n : corrupt(ds, cfg, confusion).examples) {
      for (std::size_t i = 0; i < n.provenance.size(); ++i) CHECK(n.provenance[i] == static_cast<long>(i));
    }
    const auto noisy = corrupt(ds, cfg, confusion);
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
      CHECK(noisy.examples[i].example.document_tokens.size() == ds.examples[i].document_tokens.size());
    }
  }

  TEST_CASE("a document is never emptied") {
    const auto confusion = build_confusion_sets(vocab_of({"x", "y"}), 1);
    NoiseChannelConfig cfg;
    cfg.p_del = 1.0;
    const auto n = corrupt(make_example("d", {"x", "y"}, 0, 0), cfg, confusion);
    CHECK(n.example.document_tokens == Tokens{"x"});
    CHECK(n.span_status == SpanStatus::exact);
  }

  TEST_CASE("word_error_rate worked examples") {
    const Tokens a = {"the", "cat", "sat"}, b = {"the", "bat", "sat"};
    CHECK(word_error_rate(a, a) == 0.0);
    CHECK(word_error_rate(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(word_error_rate(Tokens{}, a), InvalidArgument);
    CHECK(word_error_rate(Tokens{"a"}, Tokens{"b", "c", "d"}) == 3.0);
  }

  TEST_CASE("word_error_rate equals an exhaustive edit search") {
    std::mt19937_64 gen(99);
    const Tokens alphabet = {"x", "y", "z"};
    for (int trial = 0; trial < 2000; ++trial) {
      Tokens ref(1 + gen() % 8), hyp(gen() % 9);
      for (auto& t : ref) t = alphabet[gen() % 3];
      for (auto& t : hyp) t = alphabet[gen() % 3];
      const double wer = word_error_rate(ref, hyp);
      CHECK(wer == static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size()));
      const auto counts = align_words(ref, hyp);
      CHECK(counts.errors() == edit_distance(ref, hyp));
      CHECK(counts.reference_length == ref.size());
      // S + D - I bookkeeping: hyp length = ref - D + I.
      CHECK(hyp.size() + counts.deletions == ref.size() + counts.insertions);
      CHECK((wer == 0.0) == (ref == hyp));
      const double gap = std::abs(static_cast<double>(ref.size()) - static_cast<double>(hyp.size()));
      CHECK(wer >= gap / static_cast<double>(ref.size()));
    }
  }

  TEST_CASE("calibration worked examples") {
    const auto ds = toy_dev();
    const Dataset splits[] = {ds};
    const auto confusion = build_confusion_sets(build_vocab(splits), 5);
    const auto zero = calibrate_channel(0.0, NoiseMode::full, ds.examples, confusion, 1);
    CHECK(zero.measured_wer == 0.0);
    CHECK(zero.config.p_sub == 0.0);
    CHECK(zero.config.p_del == 0.0);
    CHECK(zero.config.p_ins == 0.0);

    const auto sub = calibrate_channel(0.2277, NoiseMode::substitution_only, ds.examples, confusion, 2);
    CHECK(sub.sample_words >= 10000);
    CHECK(sub.measured_wer >= 0.2177);
    CHECK(sub.measured_wer <= 0.2377);
    CHECK(sub.config.p_del == 0.0);
    CHECK(sub.config.p_ins == 0.0);

    const auto full = calibrate_channel(0.2273, NoiseMode::full, ds.examples, confusion, 3);
    CHECK(full.measured_wer >= 0.2173);
    CHECK(full.measured_wer <= 0.2373);
    CHECK(full.config.p_del == doctest::Approx(full.config.p_sub * 15.0 / 70.0));
    CHECK(full.config.p_ins == doctest::Approx(full.config.p_del));

    // The reported WER is what the returned channel produces.
    const auto noisy = corrupt(ds, full.config, confusion);
    CHECK(corpus_wer(ds.examples, noisy.examples) == full.measured_wer);
  }

  TEST_CASE("calibrated WER concentrates across seeds") {
    const auto ds = toy_dev();
    const Dataset splits[] = {ds};
    const auto confusion = build_confusion_sets(build_vocab(splits), 5);
    const auto cal = calibrate_channel(0.2277, NoiseMode::full, ds.examples, confusion, 1);
    int inside = 0;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      auto cfg = cal.config;
      cfg.seed = seed;
      const auto noisy = corrupt(ds, cfg, confusion);
      inside += std::abs(corpus_wer(ds.examples, noisy.examples) - 0.2277) <= kCalibrationTolerance;
    }
    CHECK(inside >= 19);
  }

  TEST_CASE("unreachable targets raise a calibration error with the best WER") {
    const auto ex = make_example("u", {"p", "q", "r", "s"}, 0, 0);
    const ConfusionSets nothing;
    const QaExample sample[] = {ex};
    try {
      calibrate_channel(0.5, NoiseMode::substitution_only, sample, nothing, 1);
      FAIL("expected a calibration error");
    } catch (const CalibrationError& e) {
      CHECK(e.best_wer() == 0.0);
    }
    CHECK_THROWS_AS(calibrate_channel(1.0, NoiseMode::full, sample, nothing, 1), InvalidArgument);
  }

  TEST_CASE("provenance sidecar round trip") {
    testing::TempDir dir;
    const auto ds = toy_dev();
    const Dataset splits[] = {ds};
    const auto confusion = build_confusion_sets(build_vocab(splits), 5);
    NoiseChannelConfig cfg;
    cfg.p_sub = 0.2;
    cfg.p_del = 0.05;
    cfg.p_ins = 0.05;
    const auto noisy = corrupt(ds, cfg, confusion);
    save_jsonl(noisy.as_dataset(), dir / "dev.jsonl");
    save_provenance_jsonl(noisy, dir / "dev.provenance.jsonl");
    CHECK(load_noised(dir / "dev.jsonl", dir / "dev.provenance.jsonl", "dev") == noisy);
    testing::write_file(dir / "bad.provenance.jsonl", "{\"id\":\"nope\"}\n");
    CHECK_THROWS_AS(load_noised(dir / "dev.jsonl", dir / "bad.provenance.jsonl"), ParseError);
  }
}
