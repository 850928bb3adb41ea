#include <algorithm>
#include <numeric>

#include "kdqa/error.hpp"
#include "kdqa/noise.hpp"

namespace kdqa {

ConfusionSets::ConfusionSets(std::vector<std::string> insertion_pool,
                             std::unordered_map<std::string, std::vector<std::string>> candidates)
    : pool_(std::move(insertion_pool)), table_(std::move(candidates)) {}

std::span<const std::string> ConfusionSets::candidates(std::string_view token) const {
  auto it = table_.find(std::string(token));
  if (it == table_.end()) return {};
  return it->second;
}

std::size_t char_levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

ConfusionSets build_confusion_sets(const Vocabulary& vocab, std::size_t pool_size) {
  if (pool_size < 1) throw InvalidArgument("confusion pool size must be >= 1");
  const auto regular = vocab.regular_tokens();
  std::vector<std::string> tokens(regular.begin(), regular.end());
  std::unordered_map<std::string, std::vector<std::string>> table;
  std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (distance, index)
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ranked.clear();
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      if (j != i) ranked.emplace_back(char_levenshtein(tokens[i], tokens[j]), j);
    }
    const std::size_t k = std::min(pool_size, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                      [&](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first < b.first;
                        return tokens[a.second] < tokens[b.second];
                      });
    std::vector<std::string> list;
    for (std::size_t r = 0; r < k; ++r) list.push_back(tokens[ranked[r].second]);
    table.emplace(tokens[i], std::move(list));
  }
  return ConfusionSets(std::move(tokens), std::move(table));
}

}  // namespace kdqa
