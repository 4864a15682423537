#include "soilref/eval/split.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include "soilref/core/rng.hpp"

namespace soilref::eval {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + name + "'");
}

int presence_key(const LabelMap& map) {
  int key = 0;
  for (auto v : map.data()) {
    if (v >= 1 && v <= 3) key |= 1 << (v - 1);
  }
  return key;
}

std::array<int, 3> apportion(int n, const SplitRatios& ratios) {
  const long total = std::accumulate(ratios.begin(), ratios.end(), 0L);
  if (total <= 0 || std::any_of(ratios.begin(), ratios.end(), [](int r) { return r < 0; })) {
    throw std::invalid_argument("split ratios must be non-negative with a positive sum");
  }
  std::array<int, 3> out{};
  std::array<long, 3> rem{};
  int assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const long num = static_cast<long>(n) * ratios[s];
    out[s] = static_cast<int>(num / total);
    rem[s] = num % total;
    assigned += out[s];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; assigned < n; ++i, ++assigned) ++out[order[i % 3]];
  return out;
}

std::vector<Split> stratified_split(const std::vector<int>& keys, std::uint64_t seed,
                                    const SplitRatios& ratios) {
  const int n = static_cast<int>(keys.size());
  if (n < 10) throw std::invalid_argument(fmt::format("stratified_split needs at least 10 samples, got {}", n));
  const long total = std::accumulate(ratios.begin(), ratios.end(), 0L);
  const std::array<int, 3> target = apportion(n, ratios);

  std::map<int, std::vector<int>> buckets;
  for (int i = 0; i < n; ++i) buckets[keys[i]].push_back(i);

  // Floors per bucket, then hand out the leftovers by largest fractional part
  // while respecting both the bucket sizes and the global split sizes.
  struct Cell {
    int bucket;
    int split;
    long rem;
  };
  std::vector<std::array<int, 3>> quota;
  std::vector<int> left;
  std::vector<Cell> cells;
  std::array<int, 3> need = target;
  int b = 0;
  for (const auto& [key, members] : buckets) {
    const int nb = static_cast<int>(members.size());
    std::array<int, 3> q{};
    int used = 0;
    for (int s = 0; s < 3; ++s) {
      const long num = static_cast<long>(nb) * ratios[s];
      q[s] = static_cast<int>(num / total);
      used += q[s];
      need[s] -= q[s];
      cells.push_back({b, s, num % total});
    }
    quota.push_back(q);
    left.push_back(nb - used);
    ++b;
  }
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.rem > y.rem; });
  for (const auto& c : cells) {
    if (c.rem > 0 && left[c.bucket] > 0 && need[c.split] > 0) {
      ++quota[c.bucket][c.split];
      --left[c.bucket];
      --need[c.split];
    }
  }
  // Greedy leftovers (rare): any bucket with spare items goes to any split
  // still short. Totals match, so this always terminates.
  for (std::size_t i = 0; i < quota.size(); ++i) {
    for (int s = 0; s < 3 && left[i] > 0; ++s) {
      while (left[i] > 0 && need[s] > 0) {
        ++quota[i][s];
        --left[i];
        --need[s];
      }
    }
  }

  std::vector<Split> out(n, Split::kTrain);
  Rng rng(seed);
  b = 0;
  for (auto& [key, members] : buckets) {
    shuffle(members.begin(), members.end(), rng);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (int k = 0; k < quota[b][s]; ++k) out[members[pos++]] = static_cast<Split>(s);
    }
    ++b;
  }
  return out;
}

}  // namespace soilref::eval
