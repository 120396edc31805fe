#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "alol/dataset.hpp"
#include "alol/errors.hpp"
#include "alol/rng.hpp"

namespace alol {

struct PartitionSizes {
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::size_t eval = 0;
  std::size_t report = 0;

  std::size_t total() const noexcept { return labeled + unlabeled + eval + report; }
  friend bool operator==(const PartitionSizes&, const PartitionSizes&) = default;
};

/// Disjoint id partitions. Each vector is kept sorted ascending.
struct PoolState {
  std::vector<ExampleId> labeled;
  std::vector<ExampleId> unlabeled;
  std::vector<ExampleId> eval;
  std::vector<ExampleId> report;

  friend bool operator==(const PoolState&, const PoolState&) = default;
};

/// L distinct unlabeled ids, in draw order.
struct CandidateSet {
  std::vector<ExampleId> ids;
  std::size_t candidate_index = 0;

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

inline PoolState split_dataset(const Dataset& data, const PartitionSizes& sizes,
                               std::uint64_t seed) {
  if (sizes.total() > data.size()) {
    throw Error(ErrorKind::PartitionInfeasible,
                "requested " + std::to_string(sizes.total()) + " examples but dataset has " +
                    std::to_string(data.size()));
  }
  std::vector<ExampleId> ids = data.ids();
  std::sort(ids.begin(), ids.end());
  SplitMix64 rng(seed);
  shuffle(ids.begin(), ids.end(), rng);

  PoolState pool;
  auto take = [&, pos = std::size_t{0}](std::size_t n) mutable {
    std::vector<ExampleId> part(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                                ids.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    std::sort(part.begin(), part.end());
    return part;
  };
  pool.labeled = take(sizes.labeled);
  pool.unlabeled = take(sizes.unlabeled);
  pool.eval = take(sizes.eval);
  pool.report = take(sizes.report);
  return pool;
}

/// K independent uniform draws of L distinct unlabeled ids. Sets may overlap
/// each other. Set j uses its own stream derived from (seed, j), so the result
/// does not depend on evaluation order.
inline std::vector<CandidateSet> sample_candidates(const PoolState& pool, std::size_t K,
                                                   std::size_t L, std::uint64_t seed) {
  const std::size_t n = pool.unlabeled.size();
  if (n < L) {
    throw Error(ErrorKind::PoolExhausted, "unlabeled pool has " + std::to_string(n) +
                                              " ids, candidate sets need " + std::to_string(L));
  }
  std::vector<CandidateSet> sets(K);
  for (std::size_t j = 0; j < K; ++j) {
    SplitMix64 rng(derive_seed(seed, 0, j, 0, Purpose::Sampling));
    // Partial Fisher-Yates over the sorted unlabeled ids; displaced
    // positions are tracked sparsely.
    std::unordered_map<std::size_t, std::size_t> moved;
    auto slot = [&](std::size_t p) {
      auto it = moved.find(p);
      return it == moved.end() ? p : it->second;
    };
    CandidateSet& set = sets[j];
    set.candidate_index = j;
    set.ids.reserve(L);
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t r = t + static_cast<std::size_t>(rng.uniform_below(n - t));
      const std::size_t picked = slot(r);
      moved[r] = slot(t);
      set.ids.push_back(pool.unlabeled[picked]);
    }
  }
  return sets;
}

inline bool contains_sorted(const std::vector<ExampleId>& sorted, ExampleId id) {
  return std::binary_search(sorted.begin(), sorted.end(), id);
}

/// Moves the chosen ids from unlabeled to labeled.
inline PoolState commit_selection(const PoolState& pool, const CandidateSet& chosen) {
  std::vector<ExampleId> moving = chosen.ids;
  std::sort(moving.begin(), moving.end());
  if (std::adjacent_find(moving.begin(), moving.end()) != moving.end()) {
    throw Error(ErrorKind::StaleCandidate, "candidate set repeats an id");
  }
  for (ExampleId id : moving) {
    if (!contains_sorted(pool.unlabeled, id)) {
      throw Error(ErrorKind::StaleCandidate,
                  "id " + std::to_string(id) + " is not in the unlabeled pool");
    }
  }
  PoolState next;
  next.eval = pool.eval;
  next.report = pool.report;
  std::set_union(pool.labeled.begin(), pool.labeled.end(), moving.begin(), moving.end(),
                 std::back_inserter(next.labeled));
  std::set_difference(pool.unlabeled.begin(), pool.unlabeled.end(), moving.begin(),
                      moving.end(), std::back_inserter(next.unlabeled));
  return next;
}

}  // namespace alol
