#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alol/dataset.hpp"
#include "alol/errors.hpp"
#include "alol/rng.hpp"

namespace alol {

enum class GenKind { GaussianClusters, TokenTagging };

struct GenSpec {
  GenKind kind = GenKind::GaussianClusters;
  std::size_t n = 100;
  std::size_t input_dim = 2;
  std::size_t class_count = 2;
  double cluster_separation = 4.0;
  double noise_fraction = 0.0;
  std::size_t min_len = 1;  // TokenTagging only
  std::size_t max_len = 1;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Generation, what); };
    if (n < 1) fail("n must be >= 1");
    if (input_dim < 1 || class_count < 1) fail("input_dim and class_count must be >= 1");
    if (class_count > input_dim) fail("class_count may not exceed input_dim");
    if (!(cluster_separation >= 0.0)) fail("cluster_separation must be >= 0");
    if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) fail("noise_fraction must lie in [0, 1]");
    if (kind == GenKind::TokenTagging && (min_len < 1 || min_len > max_len)) {
      fail("token lengths need 1 <= min_len <= max_len");
    }
  }
};

struct GeneratedData {
  Dataset dataset;
  std::vector<bool> informative;  // parallel to dataset.examples()
};

/// Class c has mean (separation / sqrt 2) * e_c, so all means are pairwise
/// `separation` apart; points add unit-variance Gaussian noise. A random
/// subset of round(noise_fraction * n) examples has every label redrawn
/// uniformly over all classes and is flagged uninformative.
inline GeneratedData generate(const GenSpec& spec) {
  spec.validate();
  const double offset = spec.cluster_separation / std::sqrt(2.0);
  SplitMix64 point_rng(derive_seed(spec.seed, 0, 0, 0, Purpose::Init));
  SplitMix64 noise_rng(derive_seed(spec.seed, 0, 0, 0, Purpose::Split));
  SplitMix64 length_rng(derive_seed(spec.seed, 0, 0, 0, Purpose::Sampling));

  auto draw_point = [&](int cls) {
    std::vector<double> x(spec.input_dim);
    for (double& v : x) v = point_rng.normal();
    x[static_cast<std::size_t>(cls)] += offset;
    return x;
  };

  std::vector<Example> examples(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Example& ex = examples[i];
    ex.id = static_cast<ExampleId>(i);
    std::size_t len = 1;
    if (spec.kind == GenKind::TokenTagging) {
      len = spec.min_len + static_cast<std::size_t>(length_rng.uniform_below(spec.max_len - spec.min_len + 1));
    }
    for (std::size_t t = 0; t < len; ++t) {
      const int cls = static_cast<int>(point_rng.uniform_below(spec.class_count));
      ex.tokens.push_back(draw_point(cls));
      ex.labels.push_back(cls);
    }
  }

  std::vector<bool> informative(spec.n, true);
  const auto noisy = static_cast<std::size_t>(std::llround(spec.noise_fraction * static_cast<double>(spec.n)));
  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order.begin(), order.end(), noise_rng);
  for (std::size_t k = 0; k < noisy; ++k) {
    Example& ex = examples[order[k]];
    informative[order[k]] = false;
    for (int& y : ex.labels) y = static_cast<int>(noise_rng.uniform_below(spec.class_count));
  }

  const PayloadKind kind =
      spec.kind == GenKind::GaussianClusters ? PayloadKind::Features : PayloadKind::Tokens;
  return {Dataset(kind, std::move(examples)), std::move(informative)};
}

inline void write_provenance_jsonl(std::ostream& out, const GeneratedData& gen) {
  const auto& examples = gen.dataset.examples();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    nlohmann::json j;
    j["id"] = examples[i].id;
    j["informative"] = static_cast<bool>(gen.informative[i]);
    out << j.dump() << '\n';
  }
}

}  // namespace alol
