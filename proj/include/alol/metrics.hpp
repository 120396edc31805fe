#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alol/errors.hpp"

namespace alol {

enum class MetricKind { Accuracy, MacroF1, TokenF1, ExactMatch };

constexpr std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::MacroF1: return "macro_f1";
    case MetricKind::TokenF1: return "token_f1";
    case MetricKind::ExactMatch: return "exact_match";
  }
  return "accuracy";
}

/// Per-example label slots (one entry per token, or a single entry).
using LabelSeq = std::vector<int>;

namespace detail {

inline double f1(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

}  // namespace detail

/// Scores argmax predictions against gold labels.
///
/// Accuracy is over all slots. MacroF1 averages per-class F1 over the classes
/// seen in either gold or predictions; a class with no true positive scores 0.
/// TokenF1 treats label 0 as the outside tag and computes micro F1 over the
/// remaining tags (1.0 when neither side has any non-outside tag). ExactMatch
/// is the fraction of examples whose slots all match.
inline double score(std::span<const LabelSeq> predictions, std::span<const LabelSeq> golds,
                    MetricKind kind) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorKind::Alignment, "prediction/gold counts differ: " +
                                          std::to_string(predictions.size()) + " vs " +
                                          std::to_string(golds.size()));
  }
  if (golds.empty()) throw Error(ErrorKind::EmptyEval, "nothing to score");
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i].size() != golds[i].size()) {
      throw Error(ErrorKind::Alignment, "slot count differs at example " + std::to_string(i));
    }
  }

  switch (kind) {
    case MetricKind::Accuracy: {
      std::size_t correct = 0, total = 0;
      for (std::size_t i = 0; i < golds.size(); ++i) {
        for (std::size_t t = 0; t < golds[i].size(); ++t) {
          correct += predictions[i][t] == golds[i][t];
          ++total;
        }
      }
      return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
    }
    case MetricKind::ExactMatch: {
      std::size_t exact = 0;
      for (std::size_t i = 0; i < golds.size(); ++i) exact += predictions[i] == golds[i];
      return static_cast<double>(exact) / static_cast<double>(golds.size());
    }
    case MetricKind::TokenF1: {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < golds.size(); ++i) {
        for (std::size_t t = 0; t < golds[i].size(); ++t) {
          const int p = predictions[i][t], g = golds[i][t];
          if (p == g) {
            tp += g != 0;
          } else {
            fp += p != 0;
            fn += g != 0;
          }
        }
      }
      if (tp + fp + fn == 0.0) return 1.0;
      return detail::f1(tp, fp, fn);
    }
    case MetricKind::MacroF1: {
      struct Counts { double tp = 0, fp = 0, fn = 0; };
      std::map<int, Counts> per_class;
      for (std::size_t i = 0; i < golds.size(); ++i) {
        for (std::size_t t = 0; t < golds[i].size(); ++t) {
          const int p = predictions[i][t], g = golds[i][t];
          if (p == g) {
            per_class[g].tp += 1;
          } else {
            per_class[p].fp += 1;
            per_class[g].fn += 1;
          }
        }
      }
      if (per_class.empty()) return 1.0;
      double sum = 0;
      for (const auto& [cls, c] : per_class) sum += detail::f1(c.tp, c.fp, c.fn);
      return sum / static_cast<double>(per_class.size());
    }
  }
  return 0.0;
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
  double sum = 0, h = 0;
  for (double v : p) {
    if (v < 0.0) throw Error(ErrorKind::Distribution, "negative probability");
    sum += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorKind::Distribution, "probabilities sum to " + std::to_string(sum));
  }
  return h;
}

inline double mean_entropy(std::span<const std::vector<double>> distributions) {
  if (distributions.empty()) throw Error(ErrorKind::Distribution, "no distributions");
  double total = 0;
  for (const auto& d : distributions) total += entropy(d);
  return total / static_cast<double>(distributions.size());
}

}  // namespace alol
