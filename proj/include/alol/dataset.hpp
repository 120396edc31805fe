#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "alol/errors.hpp"

namespace alol {

using ExampleId = std::int64_t;

/// How example payloads are stored on disk: one dense vector per example
/// ("features", scalar label) or one vector per token ("tokens", label list).
enum class PayloadKind { Features, Tokens };

/// One annotatable unit. A feature payload is stored as a single token.
struct Example {
  ExampleId id = 0;
  std::vector<std::vector<double>> tokens;
  std::vector<int> labels;  // one per token

  std::size_t token_count() const noexcept { return tokens.size(); }
};

using ExampleRefs = std::vector<const Example*>;

class Dataset {
 public:
  Dataset() = default;

  Dataset(PayloadKind kind, std::vector<Example> examples)
      : kind_(kind), examples_(std::move(examples)) {
    index_.reserve(examples_.size());
    if (!examples_.empty() && !examples_.front().tokens.empty()) {
      input_dim_ = examples_.front().tokens.front().size();
    }
    for (std::size_t i = 0; i < examples_.size(); ++i) {
      const Example& ex = examples_[i];
      if (!index_.emplace(ex.id, i).second) {
        throw Error(ErrorKind::Schema, "duplicate example id " + std::to_string(ex.id));
      }
      if (ex.tokens.empty()) {
        throw Error(ErrorKind::Schema, "example " + std::to_string(ex.id) + " has no tokens");
      }
      if (kind_ == PayloadKind::Features && ex.tokens.size() != 1) {
        throw Error(ErrorKind::Schema, "feature example " + std::to_string(ex.id) +
                                           " must carry exactly one vector");
      }
      if (ex.labels.size() != ex.tokens.size()) {
        throw Error(ErrorKind::Schema,
                    "example " + std::to_string(ex.id) + ": label count does not match tokens");
      }
      for (const auto& tok : ex.tokens) {
        if (tok.size() != input_dim_ || tok.empty()) {
          throw Error(ErrorKind::Schema,
                      "example " + std::to_string(ex.id) + ": inconsistent feature dimension");
        }
      }
      for (int y : ex.labels) {
        if (y < 0) {
          throw Error(ErrorKind::Schema, "example " + std::to_string(ex.id) + ": negative label");
        }
        class_count_ = std::max(class_count_, static_cast<std::size_t>(y) + 1);
      }
    }
  }

  PayloadKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  std::size_t input_dim() const noexcept { return input_dim_; }
  /// 1 + largest label present.
  std::size_t class_count() const noexcept { return class_count_; }
  const std::vector<Example>& examples() const noexcept { return examples_; }

  bool contains(ExampleId id) const { return index_.contains(id); }

  const Example& at(ExampleId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
      throw Error(ErrorKind::StaleCandidate, "unknown example id " + std::to_string(id));
    }
    return examples_[it->second];
  }

  ExampleRefs gather(std::span<const ExampleId> ids) const {
    ExampleRefs out;
    out.reserve(ids.size());
    for (ExampleId id : ids) out.push_back(&at(id));
    return out;
  }

  std::vector<ExampleId> ids() const {
    std::vector<ExampleId> out;
    out.reserve(examples_.size());
    for (const auto& ex : examples_) out.push_back(ex.id);
    return out;
  }

 private:
  PayloadKind kind_ = PayloadKind::Features;
  std::vector<Example> examples_;
  std::unordered_map<ExampleId, std::size_t> index_;
  std::size_t input_dim_ = 0;
  std::size_t class_count_ = 0;
};

// JSON-lines serialization:
//   {"id": int, "features": [float,...], "label": int}
//   {"id": int, "tokens": [[float,...],...], "label": [int,...]}

inline nlohmann::json example_to_json(const Example& ex, PayloadKind kind) {
  nlohmann::json j;
  j["id"] = ex.id;
  if (kind == PayloadKind::Features) {
    j["features"] = ex.tokens.front();
    j["label"] = ex.labels.front();
  } else {
    j["tokens"] = ex.tokens;
    j["label"] = ex.labels;
  }
  return j;
}

inline void write_jsonl(std::ostream& out, const Dataset& data) {
  for (const auto& ex : data.examples()) {
    out << example_to_json(ex, data.kind()).dump() << '\n';
  }
}

inline Dataset read_jsonl(std::istream& in) {
  std::vector<Example> examples;
  bool have_kind = false;
  PayloadKind kind = PayloadKind::Features;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Schema, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("label")) {
      throw Error(ErrorKind::Schema, where + ": expected object with id and label");
    }
    const bool has_features = j.contains("features");
    const bool has_tokens = j.contains("tokens");
    if (has_features == has_tokens) {
      throw Error(ErrorKind::Schema, where + ": exactly one of features/tokens required");
    }
    const PayloadKind line_kind = has_features ? PayloadKind::Features : PayloadKind::Tokens;
    if (have_kind && line_kind != kind) {
      throw Error(ErrorKind::Schema, where + ": mixed payload kinds in one file");
    }
    kind = line_kind;
    have_kind = true;
    Example ex;
    try {
      ex.id = j.at("id").get<ExampleId>();
      if (has_features) {
        ex.tokens.push_back(j.at("features").get<std::vector<double>>());
        ex.labels.push_back(j.at("label").get<int>());
      } else {
        ex.tokens = j.at("tokens").get<std::vector<std::vector<double>>>();
        ex.labels = j.at("label").get<std::vector<int>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Schema, where + ": " + e.what());
    }
    examples.push_back(std::move(ex));
  }
  return Dataset(kind, std::move(examples));
}

inline Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_jsonl(in);
}

}  // namespace alol
