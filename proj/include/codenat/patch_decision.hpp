#ifndef CODENAT_PATCH_DECISION_HPP
#define CODENAT_PATCH_DECISION_HPP

// Ranking and classifying patches by entropy-delta, and the metrics used to
// judge both.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "codenat/entropy_delta.hpp"
#include "codenat/error.hpp"
#include "codenat/patch.hpp"

namespace codenat {

struct RankedPatch {
  std::string patch_id;
  double delta = 0.0;

  bool operator==(const RankedPatch&) const = default;
};

struct RankedPatchSet {
  std::string bug_id;
  std::vector<RankedPatch> entries;
  std::string policy_id = "entropy-delta";

  /// 1-based position of a patch, if present.
  std::optional<std::size_t> rank_of(const std::string& patch_id) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].patch_id == patch_id) return i + 1;
    }
    return std::nullopt;
  }
};

/// Highest delta first; equal deltas by ascending patch_id.
inline RankedPatchSet rank_patches(std::span<const EntropyDelta> deltas) {
  RankedPatchSet out;
  std::set<std::string> seen;
  for (const auto& d : deltas) {
    if (out.entries.empty()) {
      out.bug_id = d.bug_id;
    } else if (d.bug_id != out.bug_id) {
      throw InputError("rank_patches: deltas span bugs '" + out.bug_id +
                       "' and '" + d.bug_id + "'");
    }
    if (!seen.insert(d.patch_id).second) {
      throw InputError("rank_patches: duplicate patch_id '" + d.patch_id + "'");
    }
    out.entries.push_back({d.patch_id, d.value});
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const RankedPatch& a, const RankedPatch& b) {
              if (a.delta != b.delta) return a.delta > b.delta;
              return a.patch_id < b.patch_id;
            });
  return out;
}

enum class Leaning { kCorrect, kIncorrect };

inline std::string_view to_string(Leaning l) {
  return l == Leaning::kCorrect ? "correct-leaning" : "incorrect-leaning";
}

/// Strictly positive deltas lean correct; zero does not.
inline Leaning classify(double delta) {
  return delta > 0.0 ? Leaning::kCorrect : Leaning::kIncorrect;
}

inline Leaning classify(const EntropyDelta& delta) { return classify(delta.value); }

/// A ratio, or nullopt when its denominator is zero.
using Metric = std::optional<double>;

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct ClassificationReport {
  ConfusionCounts counts;
  Metric accuracy;
  Metric precision;
  Metric plus_recall;
  Metric minus_recall;
  Metric f1;
};

namespace detail {

inline Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Positive class is "correct". Labels must be correct or incorrect.
inline ClassificationReport classification_report(
    std::span<const Leaning> predictions, std::span<const PatchLabel> labels) {
  if (predictions.size() != labels.size()) {
    throw InputError("classification_report: " + std::to_string(predictions.size()) +
                     " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  ClassificationReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == PatchLabel::kUnknown) {
      throw InputError("classification_report: label " + std::to_string(i) +
                       " is unknown");
    }
    const bool predicted_correct = predictions[i] == Leaning::kCorrect;
    const bool is_correct = labels[i] == PatchLabel::kCorrect;
    if (predicted_correct && is_correct) ++r.counts.tp;
    if (predicted_correct && !is_correct) ++r.counts.fp;
    if (!predicted_correct && !is_correct) ++r.counts.tn;
    if (!predicted_correct && is_correct) ++r.counts.fn;
  }
  const auto& c = r.counts;
  r.accuracy = detail::ratio(c.tp + c.tn, c.total());
  r.precision = detail::ratio(c.tp, c.tp + c.fp);
  r.plus_recall = detail::ratio(c.tp, c.tp + c.fn);
  r.minus_recall = detail::ratio(c.tn, c.tn + c.fp);
  if (r.precision && r.plus_recall && *r.precision + *r.plus_recall > 0.0) {
    r.f1 = 2.0 * *r.precision * *r.plus_recall / (*r.precision + *r.plus_recall);
  }
  return r;
}

/// Positive when the new order reaches the patch sooner.
inline long evaluations_saved(const std::string& patch_id, long original_rank,
                              long new_rank) {
  if (original_rank < 1 || new_rank < 1) {
    throw InputError("evaluations_saved(" + patch_id + "): ranks must be >= 1");
  }
  return original_rank - new_rank;
}

/// Bugs whose single correct patch is among the first n (n in 1..3).
inline std::size_t patch_top_n(
    std::span<const RankedPatchSet> sets,
    const std::map<std::string, PatchLabel>& labels, std::size_t n) {
  if (n < 1 || n > 3) throw InputError("patch Top-N is defined for n in 1..3");
  std::size_t count = 0;
  for (const auto& set : sets) {
    std::optional<std::size_t> correct_rank;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
      const auto it = labels.find(set.entries[i].patch_id);
      if (it != labels.end() && it->second == PatchLabel::kCorrect) {
        ++correct;
        correct_rank = i + 1;
      }
    }
    if (correct != 1) {
      throw InputError("bug '" + set.bug_id + "' has " + std::to_string(correct) +
                       " correct patches (expected exactly 1)");
    }
    if (*correct_rank <= n) ++count;
  }
  return count;
}

inline nlohmann::json metric_json(const Metric& m) {
  return m ? nlohmann::json(*m) : nlohmann::json("undefined");
}

inline std::string metric_tsv(const Metric& m) {
  if (!m) return "NA";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << *m;
  return os.str();
}

inline nlohmann::json to_json(const ClassificationReport& r) {
  return {{"counts",
           {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn},
            {"fn", r.counts.fn}}},
          {"accuracy", metric_json(r.accuracy)},
          {"precision", metric_json(r.precision)},
          {"plus_recall", metric_json(r.plus_recall)},
          {"minus_recall", metric_json(r.minus_recall)},
          {"f1", metric_json(r.f1)}};
}

/// One summary row: technique, accuracy, precision, +recall, -recall, F1.
inline std::string classification_tsv(const std::string& technique,
                                      const ClassificationReport& r) {
  return "technique\taccuracy\tprecision\tplus_recall\tminus_recall\tf1\n" +
         technique + "\t" + metric_tsv(r.accuracy) + "\t" +
         metric_tsv(r.precision) + "\t" + metric_tsv(r.plus_recall) + "\t" +
         metric_tsv(r.minus_recall) + "\t" + metric_tsv(r.f1) + "\n";
}

inline nlohmann::json to_json(const RankedPatchSet& s) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : s.entries) {
    entries.push_back({{"patch_id", e.patch_id}, {"delta", e.delta}});
  }
  return {{"bug_id", s.bug_id}, {"policy_id", s.policy_id}, {"entries", entries}};
}

inline RankedPatchSet ranked_patch_set_from_json(const nlohmann::json& j) {
  try {
    RankedPatchSet s;
    s.bug_id = j.at("bug_id").get<std::string>();
    s.policy_id = j.value("policy_id", "entropy-delta");
    for (const auto& e : j.at("entries")) {
      s.entries.push_back({e.at("patch_id").get<std::string>(),
                           e.at("delta").get<double>()});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed ranked patch set: ") + e.what());
  }
}

}  // namespace codenat

#endif  // CODENAT_PATCH_DECISION_HPP
