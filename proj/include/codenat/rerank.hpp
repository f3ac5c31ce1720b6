#ifndef CODENAT_RERANK_HPP
#define CODENAT_RERANK_HPP

// Filtered entropy re-ranking of a prior fault-localization list, and Top-N.
//
// The first filter_n entries of the prior list are re-ordered by entropy,
// highest first; everything below the filter is left exactly as it was.
// Blank lines inside the filter count as entropy -inf.

#include <algorithm>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "codenat/entropy.hpp"
#include "codenat/error.hpp"
#include "codenat/location.hpp"
#include "codenat/sbfl.hpp"

namespace codenat {

enum class TieBreak {
  kPriorOrder,        // equal entropies keep their prior list position
  kEntropyThenPrior,  // equal entropies: prior score, then file and line
};

inline TieBreak parse_tie_break(std::string_view name) {
  if (name == "prior-order") return TieBreak::kPriorOrder;
  if (name == "entropy-then-prior") return TieBreak::kEntropyThenPrior;
  throw InputError("unknown tie-break '" + std::string(name) + "'");
}

struct RerankConfig {
  std::size_t filter_n = 6;
  TieBreak tie_break = TieBreak::kPriorOrder;
};

struct GroundTruth {
  std::string bug_id;
  std::set<Location> faulty_locations;
};

/// Entropy reports by file, for location lookup.
class EntropyIndex {
 public:
  EntropyIndex() = default;
  explicit EntropyIndex(std::vector<EntropyReport> reports) {
    for (auto& r : reports) add(std::move(r));
  }

  void add(EntropyReport report) {
    const auto key = normalize(report.file);
    if (!reports_.emplace(key, std::move(report)).second) {
      throw InputError("two entropy reports for file " + key);
    }
  }

  bool empty() const { return reports_.empty(); }

  /// Entropy of a location; blank lines give -inf. Throws InputError when no
  /// report covers the location.
  double entropy(const Location& loc) const {
    const auto* report = find(loc.file);
    if (report != nullptr) {
      const auto it = report->per_line.find(loc.line);
      if (it != report->per_line.end()) {
        return it->second ? *it->second
                          : -std::numeric_limits<double>::infinity();
      }
    }
    throw InputError("no entropy value for location " + loc.str());
  }

  const EntropyReport* find(const std::string& file) const {
    const auto key = normalize(file);
    if (const auto it = reports_.find(key); it != reports_.end()) {
      return &it->second;
    }
    // Fall back to a unique path-suffix match (relative vs absolute paths).
    const EntropyReport* match = nullptr;
    for (const auto& [path, report] : reports_) {
      if (ends_with_component(path, key) || ends_with_component(key, path)) {
        if (match != nullptr) return nullptr;
        match = &report;
      }
    }
    return match;
  }

 private:
  static std::string normalize(const std::string& file) {
    return std::filesystem::path(file).lexically_normal().generic_string();
  }

  static bool ends_with_component(const std::string& path,
                                  const std::string& tail) {
    return path.size() > tail.size() &&
           path.compare(path.size() - tail.size(), tail.size(), tail) == 0 &&
           path[path.size() - tail.size() - 1] == '/';
  }

  std::map<std::string, EntropyReport> reports_;
};

inline SuspiciousnessList rerank(const SuspiciousnessList& prior,
                                 const EntropyIndex& entropy,
                                 const RerankConfig& config) {
  if (config.filter_n < 1) throw InputError("filter must be >= 1");
  const std::size_t head = std::min(config.filter_n, prior.entries.size());

  std::vector<double> head_entropy(head);
  for (std::size_t i = 0; i < head; ++i) {
    head_entropy[i] = entropy.entropy(prior.entries[i].location);
  }
  std::vector<std::size_t> order(head);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (head_entropy[a] != head_entropy[b]) {
      return head_entropy[a] > head_entropy[b];
    }
    if (config.tie_break == TieBreak::kEntropyThenPrior) {
      const auto& ea = prior.entries[a];
      const auto& eb = prior.entries[b];
      if (ea.score != eb.score) return ea.score > eb.score;
      return ea.location < eb.location;
    }
    return a < b;
  });

  SuspiciousnessList out;
  out.technique_id = prior.technique_id + "+entropy-" +
                     std::to_string(config.filter_n) + "-filter";
  out.entries.reserve(prior.entries.size());
  for (const auto i : order) out.entries.push_back(prior.entries[i]);
  out.entries.insert(out.entries.end(), prior.entries.begin() + head,
                     prior.entries.end());
  return out;
}

/// Breaks exact score ties with entropy by nudging scores. Inside each tied
/// group the entry with rank r (0-based, entropy descending, prior order on
/// equal entropy) gets score + step * ((size - 1) / 2 - r). The offsets sum to
/// zero per group and stay below a quarter of the smallest gap between
/// distinct scores, so groups never cross and the mean is unchanged.
inline SuspiciousnessList entropy_tie_break(const SuspiciousnessList& prior,
                                            const EntropyIndex& entropy) {
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < prior.entries.size(); ++i) {
    groups[prior.entries[i].score].push_back(i);
  }
  double min_gap = 1.0;
  std::size_t max_size = 1;
  for (auto it = groups.begin(); it != groups.end(); ++it) {
    if (const auto next = std::next(it); next != groups.end()) {
      min_gap = std::min(min_gap, next->first - it->first);
    }
    max_size = std::max(max_size, it->second.size());
  }
  const double step = min_gap / (4.0 * static_cast<double>(max_size));

  SuspiciousnessList out{prior.technique_id + "+entropy-ties", prior.entries};
  for (auto& [score, members] : groups) {
    if (members.size() < 2) continue;
    std::vector<double> e(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      e[k] = entropy.entropy(prior.entries[members[k]].location);
    }
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return e[a] > e[b]; });
    const double centre = static_cast<double>(members.size() - 1) / 2.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      out.entries[members[order[r]]].score =
          score + step * (centre - static_cast<double>(r));
    }
  }
  detail::stable_sort_descending(out.entries);
  return out;
}

/// All non-blank lines by entropy, highest first; ties by ascending line.
inline SuspiciousnessList entropy_only_rank(const EntropyReport& report) {
  if (!report.complete) {
    throw InputError("entropy report for " + report.file + " is incomplete");
  }
  SuspiciousnessList out{"entropy", {}};
  for (const auto& [line, value] : report.per_line) {
    if (value) out.entries.push_back({{report.file, line}, *value});
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const Suspicion& a, const Suspicion& b) {
                     return a.score > b.score;
                   });
  return out;
}

/// 1-based rank of the first faulty location, if any.
inline std::optional<std::size_t> first_fault_rank(const SuspiciousnessList& list,
                                                   const GroundTruth& truth) {
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    if (truth.faulty_locations.contains(list.entries[i].location)) return i + 1;
  }
  return std::nullopt;
}

using RankedBug = std::pair<std::string, SuspiciousnessList>;

/// Number of bugs with a faulty location among the first n entries.
inline std::size_t top_n_score(const std::vector<RankedBug>& ranked,
                               const std::map<std::string, GroundTruth>& truth,
                               std::size_t n) {
  if (n < 1) throw InputError("Top-N requires n >= 1");
  std::size_t count = 0;
  for (const auto& [bug_id, list] : ranked) {
    const auto it = truth.find(bug_id);
    if (it == truth.end()) {
      throw InputError("no ground truth for bug '" + bug_id + "'");
    }
    const auto rank = first_fault_rank(list, it->second);
    if (rank && *rank <= n) ++count;
  }
  return count;
}

inline std::map<std::string, GroundTruth> ground_truth_from_json(
    const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("ground truth must be a JSON object");
  std::map<std::string, GroundTruth> out;
  for (const auto& [bug_id, locations] : j.items()) {
    if (!locations.is_array() || locations.empty()) {
      throw InputError("ground truth for '" + bug_id +
                       "' must be a non-empty list");
    }
    GroundTruth truth{bug_id, {}};
    for (const auto& loc : locations) {
      if (!loc.is_string()) throw InputError("ground truth entries are strings");
      truth.faulty_locations.insert(parse_location(loc.get<std::string>()));
    }
    out.emplace(bug_id, std::move(truth));
  }
  return out;
}

struct TopNRow {
  std::string technique;
  std::size_t top1 = 0;
  std::size_t top3 = 0;
  std::size_t top5 = 0;
};

inline std::string top_n_tsv(const std::vector<TopNRow>& rows) {
  std::string out = "technique\ttop1\ttop3\ttop5\n";
  for (const auto& r : rows) {
    out += r.technique + "\t" + std::to_string(r.top1) + "\t" +
           std::to_string(r.top3) + "\t" + std::to_string(r.top5) + "\n";
  }
  return out;
}

}  // namespace codenat

#endif  // CODENAT_RERANK_HPP
