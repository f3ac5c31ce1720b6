#ifndef CODENAT_SBFL_HPP
#define CODENAT_SBFL_HPP

// Spectrum-based fault localization (Ochiai) and suspiciousness lists.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "codenat/error.hpp"
#include "codenat/location.hpp"

namespace codenat {

enum class Verdict { kPass, kFail };

struct TestCase {
  std::string id;
  Verdict verdict = Verdict::kPass;
};

struct CoverageMatrix {
  std::vector<Location> locations;
  std::vector<TestCase> tests;
  // covered[location][test]
  std::vector<std::vector<bool>> covered;

  std::size_t failing_tests() const {
    return static_cast<std::size_t>(
        std::count_if(tests.begin(), tests.end(),
                      [](const TestCase& t) { return t.verdict == Verdict::kFail; }));
  }
};

struct Suspicion {
  Location location;
  double score = 0.0;

  bool operator==(const Suspicion&) const = default;
};

/// Ranked suspiciousness entries. The entry order is authoritative: lists
/// produced by a scoring technique are sorted by descending score (ties in
/// input order), while re-ranked lists keep their original scores.
struct SuspiciousnessList {
  std::string technique_id;
  std::vector<Suspicion> entries;

  bool operator==(const SuspiciousnessList&) const = default;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) {
    throw InputError(where + ": malformed number '" + std::string(s) + "'");
  }
  return v;
}

inline void stable_sort_descending(std::vector<Suspicion>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Suspicion& a, const Suspicion& b) {
                     return a.score > b.score;
                   });
}

}  // namespace detail

/// Parses the coverage CSV (`file,line,test_id,verdict,covered`). Every row is
/// one (location, test) cell; cells not listed count as not covered.
inline CoverageMatrix parse_coverage(std::string_view text) {
  CoverageMatrix m;
  std::map<Location, std::size_t> loc_index;
  std::map<std::string, std::size_t> test_index;
  std::map<std::pair<std::size_t, std::size_t>, bool> cells;

  std::istringstream in{std::string(text)};
  std::string raw;
  int row = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++row;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    const std::string where = "coverage row " + std::to_string(row);
    const auto fields = detail::split(line, ',');
    if (!header_seen) {
      if (fields.size() != 5 || detail::trim(fields[0]) != "file" ||
          detail::trim(fields[1]) != "line" ||
          detail::trim(fields[2]) != "test_id" ||
          detail::trim(fields[3]) != "verdict" ||
          detail::trim(fields[4]) != "covered") {
        throw InputError(where + ": expected header file,line,test_id,verdict,covered");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 5) {
      throw InputError(where + ": expected 5 fields, got " +
                       std::to_string(fields.size()));
    }
    const auto file = detail::trim(fields[0]);
    const auto line_text = detail::trim(fields[1]);
    const auto test_id = detail::trim(fields[2]);
    const auto verdict_text = detail::trim(fields[3]);
    const auto covered_text = detail::trim(fields[4]);
    if (file.empty() || test_id.empty()) {
      throw InputError(where + ": empty file or test_id");
    }
    int line_no = 0;
    const auto [ptr, ec] = std::from_chars(
        line_text.data(), line_text.data() + line_text.size(), line_no);
    if (ec != std::errc() || ptr != line_text.data() + line_text.size() ||
        line_no < 1) {
      throw InputError(where + ": malformed line number");
    }
    Verdict verdict;
    if (verdict_text == "pass") {
      verdict = Verdict::kPass;
    } else if (verdict_text == "fail") {
      verdict = Verdict::kFail;
    } else {
      throw InputError(where + ": unknown verdict '" +
                       std::string(verdict_text) + "'");
    }
    if (covered_text != "0" && covered_text != "1") {
      throw InputError(where + ": covered must be 0 or 1");
    }

    const Location loc{std::string(file), line_no};
    const auto [lit, new_loc] = loc_index.emplace(loc, m.locations.size());
    if (new_loc) m.locations.push_back(loc);
    const auto [tit, new_test] =
        test_index.emplace(std::string(test_id), m.tests.size());
    if (new_test) {
      m.tests.push_back({std::string(test_id), verdict});
    } else if (m.tests[tit->second].verdict != verdict) {
      throw InputError(where + ": conflicting verdict for test '" +
                       std::string(test_id) + "'");
    }
    if (!cells.emplace(std::pair{lit->second, tit->second}, covered_text == "1")
             .second) {
      throw InputError(where + ": duplicate row for location " + loc.str() +
                       " and test '" + std::string(test_id) + "'");
    }
  }
  if (!header_seen) throw InputError("coverage file is empty");

  m.covered.assign(m.locations.size(), std::vector<bool>(m.tests.size(), false));
  for (const auto& [key, value] : cells) m.covered[key.first][key.second] = value;
  return m;
}

inline CoverageMatrix load_coverage(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read coverage file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_coverage(buf.str());
}

/// ef / sqrt(totalFailed * (ef + ep)); 0 when the location is never covered.
inline double ochiai_score(std::size_t ef, std::size_t ep,
                           std::size_t total_failed) {
  if (ef + ep == 0 || total_failed == 0) return 0.0;
  return static_cast<double>(ef) /
         std::sqrt(static_cast<double>(total_failed) *
                   static_cast<double>(ef + ep));
}

inline SuspiciousnessList ochiai(const CoverageMatrix& m) {
  const auto total_failed = m.failing_tests();
  if (total_failed == 0) {
    throw InputError("coverage has no failing tests: nothing to localize");
  }
  SuspiciousnessList out{"ochiai", {}};
  out.entries.reserve(m.locations.size());
  for (std::size_t l = 0; l < m.locations.size(); ++l) {
    std::size_t ef = 0;
    std::size_t ep = 0;
    for (std::size_t t = 0; t < m.tests.size(); ++t) {
      if (!m.covered[l][t]) continue;
      (m.tests[t].verdict == Verdict::kFail ? ef : ep) += 1;
    }
    out.entries.push_back({m.locations[l], ochiai_score(ef, ep, total_failed)});
  }
  detail::stable_sort_descending(out.entries);
  return out;
}

struct TieGroup {
  double score = 0.0;
  std::size_t size = 0;
};

struct TieStats {
  std::size_t tied_line_count = 0;
  std::vector<TieGroup> groups;  // only groups of size >= 2
  std::size_t max_group_size = 0;
};

/// Entries that share their exact score with at least one other entry.
inline TieStats tie_stats(const SuspiciousnessList& list) {
  std::map<double, std::size_t> counts;
  for (const auto& e : list.entries) ++counts[e.score];
  TieStats stats;
  for (auto it = counts.rbegin(); it != counts.rend(); ++it) {
    if (it->second < 2) continue;
    stats.groups.push_back({it->first, it->second});
    stats.tied_line_count += it->second;
    stats.max_group_size = std::max(stats.max_group_size, it->second);
  }
  return stats;
}

/// Population variance of the scores (Welford's update).
inline double score_variance(const SuspiciousnessList& list) {
  if (list.entries.empty()) throw InputError("variance of an empty list");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (const auto& e : list.entries) {
    ++n;
    const double delta = e.score - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (e.score - mean);
  }
  return std::max(0.0, m2 / static_cast<double>(n));
}

/// Reads the list TSV: an optional `# technique=<id>` line, then
/// `file:line<TAB>score` rows in rank order. Other `#` lines are ignored.
inline SuspiciousnessList parse_suspiciousness(std::string_view text) {
  SuspiciousnessList list;
  std::istringstream in{std::string(text)};
  std::string raw;
  int row = 0;
  std::map<Location, int> seen;
  while (std::getline(in, raw)) {
    ++row;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view kTag = "# technique=";
      if (line.substr(0, kTag.size()) == kTag) {
        list.technique_id = std::string(detail::trim(line.substr(kTag.size())));
      }
      continue;
    }
    const std::string where = "suspiciousness row " + std::to_string(row);
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2) throw InputError(where + ": expected file:line<TAB>score");
    Location loc;
    try {
      loc = parse_location(detail::trim(fields[0]));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    if (!seen.emplace(loc, row).second) {
      throw InputError(where + ": duplicate location " + loc.str());
    }
    list.entries.push_back({loc, detail::parse_double(detail::trim(fields[1]), where)});
  }
  return list;
}

inline SuspiciousnessList load_suspiciousness(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read suspiciousness list: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_suspiciousness(buf.str());
}

inline std::string format_score(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string to_tsv(const SuspiciousnessList& list) {
  std::string out = "# technique=" + list.technique_id + "\n";
  for (const auto& e : list.entries) {
    out += e.location.str() + "\t" + format_score(e.score) + "\n";
  }
  return out;
}

}  // namespace codenat

#endif  // CODENAT_SBFL_HPP
