#ifndef CODENAT_TESTS_FIXTURES_HPP
#define CODENAT_TESTS_FIXTURES_HPP

// Shared test scaffolding: a programmable backend, temporary directories,
// random instance generators and the hand-built scenarios that several
// suites reuse.

#include <stdlib.h>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "codenat/digest.hpp"
#include "codenat/entropy.hpp"
#include "codenat/patch.hpp"
#include "codenat/sbfl.hpp"

namespace fixture {

/// Backend whose surprisals come from a callback, counting its calls.
class StubBackend final : public codenat::EntropyBackend {
 public:
  using Fn = std::function<std::vector<double>(const codenat::ScoreQuery&)>;

  explicit StubBackend(Fn fn, codenat::BackendConfig config = {}, bool blank = true)
      : EntropyBackend(config), fn_(std::move(fn)), blank_(blank) {}

  codenat::BackendKind kind() const override { return codenat::BackendKind::kRemote; }
  std::string id() const override { return "stub"; }
  std::string blank_convention() const override { return "stub"; }
  bool supports_blank() const override { return blank_; }
  std::vector<double> score(const codenat::ScoreQuery& q) const override {
    ++calls;
    return fn_(q);
  }

  mutable std::size_t calls = 0;

 private:
  Fn fn_;
  bool blank_;
};

class TempDir {
 public:
  TempDir() {
    std::string templ =
        (std::filesystem::temp_directory_path() / "codenat-XXXXXX").string();
    if (mkdtemp(templ.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

  std::string write(const std::string& rel, const std::string& content) const {
    const auto p = path_ / rel;
    std::filesystem::create_directories(p.parent_path());
    codenat::write_file(p.string(), content);
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string single_line_diff(const std::string& file, int line,
                                    const std::string& old_text,
                                    const std::string& new_text) {
  return "--- a/" + file + "\n+++ b/" + file + "\n@@ -" + std::to_string(line) +
         ",1 +" + std::to_string(line) + ",1 @@\n-" + old_text + "\n+" + new_text + "\n";
}

inline codenat::CandidatePatch replace_patch(const std::string& id, const std::string& bug,
                                             const std::string& file, int line,
                                             const std::string& old_text,
                                             const std::string& new_text) {
  codenat::CandidatePatch p;
  p.patch_id = id;
  p.bug_id = bug;
  p.edits.push_back({codenat::EditKind::kReplace, file, line, old_text, new_text});
  return p;
}

inline codenat::SuspiciousnessList random_list(std::mt19937_64& rng, std::size_t n,
                                               int distinct_scores) {
  codenat::SuspiciousnessList list{"random", {}};
  std::uniform_int_distribution<int> score(0, distinct_scores - 1);
  for (std::size_t i = 0; i < n; ++i) {
    list.entries.push_back(
        {{"F" + std::to_string(i % 3) + ".java", static_cast<int>(i / 3) + 1},
         static_cast<double>(score(rng)) / distinct_scores});
  }
  std::stable_sort(list.entries.begin(), list.entries.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return list;
}

inline codenat::CoverageMatrix random_coverage(std::mt19937_64& rng, std::size_t locations,
                                               std::size_t tests) {
  codenat::CoverageMatrix m;
  std::bernoulli_distribution coin(0.4);
  for (std::size_t l = 0; l < locations; ++l) {
    m.locations.push_back({"Main.java", static_cast<int>(l) + 1});
  }
  for (std::size_t t = 0; t < tests; ++t) {
    const bool fail = t == 0 || coin(rng);
    m.tests.push_back({"t" + std::to_string(t),
                       fail ? codenat::Verdict::kFail : codenat::Verdict::kPass});
  }
  m.covered.assign(locations, std::vector<bool>(tests, false));
  for (auto& row : m.covered) {
    for (std::size_t t = 0; t < tests; ++t) row[t] = coin(rng);
  }
  return m;
}

/// Entropy reports covering every location of `list`, with coarse values so
/// that equal entropies occur, and some blank lines.
inline std::vector<codenat::EntropyReport> random_reports(
    std::mt19937_64& rng, const codenat::SuspiciousnessList& list) {
  std::map<std::string, codenat::EntropyReport> by_file;
  for (const auto& e : list.entries) {
    auto& r = by_file[e.location.file];
    r.file = e.location.file;
    r.line_count = std::max(r.line_count, e.location.line);
    if (rng() % 8 == 0) {
      r.per_line[e.location.line] = std::nullopt;
    } else {
      r.per_line[e.location.line] = static_cast<double>(rng() % 12) / 4.0;
    }
  }
  std::vector<codenat::EntropyReport> out;
  for (auto& [file, r] : by_file) out.push_back(std::move(r));
  return out;
}

/// Space-separated tokens from a small alphabet, with occasional newlines.
inline std::string random_corpus_text(std::mt19937_64& rng, int vocab, int length) {
  std::string s;
  for (int i = 0; i < length; ++i) {
    s += "w" + std::to_string(rng() % static_cast<unsigned>(vocab));
    s += rng() % 6 == 0 ? "\n" : " ";
  }
  return s;
}

// The motivating bug: a null check the renderer needs before dereferencing.
inline const std::string kChartFile = "source/org/jfree/chart/plot/XYPlot.java";
inline const std::string kChartSource =
    "XYItemRenderer r = getRendererForDataset(d);\n"
    "Collection c = getRenderer().getAnnotations();\n"
    "Iterator i = c.iterator();\n";
inline const std::string kChartBuggyLine = "Collection c = getRenderer().getAnnotations();";
inline const std::string kChartDevFix =
    "if (r != null) {\n  Collection c = r.getAnnotations();";
inline const std::string kChartFailingPatch = "if (r == null) {\n  return null;\n}";
inline const std::string kChartPassingPatch = "if (r == null) {\n  continue;\n}";

/// Region entropies annotated on the listing: the buggy line scores 1.59,
/// the developer fix 1.34, the failing patch 2.77, the passing patch 1.98.
inline StubBackend::Fn chart_entropies() {
  return [](const codenat::ScoreQuery& q) -> std::vector<double> {
    const auto& t = q.target_text;
    if (t.find("continue") != std::string::npos) return {1.98};
    if (t.find("return null") != std::string::npos) return {2.77};
    if (t.find("r.getAnnotations") != std::string::npos) return {1.34};
    if (t.find("getRenderer().getAnnotations") != std::string::npos) return {1.59};
    const auto alt = t.find("alternative");
    if (alt != std::string::npos) return {1.0 + 0.1 * std::stoi(t.substr(alt + 11))};
    return {1.0};
  };
}

/// Twenty generated patches for the buggy line in generator order. Only #19
/// (the `continue` guard) passes the tests. Patches #2..#6 look more natural
/// than it, every other one less, so entropy-delta order tries it sixth.
inline std::vector<codenat::CandidatePatch> chart_ordering_bundle() {
  std::vector<codenat::CandidatePatch> out;
  for (int rank = 1; rank <= 20; ++rank) {
    std::string text;
    if (rank == 1) {
      text = kChartFailingPatch;
    } else if (rank == 19) {
      text = kChartPassingPatch;
    } else {
      const int n = rank <= 6 ? rank - 1 : rank + 3;
      text = "Collection c = alternative" + std::to_string(n) + "();";
    }
    auto p = replace_patch("tbar-" + std::to_string(rank), "Chart-4", kChartFile, 2,
                           kChartBuggyLine, text);
    p.original_rank = rank;
    p.label = codenat::PatchLabel::kIncorrect;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace fixture

#endif  // CODENAT_TESTS_FIXTURES_HPP
