// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Seeds and tolerances are fixed here and never tuned.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "codenat/entropy_delta.hpp"
#include "codenat/harness.hpp"
#include "codenat/ngram_model.hpp"
#include "codenat/patch_decision.hpp"
#include "codenat/rerank.hpp"
#include "codenat/sbfl.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace codenat;
using namespace std::chrono_literals;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks; the first few are kept for the report line.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os << what << ": got " << got << ", want " << want << " +/- " << tol;
    expect(std::fabs(got - want) <= tol, os.str());
  }
  Outcome outcome(const std::string& summary) const {
    std::ostringstream os;
    os << summary << "; " << checks_ - failures_ << "/" << checks_ << " checks";
    for (const auto& n : notes_) os << "; " << n;
    return {failures_ == 0, os.str()};
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::vector<std::string> notes_;
};

using Strings = std::vector<std::string>;

Strings words(const TokenStream& s) {
  Strings out;
  for (const auto& t : s.tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

const std::string kChartTestCommand =
    "f='{workdir}/" + fixture::kChartFile +
    "'; if grep -q BROKEN \"$f\"; then exit 125; fi; grep -q continue \"$f\"";

EvalPolicy policy(OrderKind order, StopKind stop = StopKind::kFirstPlausible,
                  std::uint64_t seed = 0) {
  EvalPolicy p;
  p.order = order;
  p.stop = stop;
  p.seed = seed;
  p.timeout = 10s;
  return p;
}

Outcome motivating_example() {
  Checker c;
  const fixture::StubBackend backend(fixture::chart_entropies());
  const auto patch_c = fixture::replace_patch("tbar-19", "Chart-4", fixture::kChartFile, 2,
                                              fixture::kChartBuggyLine,
                                              fixture::kChartPassingPatch);
  const auto dev = fixture::replace_patch("dev", "Chart-4", fixture::kChartFile, 2,
                                          fixture::kChartBuggyLine, fixture::kChartDevFix);
  const double delta_c = entropy_delta(fixture::kChartSource, patch_c, backend).value;
  c.near(delta_c, -0.39, 1e-9, "passing-patch delta");
  c.near(entropy_delta(fixture::kChartSource, dev, backend).value, 0.25, 1e-9,
         "developer-fix delta");

  const auto bundle = fixture::chart_ordering_bundle();
  std::vector<EntropyDelta> deltas;
  for (const auto& p : bundle) deltas.push_back(entropy_delta(fixture::kChartSource, p, backend));
  const auto ranked = rank_patches(deltas);
  fixture::TempDir tree;
  tree.write(fixture::kChartFile, fixture::kChartSource);
  const auto base =
      run_session(tree.str(), bundle, kChartTestCommand, policy(OrderKind::kOriginal));
  const auto cand = run_session(tree.str(), bundle, kChartTestCommand,
                                policy(OrderKind::kEntropyDelta), &ranked);
  const auto a = first_plausible_position(base);
  const auto b = first_plausible_position(cand);
  c.expect(a == 19u, "baseline position " + std::to_string(a.value_or(0)));
  c.expect(b == 6u, "entropy-delta position " + std::to_string(b.value_or(0)));
  const std::vector<SessionPair> pairs{{base, cand}};
  const auto summary = compare_orderings(pairs);
  const long saved = summary.per_bug.empty() ? 0 : summary.per_bug[0].saved;
  c.expect(saved == 13, "saved " + std::to_string(saved));
  std::ostringstream os;
  os << "delta=" << delta_c << " positions " << a.value_or(0) << " vs " << b.value_or(0)
     << " saved=" << saved;
  return c.outcome(os.str());
}

Outcome ochiai_oracle() {
  Checker c;
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = fixture::random_coverage(rng, 1 + rng() % 30, 1 + rng() % 20);
    const auto list = ochiai(m);
    std::map<Location, double> got;
    for (const auto& e : list.entries) got[e.location] = e.score;
    c.expect(got.size() == m.locations.size(), "location count");
    for (std::size_t l = 0; l < m.locations.size(); ++l) {
      const double diff = std::fabs(got[m.locations[l]] - oracle::ochiai(m, l));
      worst = std::max(worst, diff);
      c.expect(diff <= 1e-12, "score mismatch at " + m.locations[l].str());
    }
  }
  c.near(ochiai_score(2, 1, 2), 0.8165, 1e-4, "reference fixture");
  std::ostringstream os;
  os << "200 matrices, max |diff|=" << worst;
  return c.outcome(os.str());
}

Outcome rerank_contracts() {
  Checker c;
  std::mt19937_64 rng(2002);
  for (int trial = 0; trial < 500; ++trial) {
    const auto prior = fixture::random_list(rng, rng() % 40, 1 + static_cast<int>(rng() % 8));
    auto reports = fixture::random_reports(rng, prior);
    const std::size_t filter = trial % 2 == 0 ? 6 : 10;
    const auto out = rerank(prior, EntropyIndex(reports), {filter});
    const auto tag = "instance " + std::to_string(trial);

    bool tail_ok = out.entries.size() == prior.entries.size();
    for (std::size_t i = filter; tail_ok && i < prior.entries.size(); ++i) {
      tail_ok = out.entries[i] == prior.entries[i];
    }
    c.expect(tail_ok, tag + ": tail changed");

    auto a = out.entries;
    auto b = prior.entries;
    const auto by_loc = [](const Suspicion& x, const Suspicion& y) {
      return x.location < y.location;
    };
    std::sort(a.begin(), a.end(), by_loc);
    std::sort(b.begin(), b.end(), by_loc);
    c.expect(a == b, tag + ": not a permutation");

    auto transformed = reports;
    for (auto& r : transformed) {
      for (auto& [line, v] : r.per_line) {
        if (v) v = std::exp(*v) * 2.5 + 7.0;
      }
    }
    c.expect(rerank(prior, EntropyIndex(transformed), {filter}) == out,
             tag + ": order changed under a monotone transform");

    if (!prior.entries.empty()) {
      std::map<std::string, GroundTruth> truth;
      std::map<std::string, std::set<Location>> plain;
      GroundTruth t{"bug", {prior.entries[rng() % prior.entries.size()].location}};
      truth["bug"] = t;
      plain["bug"] = t.faulty_locations;
      const std::vector<RankedBug> ranked{{"bug", out}};
      for (std::size_t n : {1u, 3u, 5u, 10u}) {
        c.expect(top_n_score(ranked, truth, n) == oracle::top_n(ranked, plain, n),
                 tag + ": top-" + std::to_string(n) + " mismatch");
      }
    }
  }
  return c.outcome("500 instances, filters 6 and 10");
}

Outcome tie_diagnostics() {
  Checker c;
  std::mt19937_64 rng(3003);
  for (int trial = 0; trial < 100; ++trial) {
    const auto l = fixture::random_list(rng, rng() % 80, 1 + static_cast<int>(rng() % 15));
    const auto s = tie_stats(l);
    const auto o = oracle::ties(l);
    c.expect(s.tied_line_count == o.tied_line_count && s.groups.size() == o.group_count &&
                 s.max_group_size == o.max_group_size,
             "list " + std::to_string(trial));
  }

  // Three tied groups: {0.8 x3}, {0.5 x2}, {0.3 x4}.
  SuspiciousnessList prior{"ochiai", {}};
  EntropyReport report;
  report.file = "A.java";
  const double scores[] = {0.9, 0.8, 0.8, 0.8, 0.5, 0.5, 0.3, 0.3, 0.3, 0.3, 0.1};
  const double entropies[] = {1.0, 0.4, 2.2, 1.1, 3.0, 0.2, 0.7, 1.9, 0.1, 2.5, 1.0};
  for (int i = 0; i < 11; ++i) {
    prior.entries.push_back({{"A.java", i + 1}, scores[i]});
    report.per_line[i + 1] = entropies[i];
  }
  report.line_count = 11;
  c.expect(tie_stats(prior).groups.size() == 3, "fixture has three tied groups");
  const auto broken = entropy_tie_break(prior, EntropyIndex({report}));
  const double before = score_variance(prior);
  const double after = score_variance(broken);
  c.expect(after > before, "variance did not increase");
  c.expect(tie_stats(broken).tied_line_count == 0, "ties remain");
  std::ostringstream os;
  os << "100 lists; variance " << before << " -> " << after << " ("
     << (after / before - 1.0) * 100.0 << "% increase)";
  return c.outcome(os.str());
}

Outcome ngram_backend() {
  Checker c;
  const auto train = [](const std::string& text, int order, double d) {
    return NGramModel::train(std::vector{tokenize(text, LanguageHint::kPlain)}, order, d);
  };
  const auto xyz = train("x y z", 3, 0.4);
  c.near(xyz.probability(Strings{}, "x"), 0.3, 1e-9, "p(x)");
  c.near(xyz.probability(Strings{"x"}, "y"), 0.72, 1e-9, "p(y|x)");
  c.near(xyz.probability(Strings{"x"}, "x"), 0.12, 1e-9, "p(x|x)");
  c.near(xyz.probability(Strings{"x", "y"}, "z"), 0.888, 1e-9, "p(z|x y)");
  const auto aab = train("a a b", 2, 0.5);
  c.near(aab.probability(Strings{}, "a"), 11.0 / 18, 1e-9, "p(a)");
  c.near(aab.probability(Strings{"a"}, "a"), 5.0 / 9, 1e-9, "p(a|a)");
  c.near(aab.probability(Strings{"a"}, "b"), 7.0 / 18, 1e-9, "p(b|a)");
  c.near(aab.probability(Strings{"a"}, "c"), 1.0 / 18, 1e-9, "p(c|a)");
  const auto aaab = train("a a a b", 1, 0.0);
  c.near(aaab.probability(Strings{}, "a"), 0.75, 1e-9, "p(a) unigram");
  c.near(surprisal(aaab, Strings{}, "a"), -std::log(0.75), 1e-9, "surprisal(a)");

  std::mt19937_64 rng(4004);
  const auto big = train(fixture::random_corpus_text(rng, 10, 400), 3, 0.7);
  double worst = 0.0;
  for (int q = 0; q < 1000; ++q) {
    Strings ctx;
    for (std::size_t k = rng() % 3; k > 0; --k) ctx.push_back("w" + std::to_string(rng() % 12));
    double sum = big.probability(ctx, "<unseen>");
    for (const auto& w : big.vocabulary()) sum += big.probability(ctx, w);
    worst = std::max(worst, std::fabs(sum - 1.0));
  }
  c.expect(worst <= 1e-6, "normalization off by " + std::to_string(worst));

  // Duplicating a training corpus and re-scoring it. The seed was fixed
  // before the first run and is not to be changed.
  std::mt19937_64 dup_rng(5005);
  std::size_t held = 0;
  std::string first_violation;
  for (int trial = 0; trial < 50; ++trial) {
    const int order = 1 + static_cast<int>(dup_rng() % 4);
    const double d = 0.05 + static_cast<double>(dup_rng() % 90) / 100.0;
    const auto stream = tokenize(
        fixture::random_corpus_text(dup_rng, 2 + static_cast<int>(dup_rng() % 6),
                                    4 + static_cast<int>(dup_rng() % 30)),
        LanguageHint::kPlain);
    const auto once = NGramModel::train(std::vector{stream}, order, d);
    const auto twice = NGramModel::train(std::vector{stream, stream}, order, d);
    const double e1 = sequence_entropy(once, words(stream));
    const double e2 = sequence_entropy(twice, words(stream));
    if (e2 <= e1 + 1e-12) {
      ++held;
    } else if (first_violation.empty()) {
      std::ostringstream os;
      os << "corpus " << trial << " (order " << order << ", d=" << d << "): " << e1 << " -> "
         << e2;
      first_violation = os.str();
    }
  }
  c.expect(held == 50, "duplicate-corpus monotonicity held on " + std::to_string(held) +
                           "/50, first violation " + first_violation);
  std::ostringstream os;
  os << "3 hand tables, normalization max err " << worst << ", monotonicity " << held << "/50";
  return c.outcome(os.str());
}

Outcome delta_classification() {
  Checker c;
  std::mt19937_64 rng(6006);
  std::vector<TokenStream> corpus;
  for (int i = 0; i < 4; ++i) {
    corpus.push_back(tokenize(fixture::random_corpus_text(rng, 8, 150), LanguageHint::kPlain));
  }
  const NGramBackend backend(std::make_shared<const NGramModel>(NGramModel::train(corpus, 3, 0.5)),
                             "acceptance");
  int patches = 0;
  while (patches < 100) {
    const auto text = fixture::random_corpus_text(rng, 8, 30) + "\n";
    const auto lines = split_lines(text);
    const int k = 1 + static_cast<int>(rng() % lines.size());
    const auto& old_line = lines[k - 1];
    if (old_line.find_first_not_of(' ') == std::string::npos) continue;
    const auto new_line = "w" + std::to_string(rng() % 10) + " w" + std::to_string(rng() % 10);
    const auto tag = "patch " + std::to_string(patches);
    ++patches;

    const auto identity = fixture::replace_patch("id", "b", "t.txt", k, old_line, old_line);
    c.expect(entropy_delta(text, identity, backend).value == 0.0, tag + ": identity delta");

    const auto forward = fixture::replace_patch("f", "b", "t.txt", k, old_line, new_line);
    const auto d = entropy_delta(text, forward, backend);
    const auto patched = apply_patch(text, forward);
    const auto backward = fixture::replace_patch("r", "b", "t.txt", k, new_line, old_line);
    c.expect(entropy_delta(patched, backward, backend).value == -d.value,
             tag + ": not antisymmetric");
    const double before =
        score_line(make_document(text, LanguageHint::kPlain, "t.txt"), k, backend);
    const double after =
        score_line(make_document(patched, LanguageHint::kPlain, "t.txt"), k, backend);
    c.expect((d.value > 0.0) == (after < before) && (d.value < 0.0) == (after > before),
             tag + ": sign incoherent");
  }

  std::vector<double> deltas;
  std::vector<PatchLabel> labels;
  for (int i = 0; i < 40; ++i) {
    deltas.push_back(static_cast<double>(static_cast<int>(rng() % 9) - 4) / 4.0);
    labels.push_back(rng() % 3 == 0 ? PatchLabel::kCorrect : PatchLabel::kIncorrect);
  }
  std::vector<std::size_t> idx(deltas.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (int shuffle = 0; shuffle < 100; ++shuffle) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> ds;
    std::vector<PatchLabel> ls;
    std::vector<Leaning> preds;
    for (const auto i : idx) {
      ds.push_back(deltas[i]);
      ls.push_back(labels[i]);
      preds.push_back(classify(deltas[i]));
    }
    c.expect(classification_report(preds, ls).counts == oracle::confusion(ds, ls),
             "fixture " + std::to_string(shuffle) + ": confusion mismatch");
  }
  c.expect(classify(0.0) == Leaning::kIncorrect, "zero delta leans correct");
  return c.outcome("100 single-edit patches, 100 shuffled fixtures");
}

// Twenty patches for the chart line; only `passing` survives the tests and
// identical-text twins exercise the verdict cache.
std::vector<CandidatePatch> harness_bundle(std::mt19937_64& rng, int passing) {
  std::vector<CandidatePatch> bundle;
  std::vector<int> ranks(20);
  for (int i = 0; i < 20; ++i) ranks[i] = i + 1;
  std::shuffle(ranks.begin(), ranks.end(), rng);
  for (int i = 0; i < 20; ++i) {
    std::string text = i == passing ? std::string(fixture::kChartPassingPatch)
                                    : "Collection c = alternative" +
                                          std::to_string(rng() % 12) + "();";
    if (i % 7 == 3 && i != passing) text = "BROKEN " + text;
    auto p = fixture::replace_patch("p" + std::to_string(i), "Bug", fixture::kChartFile, 2,
                                    fixture::kChartBuggyLine, text);
    p.original_rank = ranks[i];
    bundle.push_back(std::move(p));
  }
  return bundle;
}

Outcome harness_counting() {
  Checker c;
  std::mt19937_64 rng(7007);
  fixture::TempDir tree;
  tree.write(fixture::kChartFile, fixture::kChartSource);
  tree.write("lib/Other.java", "class Other {}\n");
  const auto pristine = tree_digest(tree.str());
  bool restored = true;
  HarnessOptions watch;
  watch.on_record = [&](const EvalSession&, const EvalRecord&) {
    restored = restored && tree_digest(tree.str()) == pristine;
  };

  for (int b = 0; b < 4; ++b) {
    const int passing = static_cast<int>(rng() % 20);
    const auto bundle = harness_bundle(rng, passing);
    const auto pid = "p" + std::to_string(passing);
    const auto tag = "bundle " + std::to_string(b);

    const auto base = run_session(tree.str(), bundle, kChartTestCommand,
                                  policy(OrderKind::kOriginal), nullptr, watch);
    c.expect(first_plausible_position(base) ==
                 static_cast<std::size_t>(*bundle[passing].original_rank),
             tag + ": original order");

    std::vector<EntropyDelta> deltas;
    for (const auto& p : bundle) {
      deltas.push_back({p.patch_id, p.bug_id, static_cast<double>(rng() % 1000) / 100.0, {}});
    }
    const auto ranked = rank_patches(deltas);
    const auto by_delta = run_session(tree.str(), bundle, kChartTestCommand,
                                      policy(OrderKind::kEntropyDelta), &ranked, watch);
    c.expect(first_plausible_position(by_delta) == ranked.rank_of(pid),
             tag + ": entropy-delta order");

    const std::uint64_t seed = 100 + b;
    std::vector<std::string> replay(20);
    for (const auto& p : bundle) replay[*p.original_rank - 1] = p.patch_id;
    std::mt19937_64 shuffle(seed);
    for (std::size_t i = replay.size(); i > 1; --i) std::swap(replay[i - 1], replay[shuffle() % i]);
    const auto expected = static_cast<std::size_t>(
        std::find(replay.begin(), replay.end(), pid) - replay.begin() + 1);
    const auto random = run_session(tree.str(), bundle, kChartTestCommand,
                                    policy(OrderKind::kRandom, StopKind::kFirstPlausible, seed),
                                    nullptr, watch);
    c.expect(first_plausible_position(random) == expected, tag + ": random order");

    const auto exhaust = policy(OrderKind::kOriginal, StopKind::kExhaust);
    const auto cached = run_session(tree.str(), bundle, kChartTestCommand, exhaust, nullptr, watch);
    HarnessOptions no_cache = watch;
    no_cache.cache = false;
    const auto fresh =
        run_session(tree.str(), bundle, kChartTestCommand, exhaust, nullptr, no_cache);
    bool same = cached.records.size() == fresh.records.size();
    for (std::size_t i = 0; same && i < cached.records.size(); ++i) {
      same = cached.records[i].patch_id == fresh.records[i].patch_id &&
             cached.records[i].verdict == fresh.records[i].verdict;
    }
    c.expect(same, tag + ": verdicts differ with the cache off");
    c.expect(cached.cache_hits > 0 && fresh.cache_hits == 0, tag + ": cache not exercised");
    for (const auto* s : {&base, &by_delta, &random, &cached, &fresh}) {
      c.expect(s->evaluations_run + s->cache_hits == s->records.size(), tag + ": counts");
    }
  }
  c.expect(restored, "tree differed from the original after an evaluation");
  c.expect(tree_digest(tree.str()) == pristine, "tree not restored at the end");
  return c.outcome("4 bundles x 3 orders, cache on/off, restoration hash");
}

int run_cli(const fixture::TempDir& dir, const std::string& args) {
  const std::string cmd =
      "cd '" + dir.str() + "' && '" CODENAT_CLI "' " + args + " >/dev/null 2>>cli.stderr";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Each bug file has a fault written in an idiom the training corpus never
// uses, tied for sixth place under SBFL with five ordinary lines.
Outcome end_to_end() {
  Checker c;
  fixture::TempDir dir;
  const std::vector<std::string> normal{
      "int total = 0;",           "for (int i = 0; i < n; i++) {",
      "total = total + values[i];", "}",
      "if (total > limit) {",     "total = limit;",
      "return total;",            "int count = 0;",
      "count = count + 1;",       "return count;"};
  for (int f = 0; f < 6; ++f) {
    std::string body = "class Normal" + std::to_string(f) + " {\n";
    for (int rep = 0; rep < 3; ++rep) {
      for (const auto& l : normal) body += "  " + l + "\n";
    }
    dir.write("corpus/Normal" + std::to_string(f) + ".java", body + "}\n");
  }
  const std::vector<std::string> faults{
      "total ^= ~limit >>> 3 | mask;",  "count = (byte) count << 7 & 0xff;",
      "total -= --i % ~total;",         "limit |= total >>> ++count ^ 9;",
      "values[~n] ^= (short) total;"};
  nlohmann::json truth;
  std::string fl_files;
  for (int b = 0; b < 5; ++b) {
    const auto name = "Bug" + std::to_string(b);
    // Lines 1-2 are covered by passing tests; lines 3-7 and the fault (8)
    // only by the failing one.
    std::vector<std::string> lines{"class " + name + " {", "  int count = 0;",
                                   "  int total = 0;", "  total = total + values[i];",
                                   "  if (total > limit) {", "  total = limit;",
                                   "  count = count + 1;", "  " + faults[b],
                                   "  return total;", "}"};
    std::string src;
    for (const auto& l : lines) src += l + "\n";
    dir.write("bugs/" + name + ".java", src);
    std::string cov = "file,line,test_id,verdict,covered\n";
    for (int line = 1; line <= 8; ++line) {
      const auto loc = name + ".java," + std::to_string(line);
      cov += loc + ",fail1,fail,1\n";
      cov += loc + ",pass1,pass," + std::string(line <= 2 ? "1" : "0") + "\n";
    }
    dir.write("cov/" + name + ".csv", cov);
    truth[name] = {name + ".java:8"};
    fl_files += " --file " + name + ".java";
  }
  dir.write("truth.json", truth.dump());

  bool ok = run_cli(dir, "train-ngram --corpus corpus --order 3 --discount 0.5 --out model.json") == 0;
  for (int b = 0; ok && b < 5; ++b) {
    const auto name = "Bug" + std::to_string(b);
    ok = run_cli(dir, "tokenize --file bugs/" + name + ".java --out tokens/" + name + ".json") == 0 &&
         run_cli(dir, "entropy --root bugs --file " + name +
                          ".java --backend ngram:model.json --out entropy/" + name + ".json") == 0 &&
         run_cli(dir, "sbfl --coverage cov/" + name + ".csv --out prior/" + name + ".tsv") == 0 &&
         run_cli(dir, "fl-rerank --prior prior/" + name + ".tsv --entropy entropy/" + name +
                          ".json --filter 6 --out filter6/" + name + ".tsv") == 0;
  }
  ok = ok && run_cli(dir, "fl-score --technique prior=prior --technique filter6=filter6 "
                          "--truth truth.json --out top.tsv") == 0;
  c.expect(ok, "a pipeline step failed: " + [&] {
    try {
      return read_file((dir.path() / "cli.stderr").string());
    } catch (...) {
      return std::string();
    }
  }());
  if (!ok) return c.outcome("pipeline incomplete");

  std::map<std::string, std::vector<std::string>> rows;
  std::istringstream in(read_file((dir.path() / "top.tsv").string()));
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream cells(line);
    std::vector<std::string> v;
    for (std::string cell; std::getline(cells, cell, '\t');) v.push_back(cell);
    rows[v[0]] = v;
  }
  const bool parsed = rows.contains("prior") && rows.contains("filter6") &&
                      rows["prior"].size() == 4 && rows["filter6"].size() == 4;
  c.expect(parsed, "malformed Top-N table");
  if (!parsed) return c.outcome("unreadable output");
  const int prior5 = std::stoi(rows["prior"][3]);
  const int filter5 = std::stoi(rows["filter6"][3]);
  c.expect(filter5 >= prior5, "filter-6 Top-5 below prior Top-5");
  return c.outcome("Top-5 prior=" + std::to_string(prior5) +
                   " filter6=" + std::to_string(filter5) + " of 5 bugs");
}

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
  std::chrono::milliseconds budget;  // zero means no runtime bound
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"motivating-example", motivating_example, 1000ms},
      {"ochiai-oracle", ochiai_oracle, 0ms},
      {"rerank-contracts", rerank_contracts, 5000ms},
      {"tie-variance-diagnostics", tie_diagnostics, 0ms},
      {"ngram-backend", ngram_backend, 0ms},
      {"delta-classification", delta_classification, 0ms},
      {"harness-counting", harness_counting, 10000ms},
      {"end-to-end-cli", end_to_end, 0ms},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& cr = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    if (cr.budget.count() > 0 && ms > cr.budget) {
      o.pass = false;
      o.detail += "; over the " + std::to_string(cr.budget.count()) + " ms budget";
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %-26s %6lld ms  %s\n", o.pass ? "PASS" : "FAIL", i + 1, cr.name.c_str(),
                static_cast<long long>(ms.count()), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
