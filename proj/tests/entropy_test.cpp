#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "codenat/entropy.hpp"
#include "support/fixtures.hpp"

using namespace codenat;

namespace {

std::shared_ptr<const NGramModel> small_model() {
  const std::vector<TokenStream> corpus{
      tokenize("int a = 1;\nint b = a + 1;\nreturn b;\n", LanguageHint::kJava)};
  return std::make_shared<const NGramModel>(NGramModel::train(corpus, 3, 0.5));
}

const char* kSource = "int a = 1;\n\nint b = a + 1;\nreturn b;\n";

}  // namespace

TEST(ContextWindowTest, SplitsBudgetAndLendsUnusedSide) {
  const auto s = tokenize("a b c d e f g h i j k l m", LanguageHint::kPlain);
  // Target is token 10; 10 tokens before, 2 after.
  const auto w = build_context_around(s, 10, 11, 8);
  EXPECT_EQ(w.suffix_size(), 2u);
  EXPECT_EQ(w.prefix_size(), 6u);
  EXPECT_EQ(w.prefix_end, 10u);
  const auto even = build_context_around(s, 6, 7, 8);
  EXPECT_EQ(even.prefix_size(), 4u);
  EXPECT_EQ(even.suffix_size(), 4u);
  const auto all = build_context_around(s, 6, 7, 100);
  EXPECT_EQ(all.prefix_size() + all.suffix_size(), 12u);
}

TEST(ContextWindowTest, RejectsBlankLineAndTinyBudget) {
  const auto s = tokenize("a\n\nb", LanguageHint::kPlain);
  EXPECT_THROW(build_context(s, 2, 16), InputError);
  EXPECT_THROW(build_context(s, 1, 1), InputError);
  EXPECT_EQ(build_context(s, 1, 16).suffix_size(), 1u);
}

TEST(EntropyTest, NGramLineEntropyIsConditionedMean) {
  const auto model = small_model();
  const NGramBackend backend(model, "small");
  const auto doc = make_document(kSource, LanguageHint::kJava, "A.java");
  const std::vector<std::string> prefix{"int", "a", "=", "1", ";"};
  const std::vector<std::string> line{"int", "b", "=", "a", "+", "1", ";"};
  EXPECT_NEAR(score_line(doc, 3, backend), sequence_entropy(*model, line, prefix), 1e-12);
}

TEST(EntropyTest, NGramBlankLineUsesBoundaryModel) {
  const auto model = small_model();
  const NGramBackend backend(model, "small");
  const auto doc = make_document(kSource, LanguageHint::kJava, "A.java");
  const std::vector<std::string> ctx{"1", ";"};
  EXPECT_NEAR(blank_line_entropy(doc, 2, backend),
              -std::log(model->boundary_probability(ctx)), 1e-12);
  EXPECT_NO_THROW(blank_line_entropy(doc, doc.line_count() + 1, backend));
  EXPECT_THROW(blank_line_entropy(doc, doc.line_count() + 2, backend), InputError);
}

TEST(EntropyTest, ScoreFileMarksBlankLines) {
  const NGramBackend backend(small_model(), "small");
  const auto doc = make_document(kSource, LanguageHint::kJava, "A.java");
  const auto report = score_file(doc, backend);
  EXPECT_EQ(report.line_count, 4);
  EXPECT_TRUE(report.complete);
  EXPECT_TRUE(report.is_blank(2));
  EXPECT_FALSE(report.is_blank(1));
  EXPECT_EQ(report.per_line.size(), 4u);
  EXPECT_EQ(report.unit, "nats/token");
  EXPECT_EQ(report.backend_id, "ngram:small");
  for (const auto& [line, value] : report.per_line) {
    if (value) EXPECT_GE(*value, 0.0);
  }
}

TEST(EntropyTest, ParallelScoringMatchesSerial) {
  const NGramBackend backend(small_model(), "small");
  std::string big;
  for (int i = 0; i < 40; ++i) big += "int v" + std::to_string(i) + " = a + " + std::to_string(i) + ";\n";
  const auto doc = make_document(big, LanguageHint::kJava, "Big.java");
  const auto serial = score_file(doc, backend);
  const auto parallel = score_file(doc, backend, {nullptr, 4});
  EXPECT_EQ(serial.per_line, parallel.per_line);
}

TEST(EntropyTest, CacheServesRepeatQueries) {
  fixture::StubBackend backend([](const ScoreQuery& q) {
    return std::vector<double>(q.target_tokens.size(), 2.0);
  });
  EntropyCache cache;
  const auto doc = make_document(kSource, LanguageHint::kJava, "A.java");
  score_file(doc, backend, {&cache, 1});
  const auto calls = backend.calls;
  const auto again = score_file(doc, backend, {&cache, 1});
  EXPECT_EQ(backend.calls, calls);
  EXPECT_EQ(cache.hits(), 3u);
  EXPECT_DOUBLE_EQ(*again.per_line.at(1), 2.0);
}

TEST(EntropyTest, CacheKeySeparatesConfigurations) {
  auto fn = [](const ScoreQuery&) { return std::vector<double>{1.0}; };
  fixture::StubBackend cold(fn, {2048, 0.5});
  fixture::StubBackend warm(fn, {2048, 0.8});
  fixture::StubBackend narrow(fn, {64, 0.5});
  EXPECT_NE(EntropyCache::key("d", "region", 1, 1, cold),
            EntropyCache::key("d", "region", 1, 1, warm));
  EXPECT_NE(EntropyCache::key("d", "region", 1, 1, cold),
            EntropyCache::key("d", "region", 1, 1, narrow));
  EXPECT_NE(EntropyCache::key("d", "region", 1, 1, cold),
            EntropyCache::key("d", "blank", 1, 1, cold));
}

TEST(EntropyTest, QueryTextsRebuildTheFile) {
  std::vector<ScoreQuery> seen;
  fixture::StubBackend backend([&](const ScoreQuery& q) {
    seen.push_back(q);
    return std::vector<double>{1.0};
  });
  const std::string src = "alpha beta\ngamma delta\nepsilon\n";
  const auto doc = make_document(src, LanguageHint::kPlain, "t.txt");
  score_line(doc, 2, backend);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0].target_text, "gamma delta");
  EXPECT_EQ(seen[0].prefix_text, "alpha beta\n");
  EXPECT_EQ(seen[0].suffix_text, "\nepsilon");
  EXPECT_EQ(seen[0].prefix_text + seen[0].target_text + seen[0].suffix_text,
            "alpha beta\ngamma delta\nepsilon");
}

TEST(EntropyTest, BudgetLimitsTheWindow) {
  std::size_t widest = 0;
  fixture::StubBackend backend(
      [&](const ScoreQuery& q) {
        widest = std::max(widest, q.prefix_tokens.size() + q.suffix_tokens.size());
        return std::vector<double>{1.0};
      },
      {16, 0.5});
  std::string src;
  for (int i = 0; i < 30; ++i) src += "a b c\n";
  const auto doc = make_document(src, LanguageHint::kPlain, "t.txt");
  score_file(doc, backend);
  EXPECT_EQ(widest, 16u);
}

TEST(EntropyTest, TransportFailureMarksReportIncomplete) {
  fixture::StubBackend backend([](const ScoreQuery& q) -> std::vector<double> {
    if (q.target_text.find("b") != std::string::npos) throw TransportError("down", 5, 503);
    return {1.0};
  });
  const auto doc = make_document(kSource, LanguageHint::kJava, "A.java");
  const auto report = score_file(doc, backend);
  EXPECT_FALSE(report.complete);
  EXPECT_EQ(report.failed_lines, (std::vector<int>{3, 4}));
  EXPECT_FALSE(report.per_line.contains(3));
}

TEST(EntropyTest, BlankUnsupportedIsCapabilityError) {
  fixture::StubBackend backend([](const ScoreQuery&) { return std::vector<double>{1.0}; },
                               {}, false);
  const auto doc = make_document(kSource, LanguageHint::kJava, "A.java");
  EXPECT_THROW(blank_line_entropy(doc, 2, backend), CapabilityError);
  EXPECT_THROW(score_line(doc, 2, backend), InputError);
}

TEST(EntropyTest, BackendConfigValidation) {
  auto fn = [](const ScoreQuery&) { return std::vector<double>{1.0}; };
  EXPECT_THROW(fixture::StubBackend(fn, {8, 0.5}), InputError);
  EXPECT_THROW(fixture::StubBackend(fn, {2048, 0.0}), InputError);
}

TEST(EntropyTest, ReportJsonRoundTrip) {
  fixture::StubBackend backend([](const ScoreQuery& q) -> std::vector<double> {
    if (q.target_text == "return b;") return {std::numeric_limits<double>::infinity()};
    return {0.25, 0.75};
  });
  const auto doc = make_document(kSource, LanguageHint::kJava, "A.java");
  const auto report = score_file(doc, backend);
  const auto j = to_json(report);
  EXPECT_EQ(j["per_line"]["2"], "blank");
  EXPECT_EQ(j["per_line"]["4"], "inf");
  const auto back = entropy_report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.per_line, report.per_line);
  EXPECT_EQ(back.source_digest, report.source_digest);
  EXPECT_EQ(back.line_count, report.line_count);
}

TEST(EntropyTest, ReportRejectsForeignUnit) {
  fixture::StubBackend backend([](const ScoreQuery&) { return std::vector<double>{1.0}; });
  auto j = to_json(score_file(make_document("x\n", LanguageHint::kPlain, "x"), backend));
  j["unit"] = "bits/token";
  EXPECT_THROW(entropy_report_from_json(j), InputError);
}
