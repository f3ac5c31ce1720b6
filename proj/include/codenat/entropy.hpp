#ifndef CODENAT_ENTROPY_HPP
#define CODENAT_ENTROPY_HPP

// Per-line entropy under a pluggable backend.
//
// A line (or a block of lines) is scored by masking it out, surrounding the
// mask with a window of prefix and suffix tokens, and asking the backend for
// the surprisal of every target token. Line entropy is the mean surprisal in
// nats/token. A region with no tokens is scored as a blank line: the backend
// reports how surprising it is that nothing sits at that position.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "codenat/error.hpp"
#include "codenat/lexer.hpp"
#include "codenat/ngram_model.hpp"

namespace codenat {

inline constexpr std::string_view kEntropyUnit = "nats/token";

enum class BackendKind { kNGram, kRemote };

struct BackendConfig {
  std::size_t window_budget = 2048;
  double temperature = 0.5;

  void validate() const {
    if (window_budget < 16) throw InputError("window budget must be >= 16");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw InputError("temperature must be > 0");
    }
  }
};

/// One masked query: the target region and the context around it, both as
/// lexical tokens (for in-process models) and as raw text (for remote ones).
struct ScoreQuery {
  std::vector<std::string> prefix_tokens;
  std::vector<std::string> target_tokens;
  std::vector<std::string> suffix_tokens;
  std::string prefix_text;
  std::string target_text;
  std::string suffix_text;
};

class EntropyBackend {
 public:
  virtual ~EntropyBackend() = default;

  virtual BackendKind kind() const = 0;
  /// Stable identifier; part of every cache key.
  virtual std::string id() const = 0;
  /// Per-token surprisals (nats) of the query target. An empty target yields
  /// the surprisal(s) of the empty region.
  virtual std::vector<double> score(const ScoreQuery& query) const = 0;
  virtual bool supports_blank() const { return true; }
  /// How empty regions are scored; recorded in reports.
  virtual std::string blank_convention() const = 0;

  const BackendConfig& config() const { return config_; }

 protected:
  explicit EntropyBackend(BackendConfig config) : config_(config) {
    config_.validate();
  }

 private:
  BackendConfig config_;
};

/// In-process backend over a trained n-gram model. Conditions on the prefix
/// only; temperature is ignored.
class NGramBackend final : public EntropyBackend {
 public:
  NGramBackend(std::shared_ptr<const NGramModel> model, std::string model_id,
               BackendConfig config = {})
      : EntropyBackend(config),
        model_(std::move(model)),
        model_id_(std::move(model_id)) {
    if (!model_) throw InputError("n-gram backend requires a model");
  }

  BackendKind kind() const override { return BackendKind::kNGram; }
  std::string id() const override { return "ngram:" + model_id_; }
  std::string blank_convention() const override {
    return "ngram: -ln p(line boundary | prefix)";
  }

  std::vector<double> score(const ScoreQuery& q) const override {
    const auto keep = static_cast<std::size_t>(model_->order() - 1);
    std::vector<std::string> history(
        q.prefix_tokens.end() -
            static_cast<std::ptrdiff_t>(std::min(keep, q.prefix_tokens.size())),
        q.prefix_tokens.end());
    if (q.target_tokens.empty()) {
      const double p = model_->boundary_probability(history);
      return {p >= 1.0 ? 0.0 : -std::log(p)};
    }
    std::vector<double> out;
    out.reserve(q.target_tokens.size());
    for (const auto& tok : q.target_tokens) {
      out.push_back(surprisal(*model_, history, tok));
      history.push_back(tok);
      if (history.size() > keep) history.erase(history.begin());
    }
    return out;
  }

  const NGramModel& model() const { return *model_; }

 private:
  std::shared_ptr<const NGramModel> model_;
  std::string model_id_;
};

/// Token index ranges [begin, end) of the prefix and suffix windows.
struct ContextWindow {
  std::size_t prefix_begin = 0;
  std::size_t prefix_end = 0;
  std::size_t suffix_begin = 0;
  std::size_t suffix_end = 0;

  std::size_t prefix_size() const { return prefix_end - prefix_begin; }
  std::size_t suffix_size() const { return suffix_end - suffix_begin; }
};

/// Window around the token range [region_begin, region_end). Each side gets
/// half the budget; capacity a short side cannot use goes to the other.
inline ContextWindow build_context_around(const TokenStream& stream,
                                          std::size_t region_begin,
                                          std::size_t region_end,
                                          std::size_t budget) {
  const std::size_t available_prefix = region_begin;
  const std::size_t available_suffix = stream.tokens.size() - region_end;
  std::size_t prefix = std::min(available_prefix, budget / 2);
  const std::size_t suffix = std::min(available_suffix, budget - prefix);
  prefix = std::min(available_prefix, budget - suffix);
  return {region_begin - prefix, region_begin, region_end, region_end + suffix};
}

inline ContextWindow build_context(const TokenStream& stream, int target_line,
                                   std::size_t budget) {
  if (budget < 2) throw InputError("context budget must be >= 2");
  const auto range = line_token_range(stream, target_line);
  if (!range) {
    throw InputError("line " + std::to_string(target_line) + " is blank");
  }
  return build_context_around(stream, range->first, range->last + 1, budget);
}

/// Results cache keyed by (digest, region, backend, budget, temperature).
/// Writers are serialized; readers share the lock.
class EntropyCache {
 public:
  std::optional<double> get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    ++hits_;
    return it->second;
  }

  void put(const std::string& key, double value) {
    std::unique_lock lock(mutex_);
    values_.emplace(key, value);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return values_.size();
  }

  std::size_t hits() const { return hits_.load(); }

  static std::string key(const std::string& digest, std::string_view what,
                         int first, int last, const EntropyBackend& backend) {
    std::ostringstream os;
    os.precision(17);
    os << digest << '|' << what << '|' << first << '|' << last << '|'
       << backend.id() << '|' << backend.config().window_budget << '|'
       << backend.config().temperature;
    return os.str();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, double> values_;
  mutable std::atomic<std::size_t> hits_{0};
};

namespace detail {

inline std::size_t first_token_from_line(const TokenStream& stream, int line) {
  const auto& toks = stream.tokens;
  return static_cast<std::size_t>(
      std::lower_bound(toks.begin(), toks.end(), line,
                       [](const Token& t, int l) { return t.line < l; }) -
      toks.begin());
}

inline std::pair<std::size_t, std::size_t> lines_token_range(
    const TokenStream& stream, int first_line, int last_line) {
  const auto& toks = stream.tokens;
  const auto lo = std::lower_bound(
      toks.begin(), toks.end(), first_line,
      [](const Token& t, int l) { return t.line < l; });
  const auto hi = std::upper_bound(
      lo, toks.end(), last_line,
      [](int l, const Token& t) { return l < t.line; });
  return {static_cast<std::size_t>(lo - toks.begin()),
          static_cast<std::size_t>(hi - toks.begin())};
}

inline ScoreQuery make_query(const Document& doc, std::size_t region_begin,
                             std::size_t region_end, int first_line,
                             std::size_t budget) {
  const auto& toks = doc.stream.tokens;
  const auto window =
      build_context_around(doc.stream, region_begin, region_end, budget);
  ScoreQuery q;
  for (auto i = window.prefix_begin; i < window.prefix_end; ++i) {
    q.prefix_tokens.push_back(toks[i].text);
  }
  for (auto i = region_begin; i < region_end; ++i) {
    q.target_tokens.push_back(toks[i].text);
  }
  for (auto i = window.suffix_begin; i < window.suffix_end; ++i) {
    q.suffix_tokens.push_back(toks[i].text);
  }
  const bool empty = region_begin == region_end;
  const std::size_t target_start =
      empty ? doc.line_start(first_line) : toks[region_begin].span.start;
  const std::size_t target_end =
      empty ? target_start : toks[region_end - 1].span.end;
  const std::size_t prefix_start =
      window.prefix_size() > 0
          ? toks[window.prefix_begin].span.start
          : std::min(doc.line_start(first_line), target_start);
  const std::size_t suffix_end = window.suffix_size() > 0
                                     ? toks[window.suffix_end - 1].span.end
                                     : target_end;
  q.prefix_text = doc.text.substr(prefix_start, target_start - prefix_start);
  q.target_text = doc.text.substr(target_start, target_end - target_start);
  q.suffix_text = doc.text.substr(target_end, suffix_end - target_end);
  return q;
}

inline double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw Error("backend returned no surprisals");
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

inline double cached(EntropyCache* cache, const std::string& key,
                     const auto& compute) {
  if (cache != nullptr) {
    if (const auto hit = cache->get(key)) return *hit;
  }
  const double value = compute();
  if (cache != nullptr) cache->put(key, value);
  return value;
}

}  // namespace detail

/// Entropy of the empty region at `position` (1 .. line_count + 1): the
/// context is everything before that line and everything from it on.
inline double blank_line_entropy(const Document& doc, int position,
                                 const EntropyBackend& backend,
                                 EntropyCache* cache = nullptr) {
  if (position < 1 || position > doc.line_count() + 1) {
    throw InputError("blank position " + std::to_string(position) +
                     " out of range");
  }
  if (!backend.supports_blank()) {
    throw CapabilityError("backend " + backend.id() +
                          " cannot score blank lines");
  }
  const auto key = EntropyCache::key(doc.stream.source_digest, "blank",
                                     position, position, backend);
  return detail::cached(cache, key, [&] {
    const auto begin = detail::first_token_from_line(doc.stream, position);
    const auto q = detail::make_query(doc, begin, begin, position,
                                      backend.config().window_budget);
    return detail::mean_of(backend.score(q));
  });
}

/// Mean surprisal over all tokens of lines [first_line, last_line] masked as
/// one region. A region without tokens scores as a blank line.
inline double score_region(const Document& doc, int first_line, int last_line,
                           const EntropyBackend& backend,
                           EntropyCache* cache = nullptr) {
  if (first_line < 1 || last_line < first_line ||
      last_line > doc.line_count()) {
    throw InputError("region [" + std::to_string(first_line) + ", " +
                     std::to_string(last_line) + "] out of range");
  }
  const auto [begin, end] =
      detail::lines_token_range(doc.stream, first_line, last_line);
  if (begin == end) return blank_line_entropy(doc, first_line, backend, cache);
  const auto key = EntropyCache::key(doc.stream.source_digest, "region",
                                     first_line, last_line, backend);
  return detail::cached(cache, key, [&] {
    const auto q = detail::make_query(doc, begin, end, first_line,
                                      backend.config().window_budget);
    return detail::mean_of(backend.score(q));
  });
}

inline double score_line(const Document& doc, int line,
                         const EntropyBackend& backend,
                         EntropyCache* cache = nullptr) {
  if (!line_token_range(doc.stream, line)) {
    throw InputError("line " + std::to_string(line) + " is blank");
  }
  return score_region(doc, line, line, backend, cache);
}

struct EntropyReport {
  std::string file;
  std::string backend_id;
  std::string unit = std::string(kEntropyUnit);
  std::string source_digest;
  int line_count = 0;
  std::size_t window_budget = 0;
  double temperature = 0.0;
  std::string blank_convention;
  // nullopt marks a blank line.
  std::map<int, std::optional<double>> per_line;
  bool complete = true;
  std::vector<int> failed_lines;

  bool is_blank(int line) const {
    const auto it = per_line.find(line);
    return it != per_line.end() && !it->second.has_value();
  }
};

struct ScoreFileOptions {
  EntropyCache* cache = nullptr;
  unsigned jobs = 1;
};

/// Scores every non-blank line. Transport failures on individual lines mark
/// the report incomplete and list the lines instead of throwing.
inline EntropyReport score_file(const Document& doc,
                                const EntropyBackend& backend,
                                const ScoreFileOptions& options = {}) {
  EntropyReport report;
  report.file = doc.path;
  report.backend_id = backend.id();
  report.source_digest = doc.stream.source_digest;
  report.line_count = doc.line_count();
  report.window_budget = backend.config().window_budget;
  report.temperature = backend.config().temperature;
  report.blank_convention = backend.blank_convention();

  std::vector<int> lines;
  for (int line = 1; line <= doc.line_count(); ++line) {
    if (line_token_range(doc.stream, line)) {
      lines.push_back(line);
    } else {
      report.per_line[line] = std::nullopt;
    }
  }

  std::vector<std::optional<double>> values(lines.size());
  std::vector<char> failed(lines.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < lines.size(); i = next++) {
      try {
        values[i] = score_line(doc, lines[i], backend, options.cache);
      } catch (const TransportError&) {
        failed[i] = 1;
      }
    }
  };
  const unsigned jobs = std::max(1u, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (failed[i]) {
      report.complete = false;
      report.failed_lines.push_back(lines[i]);
    } else {
      report.per_line[lines[i]] = values[i];
    }
  }
  return report;
}

inline nlohmann::json to_json(const EntropyReport& r) {
  nlohmann::json lines = nlohmann::json::object();
  for (const auto& [line, value] : r.per_line) {
    if (value && std::isinf(*value)) {
      lines[std::to_string(line)] = "inf";
    } else if (value) {
      lines[std::to_string(line)] = *value;
    } else {
      lines[std::to_string(line)] = "blank";
    }
  }
  return {{"file", r.file},
          {"backend_id", r.backend_id},
          {"unit", r.unit},
          {"source_digest", r.source_digest},
          {"line_count", r.line_count},
          {"window_budget", r.window_budget},
          {"temperature", r.temperature},
          {"blank_convention", r.blank_convention},
          {"complete", r.complete},
          {"failed_lines", r.failed_lines},
          {"per_line", lines}};
}

inline EntropyReport entropy_report_from_json(const nlohmann::json& j) {
  try {
    EntropyReport r;
    r.file = j.at("file").get<std::string>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.unit = j.at("unit").get<std::string>();
    if (r.unit != kEntropyUnit) {
      throw InputError("unsupported entropy unit '" + r.unit + "'");
    }
    r.source_digest = j.at("source_digest").get<std::string>();
    r.line_count = j.value("line_count", 0);
    r.window_budget = j.value("window_budget", std::size_t{0});
    r.temperature = j.value("temperature", 0.0);
    r.blank_convention = j.value("blank_convention", "");
    r.complete = j.value("complete", true);
    r.failed_lines = j.value("failed_lines", std::vector<int>{});
    for (const auto& [key, value] : j.at("per_line").items()) {
      const int line = std::stoi(key);
      if (value.is_string()) {
        const auto marker = value.get<std::string>();
        if (marker == "blank") {
          r.per_line[line] = std::nullopt;
        } else if (marker == "inf") {
          r.per_line[line] = std::numeric_limits<double>::infinity();
        } else {
          throw InputError("unknown line marker in entropy report");
        }
      } else {
        const double v = value.get<double>();
        if (!(v >= 0.0)) throw InputError("negative entropy in report");
        r.per_line[line] = v;
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed entropy report: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw InputError("malformed line key in entropy report");
  }
}

}  // namespace codenat

#endif  // CODENAT_ENTROPY_HPP
