#ifndef CODENAT_NGRAM_MODEL_HPP
#define CODENAT_NGRAM_MODEL_HPP

// Interpolated absolute-discount n-gram model over lexical tokens.
//
//   p_0(w)     = 1 / (|V| + 1)                       (uniform, incl. <unk>)
//   p_k(w | h) = max(c(h,w) - d, 0) / c(h) + d * N1+(h) / c(h) * p_{k-1}(w | h')
//
// where h' drops the oldest token of h and a context never seen (c(h) = 0)
// passes the lower-order estimate through unchanged. The same recursion over
// the binary event {line ends, line continues} (base 1/2) models line
// boundaries; it answers blank-line queries.
//
// With d = 0 the model is plain maximum likelihood and unseen events get
// probability 0 (surprisal +inf).

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "codenat/error.hpp"
#include "codenat/lexer.hpp"

namespace codenat {

class NGramModel {
 public:
  using TokenId = std::uint32_t;
  static constexpr TokenId kUnknownId = 0;
  static constexpr std::string_view kUnknownSymbol = "<unk>";
  static constexpr int kFormatVersion = 1;

  struct ContextStats {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> successors;
    std::uint64_t line_ends = 0;
    std::uint64_t line_continues = 0;
  };

  static NGramModel train(std::span<const TokenStream> corpus, int order,
                          double discount) {
    if (order < 1) throw InputError("n-gram order must be >= 1");
    if (!(discount >= 0.0 && discount < 1.0)) {
      throw InputError("discount must lie in [0, 1)");
    }
    if (corpus.empty()) throw InputError("empty training corpus");

    NGramModel model;
    model.order_ = order;
    model.discount_ = discount;

    std::set<std::string_view> types;
    for (const auto& stream : corpus) {
      for (const auto& tok : stream.tokens) types.insert(tok.text);
    }
    if (types.empty()) throw InputError("training corpus contains no tokens");
    for (const auto text : types) model.add_type(std::string(text));

    for (const auto& stream : corpus) {
      std::vector<TokenId> ids;
      ids.reserve(stream.tokens.size());
      for (const auto& tok : stream.tokens) ids.push_back(model.id(tok.text));
      model.count_stream(ids, stream.tokens);
    }
    return model;
  }

  int order() const { return order_; }
  double discount() const { return discount_; }

  /// Token types seen in training; index i has id i + 1.
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  bool contains(std::string_view text) const {
    return ids_.find(std::string(text)) != ids_.end();
  }

  TokenId id(std::string_view text) const {
    const auto it = ids_.find(std::string(text));
    return it == ids_.end() ? kUnknownId : it->second;
  }

  /// p(token | context). Only the last order-1 context tokens are used.
  double probability(std::span<const std::string> context,
                     std::string_view token) const {
    const auto history = context_ids(context);
    const TokenId w = id(token);
    double p = 1.0 / static_cast<double>(vocab_.size() + 1);
    for (std::size_t k = 0; k <= history.size(); ++k) {
      const auto* stats = find(std::span(history).last(k));
      if (stats == nullptr || stats->total == 0) continue;
      const auto total = static_cast<double>(stats->total);
      const auto it = stats->successors.find(w);
      const double count =
          it == stats->successors.end() ? 0.0 : static_cast<double>(it->second);
      const double seen = static_cast<double>(stats->successors.size());
      p = std::max(count - discount_, 0.0) / total +
          discount_ * seen / total * p;
    }
    return p;
  }

  /// Probability that a line boundary follows the context.
  double boundary_probability(std::span<const std::string> context) const {
    const auto history = context_ids(context);
    double p = 0.5;
    for (std::size_t k = 0; k <= history.size(); ++k) {
      const auto* stats = find(std::span(history).last(k));
      if (stats == nullptr) continue;
      const auto ends = static_cast<double>(stats->line_ends);
      const auto conts = static_cast<double>(stats->line_continues);
      const double total = ends + conts;
      if (total == 0.0) continue;
      const double seen = (ends > 0 ? 1.0 : 0.0) + (conts > 0 ? 1.0 : 0.0);
      p = std::max(ends - discount_, 0.0) / total +
          discount_ * seen / total * p;
    }
    return p;
  }

  /// Mixture weights of the interpolation for this context, lowest order
  /// first: entry 0 weighs the uniform base, entry k the discounted order-k
  /// estimate. They sum to 1.
  std::vector<double> interpolation_weights(
      std::span<const std::string> context) const {
    const auto history = context_ids(context);
    std::vector<double> weights(static_cast<std::size_t>(order_) + 1, 0.0);
    double carry = 1.0;  // product of backoff weights of higher orders
    for (std::size_t k = history.size() + 1; k-- > 0;) {
      const auto* stats = find(std::span(history).last(k));
      if (stats == nullptr || stats->total == 0) continue;
      const double backoff = discount_ *
                             static_cast<double>(stats->successors.size()) /
                             static_cast<double>(stats->total);
      weights[k + 1] = carry * (1.0 - backoff);
      carry *= backoff;
    }
    weights[0] = carry;
    return weights;
  }

  /// Statistics stored for an exact context, or nullptr.
  const ContextStats* stats(std::span<const std::string> context) const {
    std::vector<TokenId> key;
    for (const auto& t : context) {
      const auto i = id(t);
      if (i == kUnknownId) return nullptr;
      key.push_back(i);
    }
    return find(key);
  }

  nlohmann::json to_json() const {
    nlohmann::json contexts = nlohmann::json::array();
    for (const auto& [key, st] : contexts_) {
      nlohmann::json ctx = nlohmann::json::array();
      for (const auto i : key) ctx.push_back(vocab_[i - 1]);
      nlohmann::json succ = nlohmann::json::array();
      for (const auto& [w, c] : st.successors) {
        succ.push_back({vocab_[w - 1], c});
      }
      contexts.push_back({{"context", ctx},
                          {"successors", succ},
                          {"line_ends", st.line_ends},
                          {"line_continues", st.line_continues}});
    }
    return {{"format", "codenat-ngram"},
            {"version", kFormatVersion},
            {"order", order_},
            {"discount", discount_},
            {"unknown_symbol", kUnknownSymbol},
            {"vocabulary", vocab_},
            {"contexts", contexts}};
  }

  static NGramModel from_json(const nlohmann::json& j) {
    try {
      if (j.value("format", "") != "codenat-ngram") {
        throw InputError("not an n-gram model file");
      }
      const int version = j.at("version").get<int>();
      if (version != kFormatVersion) {
        throw InputError("n-gram model version " + std::to_string(version) +
                         " is not supported (expected " +
                         std::to_string(kFormatVersion) + ")");
      }
      NGramModel m;
      m.order_ = j.at("order").get<int>();
      m.discount_ = j.at("discount").get<double>();
      if (m.order_ < 1 || !(m.discount_ >= 0.0 && m.discount_ < 1.0)) {
        throw InputError("invalid order or discount in model file");
      }
      for (const auto& t : j.at("vocabulary")) {
        if (m.contains(t.get<std::string>())) {
          throw InputError("duplicate vocabulary entry in model file");
        }
        m.add_type(t.get<std::string>());
      }
      for (const auto& c : j.at("contexts")) {
        std::vector<TokenId> key;
        for (const auto& t : c.at("context")) key.push_back(m.require_id(t));
        if (static_cast<int>(key.size()) >= m.order_) {
          throw InputError("context longer than order - 1 in model file");
        }
        ContextStats st;
        for (const auto& pair : c.at("successors")) {
          const auto count = pair.at(1).get<std::uint64_t>();
          if (count == 0) throw InputError("zero successor count in model file");
          st.successors[m.require_id(pair.at(0))] = count;
          st.total += count;
        }
        st.line_ends = c.at("line_ends").get<std::uint64_t>();
        st.line_continues = c.at("line_continues").get<std::uint64_t>();
        m.contexts_[std::move(key)] = std::move(st);
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed n-gram model file: ") + e.what());
    }
  }

 private:
  void add_type(std::string text) {
    const auto next = static_cast<TokenId>(vocab_.size() + 1);
    ids_.emplace(text, next);
    vocab_.push_back(std::move(text));
  }

  TokenId require_id(const nlohmann::json& t) const {
    const auto i = id(t.get<std::string>());
    if (i == kUnknownId) {
      throw InputError("model file references token outside vocabulary");
    }
    return i;
  }

  std::vector<TokenId> context_ids(std::span<const std::string> context) const {
    const auto keep = std::min<std::size_t>(context.size(),
                                            static_cast<std::size_t>(order_ - 1));
    std::vector<TokenId> out;
    out.reserve(keep);
    for (const auto& t : context.last(keep)) out.push_back(id(t));
    return out;
  }

  const ContextStats* find(std::span<const TokenId> key) const {
    for (const auto i : key) {
      if (i == kUnknownId) return nullptr;
    }
    const auto it = contexts_.find(std::vector<TokenId>(key.begin(), key.end()));
    return it == contexts_.end() ? nullptr : &it->second;
  }

  void count_stream(const std::vector<TokenId>& ids,
                    const std::vector<Token>& tokens) {
    const auto max_ctx = static_cast<std::size_t>(order_ - 1);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      for (std::size_t k = 0; k <= std::min(max_ctx, j); ++k) {
        auto& st = contexts_[std::vector<TokenId>(ids.begin() + (j - k),
                                                  ids.begin() + j)];
        ++st.successors[ids[j]];
        ++st.total;
      }
      const bool ends_line =
          j + 1 == ids.size() || tokens[j + 1].line > tokens[j].line;
      for (std::size_t k = 0; k <= std::min(max_ctx, j + 1); ++k) {
        auto& st = contexts_[std::vector<TokenId>(ids.begin() + (j + 1 - k),
                                                  ids.begin() + (j + 1))];
        ++(ends_line ? st.line_ends : st.line_continues);
      }
    }
  }

  int order_ = 1;
  double discount_ = 0.0;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> ids_;
  std::map<std::vector<TokenId>, ContextStats> contexts_;
};

/// -ln p(token | context), in nats. +inf for a zero-probability event.
inline double surprisal(const NGramModel& model,
                        std::span<const std::string> context,
                        std::string_view token) {
  const double p = model.probability(context, token);
  if (p <= 0.0) return std::numeric_limits<double>::infinity();
  return p >= 1.0 ? 0.0 : -std::log(p);
}

/// Mean per-token surprisal of `tokens`, each conditioned on `context`
/// followed by the tokens before it.
inline double sequence_entropy(const NGramModel& model,
                               std::span<const std::string> tokens,
                               std::span<const std::string> context = {}) {
  if (tokens.empty()) throw InputError("sequence_entropy of an empty sequence");
  const auto keep = static_cast<std::size_t>(model.order() - 1);
  std::vector<std::string> history(
      context.end() - static_cast<std::ptrdiff_t>(std::min(keep, context.size())),
      context.end());
  double sum = 0.0;
  for (const auto& tok : tokens) {
    sum += surprisal(model, history, tok);
    history.push_back(tok);
    if (history.size() > keep) history.erase(history.begin());
  }
  return sum / static_cast<double>(tokens.size());
}

}  // namespace codenat

#endif  // CODENAT_NGRAM_MODEL_HPP
