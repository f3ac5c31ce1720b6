#ifndef CODENAT_PATCH_HPP
#define CODENAT_PATCH_HPP

// Candidate patches as line edits, unified-diff ingestion, and application.
//
// An edit replaces the original lines [anchor_line, anchor_line + k) with the
// lines of new_text, where k is the number of lines in old_text. Deletes have
// no new_text; inserts have no old_text and place new_text before
// anchor_line (anchor_line = line_count + 1 appends).

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "codenat/digest.hpp"
#include "codenat/error.hpp"
#include "codenat/lexer.hpp"

namespace codenat {

enum class EditKind { kDelete, kReplace, kInsert };

inline std::string_view to_string(EditKind kind) {
  switch (kind) {
    case EditKind::kDelete: return "delete";
    case EditKind::kReplace: return "replace";
    case EditKind::kInsert: return "insert";
  }
  return "unknown";
}

struct LineEdit {
  EditKind kind = EditKind::kReplace;
  std::string file;
  int anchor_line = 1;
  std::string old_text;  // empty for insert
  std::string new_text;  // empty for delete

  bool operator==(const LineEdit&) const = default;
};

enum class PatchLabel { kCorrect, kIncorrect, kUnknown };

inline std::string_view to_string(PatchLabel label) {
  switch (label) {
    case PatchLabel::kCorrect: return "correct";
    case PatchLabel::kIncorrect: return "incorrect";
    case PatchLabel::kUnknown: return "unknown";
  }
  return "unknown";
}

inline PatchLabel parse_patch_label(std::string_view s) {
  if (s == "correct") return PatchLabel::kCorrect;
  if (s == "incorrect") return PatchLabel::kIncorrect;
  if (s == "unknown") return PatchLabel::kUnknown;
  throw InputError("unknown patch label '" + std::string(s) + "'");
}

struct CandidatePatch {
  std::string patch_id;
  std::string bug_id;
  std::vector<LineEdit> edits;
  std::string origin;
  std::optional<PatchLabel> label;
  std::optional<int> original_rank;
  // Digest of the source the diff was made against, when recorded.
  std::optional<std::string> source_digest;

  /// Files touched, in first-edit order.
  std::vector<std::string> files() const {
    std::vector<std::string> out;
    for (const auto& e : edits) {
      if (std::find(out.begin(), out.end(), e.file) == out.end()) {
        out.push_back(e.file);
      }
    }
    return out;
  }
};

namespace detail {

struct SplitText {
  std::vector<std::string> lines;
  bool trailing_newline = false;
};

inline SplitText split_lines(std::string_view text) {
  SplitText out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      out.lines.emplace_back(text.substr(start));
      break;
    }
    out.lines.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
    if (start == text.size()) {
      out.trailing_newline = true;
      break;
    }
  }
  return out;
}

inline std::vector<std::string> text_lines(std::string_view text) {
  return split_lines(text).lines;
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::size_t old_line_count(const LineEdit& e) {
  return e.kind == EditKind::kInsert ? 0 : text_lines(e.old_text).size();
}

inline void validate_edit(const LineEdit& e, std::size_t index) {
  const bool has_old = !e.old_text.empty();
  const bool has_new = !e.new_text.empty();
  const bool ok = (e.kind == EditKind::kDelete && has_old && !has_new) ||
                  (e.kind == EditKind::kInsert && !has_old && has_new) ||
                  (e.kind == EditKind::kReplace && has_old && has_new);
  if (!ok) {
    throw InputError("edit " + std::to_string(index) + " (" +
                     std::string(to_string(e.kind)) +
                     ") has inconsistent old/new text");
  }
  if (e.anchor_line < 1) {
    throw InputError("edit " + std::to_string(index) + " has anchor line < 1");
  }
}

}  // namespace detail

/// Rejects malformed edits and delete/replace spans that overlap, or inserts
/// that land strictly inside a replaced span, within one file.
inline void validate_patch(const CandidatePatch& patch) {
  if (patch.edits.empty()) {
    throw InputError("patch '" + patch.patch_id + "' has no edits");
  }
  if (patch.original_rank && *patch.original_rank < 1) {
    throw InputError("patch '" + patch.patch_id + "' has original_rank < 1");
  }
  for (std::size_t i = 0; i < patch.edits.size(); ++i) {
    detail::validate_edit(patch.edits[i], i);
  }
  for (std::size_t i = 0; i < patch.edits.size(); ++i) {
    const auto& a = patch.edits[i];
    const int a_end = a.anchor_line + static_cast<int>(detail::old_line_count(a));
    for (std::size_t j = 0; j < patch.edits.size(); ++j) {
      if (i == j) continue;
      const auto& b = patch.edits[j];
      if (a.file != b.file || a.kind == EditKind::kInsert) continue;
      if (b.kind == EditKind::kInsert) {
        if (b.anchor_line > a.anchor_line && b.anchor_line < a_end) {
          throw InputError("patch '" + patch.patch_id + "': insert edit " +
                           std::to_string(j) + " lies inside edit " +
                           std::to_string(i));
        }
        continue;
      }
      const int b_end = b.anchor_line + static_cast<int>(detail::old_line_count(b));
      if (i < j && a.anchor_line < b_end && b.anchor_line < a_end) {
        throw InputError("patch '" + patch.patch_id + "': edits " +
                         std::to_string(i) + " and " + std::to_string(j) +
                         " overlap");
      }
    }
  }
}

/// Where an edit's new content sits in the patched text. `line_count` is 0
/// for a deletion, whose empty region starts at `first_line`.
struct PatchedRegion {
  int first_line = 1;
  int line_count = 0;
};

struct AppliedPatch {
  std::string text;
  // Indexed like the input edits; nullopt for edits of other files.
  std::vector<std::optional<PatchedRegion>> regions;
};

/// Applies the edits that target `file` (all edits when `file` is nullopt).
/// Anchors refer to the original text. Throws ConflictError naming the edit
/// whose old_text does not match.
inline AppliedPatch apply_edits(std::string_view source,
                                std::span<const LineEdit> edits,
                                const std::optional<std::string>& file = {}) {
  const auto original = detail::split_lines(source);
  const auto& lines = original.lines;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < edits.size(); ++i) {
    if (!file || edits[i].file == *file) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = edits[a];
    const auto& eb = edits[b];
    if (ea.anchor_line != eb.anchor_line) return ea.anchor_line < eb.anchor_line;
    // At one anchor, inserted text goes before the replaced/deleted line.
    return ea.kind == EditKind::kInsert && eb.kind != EditKind::kInsert;
  });

  AppliedPatch result;
  result.regions.resize(edits.size());
  std::vector<std::string> out;
  std::size_t cursor = 0;  // next original line (0-based) to copy
  for (const auto i : order) {
    const auto& e = edits[i];
    const auto anchor = static_cast<std::size_t>(e.anchor_line - 1);
    const auto old_lines = detail::text_lines(e.old_text);
    const std::size_t limit =
        e.kind == EditKind::kInsert ? lines.size() + 1 : lines.size();
    if (anchor + old_lines.size() > limit || anchor >= limit) {
      throw ConflictError(i, "anchor line " + std::to_string(e.anchor_line) +
                                 " is outside the source (" +
                                 std::to_string(lines.size()) + " lines)");
    }
    if (anchor < cursor) {
      throw ConflictError(i, "overlaps a previous edit");
    }
    for (std::size_t k = 0; k < old_lines.size(); ++k) {
      if (detail::strip_cr(lines[anchor + k]) != detail::strip_cr(old_lines[k])) {
        throw ConflictError(i, "line " + std::to_string(anchor + k + 1) +
                                   " does not match the expected text");
      }
    }
    out.insert(out.end(), lines.begin() + static_cast<std::ptrdiff_t>(cursor),
               lines.begin() + static_cast<std::ptrdiff_t>(anchor));
    const auto new_lines = detail::text_lines(e.new_text);
    result.regions[i] = PatchedRegion{static_cast<int>(out.size()) + 1,
                                      static_cast<int>(new_lines.size())};
    out.insert(out.end(), new_lines.begin(), new_lines.end());
    cursor = anchor + old_lines.size();
  }
  out.insert(out.end(), lines.begin() + static_cast<std::ptrdiff_t>(cursor),
             lines.end());

  const bool trailing = original.trailing_newline || (lines.empty() && !out.empty());
  for (std::size_t k = 0; k < out.size(); ++k) {
    result.text += out[k];
    if (k + 1 < out.size() || trailing) result.text += '\n';
  }
  return result;
}

inline std::string apply_patch(std::string_view source,
                               const CandidatePatch& patch,
                               const std::optional<std::string>& file = {}) {
  validate_patch(patch);
  return apply_edits(source, patch.edits, file).text;
}

namespace detail {

inline double line_similarity(std::string_view a, std::string_view b) {
  auto bag = [](std::string_view s) {
    std::map<std::string, int> counts;
    for (const auto& t : tokenize(s, LanguageHint::kPlain).tokens) ++counts[t.text];
    return counts;
  };
  const auto ca = bag(a);
  const auto cb = bag(b);
  int total = 0;
  int shared = 0;
  for (const auto& [t, n] : ca) {
    total += n;
    if (const auto it = cb.find(t); it != cb.end()) shared += std::min(n, it->second);
  }
  for (const auto& [t, n] : cb) total += n;
  return total == 0 ? 1.0 : 2.0 * shared / total;
}

struct ChangeBlock {
  int first_old_line = 1;  // anchor of the block in the old file
  std::vector<std::string> removed;
  std::vector<std::string> added;
};

inline std::string join_lines(std::span<const std::string> lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

// Pairs removed and added lines (order preserving, as many pairs as
// possible, then highest total token similarity). Pairs become replaces,
// unpaired runs become one delete or insert each.
inline void block_to_edits(const ChangeBlock& block, const std::string& file,
                           std::vector<LineEdit>& out) {
  const auto r = block.removed.size();
  const auto a = block.added.size();
  using Score = std::pair<std::size_t, double>;
  std::vector<std::vector<Score>> best(r + 1, std::vector<Score>(a + 1, {0, 0.0}));
  for (std::size_t i = r; i-- > 0;) {
    for (std::size_t j = a; j-- > 0;) {
      const double sim = line_similarity(block.removed[i], block.added[j]);
      Score take{best[i + 1][j + 1].first + 1, best[i + 1][j + 1].second + sim};
      best[i][j] = std::max({take, best[i + 1][j], best[i][j + 1]});
    }
  }

  std::size_t i = 0;
  std::size_t j = 0;
  std::vector<std::string> pending_removed;
  std::vector<std::string> pending_added;
  int pending_removed_anchor = block.first_old_line;
  auto flush = [&](int next_old_line) {
    if (!pending_removed.empty()) {
      out.push_back({EditKind::kDelete, file, pending_removed_anchor,
                     join_lines(pending_removed), ""});
      pending_removed.clear();
    }
    if (!pending_added.empty()) {
      out.push_back({EditKind::kInsert, file, next_old_line, "",
                     join_lines(pending_added)});
      pending_added.clear();
    }
  };
  while (i < r || j < a) {
    const int old_line = block.first_old_line + static_cast<int>(i);
    if (i < r && j < a) {
      const double sim = line_similarity(block.removed[i], block.added[j]);
      const Score take{best[i + 1][j + 1].first + 1,
                       best[i + 1][j + 1].second + sim};
      if (take == best[i][j]) {
        flush(old_line);
        out.push_back({EditKind::kReplace, file, old_line, block.removed[i],
                       block.added[j]});
        ++i, ++j;
        continue;
      }
      if (best[i + 1][j] == best[i][j]) {
        if (pending_removed.empty()) pending_removed_anchor = old_line;
        pending_removed.push_back(block.removed[i++]);
        continue;
      }
      pending_added.push_back(block.added[j++]);
      continue;
    }
    if (i < r) {
      if (pending_removed.empty()) pending_removed_anchor = old_line;
      pending_removed.push_back(block.removed[i++]);
    } else {
      pending_added.push_back(block.added[j++]);
    }
  }
  flush(block.first_old_line + static_cast<int>(r));
}

inline std::string strip_diff_prefix(std::string_view path) {
  path = path.substr(0, path.find('\t'));
  while (!path.empty() && (path.back() == ' ' || path.back() == '\r')) {
    path.remove_suffix(1);
  }
  if (path.substr(0, 2) == "a/" || path.substr(0, 2) == "b/") path.remove_prefix(2);
  return std::string(path);
}

inline int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
    throw InputError(where + ": malformed hunk header");
  }
  return v;
}

// "-l,s" or "-l" (size 1).
inline std::pair<int, int> parse_range(std::string_view s, const std::string& where) {
  s.remove_prefix(1);
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) return {parse_int(s, where), 1};
  return {parse_int(s.substr(0, comma), where),
          parse_int(s.substr(comma + 1), where)};
}

}  // namespace detail

/// Converts a unified diff into line edits.
inline std::vector<LineEdit> parse_unified_diff(std::string_view diff) {
  const auto lines = detail::text_lines(diff);
  std::vector<LineEdit> edits;
  std::string old_file;
  std::string new_file;
  std::size_t k = 0;
  while (k < lines.size()) {
    const std::string_view line = detail::strip_cr(lines[k]);
    const std::string where = "diff line " + std::to_string(k + 1);
    if (line.substr(0, 4) == "--- ") {
      old_file = detail::strip_diff_prefix(line.substr(4));
      ++k;
      continue;
    }
    if (line.substr(0, 4) == "+++ ") {
      new_file = detail::strip_diff_prefix(line.substr(4));
      ++k;
      continue;
    }
    if (line.substr(0, 3) != "@@ ") {
      ++k;  // diff/index/mode headers and commentary
      continue;
    }
    const std::string file = new_file == "/dev/null" || new_file.empty()
                                 ? old_file
                                 : new_file;
    if (file.empty() || file == "/dev/null") {
      throw InputError(where + ": hunk without a file header");
    }
    const auto close = line.find(" @@", 3);
    if (close == std::string_view::npos) throw InputError(where + ": malformed hunk header");
    std::istringstream ranges{std::string(line.substr(3, close - 3))};
    std::string old_range;
    std::string new_range;
    ranges >> old_range >> new_range;
    if (old_range.empty() || old_range[0] != '-' || new_range.empty() ||
        new_range[0] != '+') {
      throw InputError(where + ": malformed hunk header");
    }
    const auto [old_start, old_size] = detail::parse_range(old_range, where);
    const auto [new_start, new_size] = detail::parse_range(new_range, where);
    (void)new_start;

    int old_no = old_size == 0 ? old_start + 1 : old_start;
    int old_seen = 0;
    int new_seen = 0;
    detail::ChangeBlock block;
    auto flush = [&] {
      if (!block.removed.empty() || !block.added.empty()) {
        detail::block_to_edits(block, file, edits);
      }
      block = {};
    };
    ++k;
    while (k < lines.size() && (old_seen < old_size || new_seen < new_size)) {
      const std::string_view body = detail::strip_cr(lines[k]);
      const char tag = body.empty() ? ' ' : body[0];
      const std::string text(body.empty() ? body : body.substr(1));
      if (tag == '\\') {
        ++k;
        continue;
      }
      if (tag == ' ') {
        flush();
        ++old_no, ++old_seen, ++new_seen;
      } else if (tag == '-') {
        if (block.removed.empty() && block.added.empty()) block.first_old_line = old_no;
        block.removed.push_back(text);
        ++old_no, ++old_seen;
      } else if (tag == '+') {
        if (block.removed.empty() && block.added.empty()) block.first_old_line = old_no;
        block.added.push_back(text);
        ++new_seen;
      } else {
        throw InputError("diff line " + std::to_string(k + 1) +
                         ": unexpected line inside hunk");
      }
      ++k;
    }
    if (old_seen != old_size || new_seen != new_size) {
      throw InputError(where + ": hunk is truncated (line counts do not match header)");
    }
    while (k < lines.size() && detail::strip_cr(lines[k]).substr(0, 1) == "\\") ++k;
    flush();
  }
  if (edits.empty()) throw InputError("diff contains no changes");
  return edits;
}

/// Reads `manifest.json` from a bundle directory: a list (or {"patches": [..]})
/// of {patch_id, bug_id, origin, label?, original_rank?, diff_file,
/// source_digest?}. Diff paths are relative to the bundle.
inline std::vector<CandidatePatch> parse_patch_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file((root / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed bundle manifest: ") + e.what());
  }
  const auto& items = manifest.is_object() ? manifest.at("patches") : manifest;
  if (!items.is_array()) throw InputError("bundle manifest must list patches");

  std::vector<CandidatePatch> patches;
  std::set<std::string> ids;
  std::set<std::pair<std::string, int>> ranks;
  for (const auto& item : items) {
    CandidatePatch p;
    try {
      p.patch_id = item.at("patch_id").get<std::string>();
      p.bug_id = item.at("bug_id").get<std::string>();
      p.origin = item.value("origin", "");
      if (item.contains("label") && !item.at("label").is_null()) {
        p.label = parse_patch_label(item.at("label").get<std::string>());
      }
      if (item.contains("original_rank") && !item.at("original_rank").is_null()) {
        p.original_rank = item.at("original_rank").get<int>();
      }
      if (item.contains("source_digest") && !item.at("source_digest").is_null()) {
        p.source_digest = item.at("source_digest").get<std::string>();
      }
      const auto diff_file = item.at("diff_file").get<std::string>();
      try {
        p.edits = parse_unified_diff(read_file((root / diff_file).string()));
      } catch (const InputError& e) {
        throw InputError("patch '" + p.patch_id + "': " + e.what());
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed bundle manifest entry: ") + e.what());
    }
    if (!ids.insert(p.patch_id).second) {
      throw InputError("duplicate patch_id '" + p.patch_id + "' in bundle");
    }
    if (p.original_rank && !ranks.emplace(p.bug_id, *p.original_rank).second) {
      throw InputError("duplicate original_rank " + std::to_string(*p.original_rank) +
                       " for bug '" + p.bug_id + "'");
    }
    validate_patch(p);
    patches.push_back(std::move(p));
  }
  return patches;
}

}  // namespace codenat

#endif  // CODENAT_PATCH_HPP
