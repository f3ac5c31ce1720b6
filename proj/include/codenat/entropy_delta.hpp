#ifndef CODENAT_ENTROPY_DELTA_HPP
#define CODENAT_ENTROPY_DELTA_HPP

// Entropy-delta of a candidate patch: original-region entropy minus
// patched-region entropy, per edit, averaged over the edits.
//
//   replace: E(old line)   - E(new line)
//   delete:  E(old line)   - E(blank at that position)
//   insert:  E(blank)      - E(new line)
//
// A positive delta means the patched region is more natural than before.
// "Before" queries use the original file; "after" queries use the fully
// patched file, so other edits of the same patch are part of the context.

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "codenat/entropy.hpp"
#include "codenat/error.hpp"
#include "codenat/lexer.hpp"
#include "codenat/patch.hpp"

namespace codenat {

struct EditDelta {
  std::size_t edit_index = 0;
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;
};

struct EntropyDelta {
  std::string patch_id;
  std::string bug_id;
  double value = 0.0;
  std::vector<EditDelta> per_edit;
};

/// Original file contents by the path used in the patch edits.
using SourceFiles = std::map<std::string, std::string>;

inline EntropyDelta entropy_delta(const SourceFiles& sources,
                                  const CandidatePatch& patch,
                                  const EntropyBackend& backend,
                                  EntropyCache* cache = nullptr) {
  validate_patch(patch);
  const auto files = patch.files();
  if (patch.source_digest && files.size() == 1) {
    const auto it = sources.find(files.front());
    if (it != sources.end() && sha256_hex(it->second) != *patch.source_digest) {
      throw InputError("patch '" + patch.patch_id +
                       "' was made against a different source (digest mismatch)");
    }
  }

  EntropyDelta result{patch.patch_id, patch.bug_id, 0.0, {}};
  result.per_edit.resize(patch.edits.size());
  for (const auto& file : files) {
    const auto it = sources.find(file);
    if (it == sources.end()) {
      throw InputError("patch '" + patch.patch_id + "' targets unknown file " + file);
    }
    const auto hint = hint_for_path(file);
    const auto original = make_document(it->second, hint, file);
    const auto applied = apply_edits(it->second, patch.edits, file);
    const auto patched = make_document(applied.text, hint, file);

    for (std::size_t i = 0; i < patch.edits.size(); ++i) {
      const auto& region = applied.regions[i];
      if (!region) continue;
      const auto& e = patch.edits[i];
      const int old_lines = static_cast<int>(detail::old_line_count(e));
      const double before =
          old_lines == 0
              ? blank_line_entropy(original, e.anchor_line, backend, cache)
              : score_region(original, e.anchor_line,
                             e.anchor_line + old_lines - 1, backend, cache);
      const double after =
          region->line_count == 0
              ? blank_line_entropy(patched, region->first_line, backend, cache)
              : score_region(patched, region->first_line,
                             region->first_line + region->line_count - 1,
                             backend, cache);
      result.per_edit[i] = {i, before, after, before - after};
    }
  }
  double sum = 0.0;
  for (const auto& d : result.per_edit) sum += d.delta;
  result.value = sum / static_cast<double>(result.per_edit.size());
  return result;
}

/// Single-file convenience: every edit must target the same file.
inline EntropyDelta entropy_delta(std::string_view source,
                                  const CandidatePatch& patch,
                                  const EntropyBackend& backend,
                                  EntropyCache* cache = nullptr) {
  const auto files = patch.files();
  if (files.size() != 1) {
    throw InputError("patch '" + patch.patch_id + "' spans several files");
  }
  return entropy_delta(SourceFiles{{files.front(), std::string(source)}}, patch,
                       backend, cache);
}

inline nlohmann::json to_json(const EntropyDelta& d) {
  nlohmann::json edits = nlohmann::json::array();
  for (const auto& e : d.per_edit) {
    edits.push_back({{"edit_index", e.edit_index},
                     {"before", e.before},
                     {"after", e.after},
                     {"delta", e.delta}});
  }
  return {{"patch_id", d.patch_id},
          {"bug_id", d.bug_id},
          {"value", d.value},
          {"per_edit", edits}};
}

inline EntropyDelta entropy_delta_from_json(const nlohmann::json& j) {
  try {
    EntropyDelta d;
    d.patch_id = j.at("patch_id").get<std::string>();
    d.bug_id = j.at("bug_id").get<std::string>();
    d.value = j.at("value").get<double>();
    for (const auto& e : j.value("per_edit", nlohmann::json::array())) {
      d.per_edit.push_back({e.at("edit_index").get<std::size_t>(),
                            e.at("before").get<double>(),
                            e.at("after").get<double>(),
                            e.at("delta").get<double>()});
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed entropy delta: ") + e.what());
  }
}

}  // namespace codenat

#endif  // CODENAT_ENTROPY_DELTA_HPP
