#ifndef CODENAT_HARNESS_HPP
#define CODENAT_HARNESS_HPP

// Ordered patch evaluation against an external test command.
//
// Patches are applied to the source tree one at a time in policy order; the
// test command runs in the tree (`{workdir}` in the command is replaced by
// its path) and the tree is restored afterwards. Exit 0 within the timeout
// is plausible, the configured compile-error code is a compile error, any
// other exit is failing. Verdicts are cached by the digest of the fully
// patched source, so a patch that yields byte-identical source to an earlier
// one reuses its verdict.
//
// POSIX only (fork/exec).

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "codenat/digest.hpp"
#include "codenat/error.hpp"
#include "codenat/patch.hpp"
#include "codenat/patch_decision.hpp"

namespace codenat {

enum class OrderKind { kOriginal, kEntropyDelta, kRandom };
enum class StopKind { kFirstPlausible, kExhaust, kFirstK };

struct EvalPolicy {
  OrderKind order = OrderKind::kOriginal;
  std::uint64_t seed = 0;  // random order only
  StopKind stop = StopKind::kFirstPlausible;
  std::size_t k = 1;  // first-k-plausible only
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};

  void validate() const {
    if (timeout.count() <= 0) throw InputError("timeout must be > 0");
    if (stop == StopKind::kFirstK && k < 1) throw InputError("k must be >= 1");
  }

  std::string order_name() const {
    switch (order) {
      case OrderKind::kOriginal: return "original";
      case OrderKind::kEntropyDelta: return "entropy-delta";
      case OrderKind::kRandom: return "random";
    }
    return "unknown";
  }

  std::string stop_name() const {
    switch (stop) {
      case StopKind::kFirstPlausible: return "first-plausible";
      case StopKind::kExhaust: return "exhaust";
      case StopKind::kFirstK: return "first-k-plausible";
    }
    return "unknown";
  }
};

inline OrderKind parse_order_kind(std::string_view s) {
  if (s == "original") return OrderKind::kOriginal;
  if (s == "entropy-delta") return OrderKind::kEntropyDelta;
  if (s == "random") return OrderKind::kRandom;
  throw InputError("unknown order '" + std::string(s) + "'");
}

inline StopKind parse_stop_kind(std::string_view s) {
  if (s == "first-plausible") return StopKind::kFirstPlausible;
  if (s == "exhaust") return StopKind::kExhaust;
  if (s == "first-k-plausible" || s == "first-k") return StopKind::kFirstK;
  throw InputError("unknown stop rule '" + std::string(s) + "'");
}

enum class EvalVerdict { kPlausible, kFailing, kCompileError, kTimeout };

inline std::string_view to_string(EvalVerdict v) {
  switch (v) {
    case EvalVerdict::kPlausible: return "plausible";
    case EvalVerdict::kFailing: return "failing";
    case EvalVerdict::kCompileError: return "compile-error";
    case EvalVerdict::kTimeout: return "timeout";
  }
  return "unknown";
}

inline EvalVerdict parse_eval_verdict(std::string_view s) {
  if (s == "plausible") return EvalVerdict::kPlausible;
  if (s == "failing") return EvalVerdict::kFailing;
  if (s == "compile-error") return EvalVerdict::kCompileError;
  if (s == "timeout") return EvalVerdict::kTimeout;
  throw InputError("unknown verdict '" + std::string(s) + "'");
}

struct EvalRecord {
  std::string patch_id;
  EvalVerdict verdict = EvalVerdict::kFailing;
  double duration_ms = 0.0;
  bool cache_hit = false;
  std::string note;
};

struct EvalSession {
  std::string bug_id;
  EvalPolicy policy;
  std::vector<EvalRecord> records;
  std::size_t evaluations_run = 0;
  std::size_t cache_hits = 0;
};

struct HarnessOptions {
  bool cache = true;
  int compile_error_exit = 125;
  // Called after every record, e.g. to append a JSON-lines log.
  std::function<void(const EvalSession&, const EvalRecord&)> on_record;
};

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  double duration_ms = 0.0;
};

/// Runs `command` with /bin/sh in `workdir`, killing its process group on
/// timeout. Output is discarded.
inline ProcessResult run_command(const std::string& command,
                                 const std::string& workdir,
                                 std::chrono::milliseconds timeout) {
  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) throw SetupError("fork failed");
  if (pid == 0) {
    setpgid(0, 0);
    if (chdir(workdir.c_str()) != 0) _exit(127);
    const int devnull = open("/dev/null", O_RDWR);
    if (devnull >= 0) {
      dup2(devnull, STDIN_FILENO);
      dup2(devnull, STDOUT_FILENO);
      dup2(devnull, STDERR_FILENO);
    }
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);

  ProcessResult result;
  int status = 0;
  auto wait_interval = std::chrono::microseconds(200);
  while (true) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) throw SetupError("waitpid failed");
    if (std::chrono::steady_clock::now() - start >= timeout) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(wait_interval);
    wait_interval = std::min(wait_interval * 2, std::chrono::microseconds(20000));
  }
  result.duration_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  if (!result.timed_out) {
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  }
  return result;
}

/// Digest over every regular file below `dir` (relative path and content).
inline std::string tree_digest(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files.push_back(fs::relative(entry.path(), dir).generic_string());
    }
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    h.update_field(f);
    h.update_field(read_file((fs::path(dir) / f).string()));
  }
  return h.finish();
}

namespace detail {

inline std::filesystem::path checked_path(const std::string& root,
                                          const std::string& file) {
  const std::filesystem::path rel = std::filesystem::path(file).lexically_normal();
  if (rel.is_absolute() || rel.empty() || *rel.begin() == "..") {
    throw InputError("patch path escapes the source tree: " + file);
  }
  return std::filesystem::path(root) / rel;
}

inline std::string substitute_workdir(std::string command, const std::string& dir) {
  static constexpr std::string_view kToken = "{workdir}";
  for (auto pos = command.find(kToken); pos != std::string::npos;
       pos = command.find(kToken, pos + dir.size())) {
    command.replace(pos, kToken.size(), dir);
  }
  return command;
}

}  // namespace detail

/// Evaluation order for one bug's patches under `policy`.
inline std::vector<const CandidatePatch*> order_patches(
    std::span<const CandidatePatch> patches, const EvalPolicy& policy,
    const RankedPatchSet* ranked = nullptr) {
  std::vector<const CandidatePatch*> order;
  for (const auto& p : patches) order.push_back(&p);
  // Baseline: original generator rank, unranked patches last in list order.
  std::stable_sort(order.begin(), order.end(),
                   [](const CandidatePatch* a, const CandidatePatch* b) {
                     if (a->original_rank.has_value() != b->original_rank.has_value()) {
                       return a->original_rank.has_value();
                     }
                     return a->original_rank.value_or(0) < b->original_rank.value_or(0);
                   });
  if (policy.order == OrderKind::kEntropyDelta) {
    if (ranked == nullptr) {
      throw InputError("entropy-delta order requires a ranked patch set");
    }
    std::map<std::string, const CandidatePatch*> by_id;
    for (const auto* p : order) by_id[p->patch_id] = p;
    std::vector<const CandidatePatch*> out;
    for (const auto& e : ranked->entries) {
      const auto it = by_id.find(e.patch_id);
      if (it == by_id.end()) {
        throw InputError("ranked patch '" + e.patch_id + "' is not in the bundle");
      }
      out.push_back(it->second);
      by_id.erase(it);
    }
    if (!by_id.empty()) {
      throw InputError("patch '" + by_id.begin()->first + "' has no entropy-delta rank");
    }
    return out;
  }
  if (policy.order == OrderKind::kRandom) {
    // Fisher-Yates over mt19937_64 so the order is identical on every
    // standard library.
    std::mt19937_64 rng(policy.seed);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
  }
  return order;
}

/// Evaluates one bug's patches. The tree under `source_root` is modified in
/// place during each evaluation and restored after it.
inline EvalSession run_session(const std::string& source_root,
                               std::span<const CandidatePatch> patches,
                               const std::string& test_command,
                               const EvalPolicy& policy,
                               const RankedPatchSet* ranked = nullptr,
                               const HarnessOptions& options = {}) {
  policy.validate();
  if (!std::filesystem::is_directory(source_root)) {
    throw SetupError("source tree not found: " + source_root);
  }
  EvalSession session;
  session.policy = policy;
  for (const auto& p : patches) {
    if (session.bug_id.empty()) session.bug_id = p.bug_id;
    if (p.bug_id != session.bug_id) {
      throw InputError("session mixes bugs '" + session.bug_id + "' and '" +
                       p.bug_id + "'");
    }
  }
  const auto order = order_patches(patches, policy, ranked);
  const std::string workdir =
      std::filesystem::absolute(source_root).lexically_normal().string();
  const std::string command = detail::substitute_workdir(test_command, workdir);

  std::map<std::string, std::string> originals;
  std::map<std::string, EvalVerdict> verdict_cache;
  std::size_t plausible = 0;
  const std::size_t wanted = policy.stop == StopKind::kFirstPlausible ? 1
                             : policy.stop == StopKind::kFirstK       ? policy.k
                                                                      : 0;

  for (const auto* patch : order) {
    EvalRecord record;
    record.patch_id = patch->patch_id;

    std::map<std::string, std::string> patched;  // only files that change
    bool conflict = false;
    for (const auto& file : patch->files()) {
      const auto path = detail::checked_path(workdir, file).string();
      if (!originals.contains(file)) {
        if (!std::filesystem::is_regular_file(path)) {
          record.note = "patch conflict: missing file " + file;
          conflict = true;
          break;
        }
        originals[file] = read_file(path);
      }
      try {
        auto text = apply_patch(originals[file], *patch, file);
        if (text != originals[file]) patched[file] = std::move(text);
      } catch (const ConflictError& e) {
        record.note = std::string("patch conflict: ") + e.what();
        conflict = true;
        break;
      }
    }

    if (conflict) {
      record.verdict = EvalVerdict::kCompileError;
      ++session.evaluations_run;
    } else {
      Sha256 h;
      for (const auto& [file, text] : patched) {
        h.update_field(file);
        h.update_field(text);
      }
      const auto key = h.finish();
      const auto hit = options.cache ? verdict_cache.find(key) : verdict_cache.end();
      if (hit != verdict_cache.end()) {
        record.verdict = hit->second;
        record.cache_hit = true;
        ++session.cache_hits;
      } else {
        for (const auto& [file, text] : patched) {
          write_file(detail::checked_path(workdir, file).string(), text);
        }
        ProcessResult run;
        try {
          run = run_command(command, workdir, policy.timeout);
        } catch (...) {
          for (const auto& [file, text] : patched) {
            write_file(detail::checked_path(workdir, file).string(), originals[file]);
          }
          throw;
        }
        for (const auto& [file, text] : patched) {
          write_file(detail::checked_path(workdir, file).string(), originals[file]);
        }
        if (!run.timed_out && run.exit_code == 127) {
          throw SetupError("test command not found or not executable: " + test_command);
        }
        record.duration_ms = run.duration_ms;
        record.verdict = run.timed_out                  ? EvalVerdict::kTimeout
                         : run.exit_code == 0           ? EvalVerdict::kPlausible
                         : run.exit_code == options.compile_error_exit
                             ? EvalVerdict::kCompileError
                             : EvalVerdict::kFailing;
        verdict_cache[key] = record.verdict;
        ++session.evaluations_run;
      }
    }

    session.records.push_back(record);
    if (options.on_record) options.on_record(session, session.records.back());
    if (record.verdict == EvalVerdict::kPlausible) ++plausible;
    if (wanted > 0 && plausible >= wanted) break;
  }
  return session;
}

/// 1-based position of the first plausible record.
inline std::optional<std::size_t> first_plausible_position(const EvalSession& s) {
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    if (s.records[i].verdict == EvalVerdict::kPlausible) return i + 1;
  }
  return std::nullopt;
}

struct BugComparison {
  std::string bug_id;
  std::size_t baseline_position = 0;
  std::size_t candidate_position = 0;
  long saved = 0;
};

struct OrderingSummary {
  double mean_rank_decrease = 0.0;
  double median_rank_decrease = 0.0;
  std::size_t improved = 0;
  std::size_t worsened = 0;
  std::size_t unchanged = 0;
  std::vector<BugComparison> per_bug;
  // Bugs where either session found no plausible patch.
  std::vector<std::string> unresolved;
};

using SessionPair = std::pair<EvalSession, EvalSession>;

/// saved = (evaluations to first plausible under the baseline) - (under the
/// candidate), aggregated over bugs.
inline OrderingSummary compare_orderings(std::span<const SessionPair> pairs) {
  OrderingSummary out;
  std::vector<long> saved;
  std::set<std::string> seen;
  for (const auto& [baseline, candidate] : pairs) {
    if (baseline.bug_id != candidate.bug_id) {
      throw InputError("unpaired sessions: '" + baseline.bug_id + "' vs '" +
                       candidate.bug_id + "'");
    }
    if (!seen.insert(baseline.bug_id).second) {
      throw InputError("bug '" + baseline.bug_id + "' appears in two pairs");
    }
    const auto a = first_plausible_position(baseline);
    const auto b = first_plausible_position(candidate);
    if (!a || !b) {
      out.unresolved.push_back(baseline.bug_id);
      continue;
    }
    const long s = static_cast<long>(*a) - static_cast<long>(*b);
    out.per_bug.push_back({baseline.bug_id, *a, *b, s});
    saved.push_back(s);
    if (s > 0) ++out.improved;
    if (s < 0) ++out.worsened;
    if (s == 0) ++out.unchanged;
  }
  if (!saved.empty()) {
    double sum = 0.0;
    for (const long s : saved) sum += static_cast<double>(s);
    out.mean_rank_decrease = sum / static_cast<double>(saved.size());
    std::sort(saved.begin(), saved.end());
    const auto n = saved.size();
    out.median_rank_decrease =
        n % 2 == 1 ? static_cast<double>(saved[n / 2])
                   : (static_cast<double>(saved[n / 2 - 1]) +
                      static_cast<double>(saved[n / 2])) / 2.0;
  }
  return out;
}

inline nlohmann::json to_json(const EvalRecord& r) {
  return {{"patch_id", r.patch_id},
          {"verdict", to_string(r.verdict)},
          {"duration_ms", r.duration_ms},
          {"cache_hit", r.cache_hit},
          {"note", r.note}};
}

inline nlohmann::json to_json(const EvalSession& s) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : s.records) records.push_back(to_json(r));
  nlohmann::json policy = {{"order", s.policy.order_name()},
                           {"stop", s.policy.stop_name()},
                           {"timeout_ms", s.policy.timeout.count()}};
  if (s.policy.order == OrderKind::kRandom) policy["seed"] = s.policy.seed;
  if (s.policy.stop == StopKind::kFirstK) policy["k"] = s.policy.k;
  nlohmann::json j = {{"bug_id", s.bug_id},
                      {"policy", policy},
                      {"records", records},
                      {"evaluations_run", s.evaluations_run},
                      {"cache_hits", s.cache_hits}};
  if (const auto pos = first_plausible_position(s)) {
    j["first_plausible"] = *pos;
  } else {
    j["first_plausible"] = nullptr;
  }
  return j;
}

inline EvalSession eval_session_from_json(const nlohmann::json& j) {
  try {
    EvalSession s;
    s.bug_id = j.at("bug_id").get<std::string>();
    const auto& p = j.at("policy");
    s.policy.order = parse_order_kind(p.at("order").get<std::string>());
    s.policy.stop = parse_stop_kind(p.at("stop").get<std::string>());
    s.policy.timeout = std::chrono::milliseconds(p.at("timeout_ms").get<long>());
    s.policy.seed = p.value("seed", std::uint64_t{0});
    s.policy.k = p.value("k", std::size_t{1});
    for (const auto& r : j.at("records")) {
      s.records.push_back({r.at("patch_id").get<std::string>(),
                           parse_eval_verdict(r.at("verdict").get<std::string>()),
                           r.value("duration_ms", 0.0), r.value("cache_hit", false),
                           r.value("note", "")});
    }
    s.evaluations_run = j.at("evaluations_run").get<std::size_t>();
    s.cache_hits = j.at("cache_hits").get<std::size_t>();
    if (s.evaluations_run + s.cache_hits != s.records.size()) {
      throw InputError("session counts do not match its records");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed session: ") + e.what());
  }
}

inline nlohmann::json to_json(const OrderingSummary& s) {
  nlohmann::json bugs = nlohmann::json::array();
  for (const auto& b : s.per_bug) {
    bugs.push_back({{"bug_id", b.bug_id},
                    {"baseline_position", b.baseline_position},
                    {"candidate_position", b.candidate_position},
                    {"saved", b.saved}});
  }
  return {{"mean_rank_decrease", s.mean_rank_decrease},
          {"median_rank_decrease", s.median_rank_decrease},
          {"improved", s.improved},
          {"worsened", s.worsened},
          {"unchanged", s.unchanged},
          {"per_bug", bugs},
          {"unresolved", s.unresolved}};
}

}  // namespace codenat

#endif  // CODENAT_HARNESS_HPP
