// codenat: command-line front end for the naturalness toolkit.
//
// Every stage reads and writes plain files so stages compose in a shell
// pipeline. JSON outputs carry a "manifest" field; TSV outputs start with a
// "# manifest=" comment line.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "codenat/digest.hpp"
#include "codenat/entropy.hpp"
#include "codenat/entropy_delta.hpp"
#include "codenat/error.hpp"
#include "codenat/harness.hpp"
#include "codenat/lexer.hpp"
#include "codenat/manifest.hpp"
#include "codenat/ngram_model.hpp"
#include "codenat/patch.hpp"
#include "codenat/patch_decision.hpp"
#include "codenat/remote_backend.hpp"
#include "codenat/rerank.hpp"
#include "codenat/sbfl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace codenat;

namespace {

json read_json(const std::string& path, RunManifest& manifest) {
  const auto text = read_file(path);
  manifest.add_input(path, text);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Creates missing parent directories so outputs can go into fresh folders.
void write_output(const std::string& path, const std::string& content) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_file(path, content);
}

void write_json(const std::string& path, json j, const RunManifest& manifest) {
  j["manifest"] = to_json(manifest);
  write_output(path, j.dump(2) + "\n");
}

void write_tsv(const std::string& path, const std::string& body,
               const RunManifest& manifest) {
  write_output(path, manifest_comment(manifest) + body);
}

LanguageHint language_for(const std::string& lang, const std::string& path) {
  return lang == "auto" ? hint_for_path(path) : parse_language_hint(lang);
}

std::string language_name(LanguageHint hint) {
  switch (hint) {
    case LanguageHint::kJava: return "java";
    case LanguageHint::kCLike: return "c-like";
    case LanguageHint::kPlain: return "plain";
  }
  return "plain";
}

/// Regular files below `dir`, sorted, as paths relative to it.
std::vector<std::string> list_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      out.push_back(fs::relative(entry.path(), dir).generic_string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct BackendOptions {
  std::string spec = "remote";
  std::size_t window_budget = 2048;
  double temperature = 0.5;
};

void add_backend_options(CLI::App* sub, BackendOptions& o) {
  sub->add_option("--backend", o.spec,
                  "ngram:MODEL_PATH, remote:URL, or remote (URL from CODENAT_BACKEND_URL)")
      ->capture_default_str();
  sub->add_option("--window-budget", o.window_budget, "context tokens around the target")
      ->capture_default_str();
  sub->add_option("--temperature", o.temperature, "remote sampling temperature")
      ->capture_default_str();
}

std::unique_ptr<EntropyBackend> make_backend(const BackendOptions& o,
                                             RunManifest& manifest) {
  const BackendConfig config{o.window_budget, o.temperature};
  if (o.spec.rfind("ngram:", 0) == 0) {
    const std::string path = o.spec.substr(6);
    const auto j = read_json(path, manifest);
    auto model = std::make_shared<const NGramModel>(NGramModel::from_json(j));
    const auto id = fs::path(path).stem().string() + "@" +
                    manifest.input_digests.at(path).substr(0, 12);
    return std::make_unique<NGramBackend>(std::move(model), id, config);
  }
  std::string url;
  if (o.spec == "remote") {
    const char* env = std::getenv("CODENAT_BACKEND_URL");
    if (env == nullptr || *env == '\0') {
      throw InputError("remote backend needs a URL (remote:URL or CODENAT_BACKEND_URL)");
    }
    url = env;
  } else if (o.spec.rfind("remote:", 0) == 0) {
    url = o.spec.substr(7);
  } else {
    throw InputError("unknown backend '" + o.spec + "'");
  }
  return std::make_unique<RemoteBackend>(url, config);
}

/// One entropy report or a {"reports": [...]} bundle.
std::vector<EntropyReport> load_reports(const std::string& path, RunManifest& manifest) {
  const auto j = read_json(path, manifest);
  std::vector<EntropyReport> out;
  if (j.contains("reports")) {
    for (const auto& r : j.at("reports")) out.push_back(entropy_report_from_json(r));
  } else {
    out.push_back(entropy_report_from_json(j));
  }
  return out;
}

SuspiciousnessList load_list(const std::string& path, RunManifest& manifest) {
  const auto text = read_file(path);
  manifest.add_input(path, text);
  return parse_suspiciousness(text);
}

/// NAME=PATH where PATH is one list (bug id = file stem) or a directory of
/// BUG.tsv lists.
std::pair<std::string, std::vector<RankedBug>> load_technique(const std::string& arg,
                                                              RunManifest& manifest) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InputError("expected NAME=PATH, got '" + arg + "'");
  }
  const std::string name = arg.substr(0, eq);
  const std::string path = arg.substr(eq + 1);
  std::vector<RankedBug> bugs;
  if (fs::is_directory(path)) {
    for (const auto& f : list_files(path)) {
      if (fs::path(f).extension() != ".tsv") continue;
      bugs.emplace_back(fs::path(f).stem().string(),
                        load_list((fs::path(path) / f).string(), manifest));
    }
  } else {
    bugs.emplace_back(fs::path(path).stem().string(), load_list(path, manifest));
  }
  return {name, bugs};
}

std::vector<EntropyDelta> load_deltas(const std::string& path, RunManifest& manifest) {
  const auto j = read_json(path, manifest);
  std::vector<EntropyDelta> out;
  for (const auto& d : j.at("deltas")) out.push_back(entropy_delta_from_json(d));
  return out;
}

std::vector<CandidatePatch> load_bundle(const std::string& dir, RunManifest& manifest) {
  manifest.input_digests[dir] = tree_digest(dir);
  return parse_patch_bundle(dir);
}

/// Runs fn(i) for i in [0, n) on `jobs` threads; rethrows the first failure
/// by index.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------- commands

struct TokenizeArgs {
  std::string file, lang = "auto", out;
};

int cmd_tokenize(const TokenizeArgs& a, RunManifest& m) {
  const auto text = read_file(a.file);
  m.add_input(a.file, text);
  const auto hint = language_for(a.lang, a.file);
  const auto stream = tokenize(text, hint);
  json tokens = json::array();
  for (const auto& t : stream.tokens) {
    tokens.push_back({{"text", t.text},
                      {"kind", to_string(t.kind)},
                      {"line", t.line},
                      {"start", t.span.start},
                      {"end", t.span.end}});
  }
  write_json(a.out,
             {{"file", a.file},
              {"language", language_name(hint)},
              {"source_digest", stream.source_digest},
              {"line_count", stream.line_count},
              {"warnings", stream.warnings},
              {"tokens", tokens}},
             m);
  for (const auto& w : stream.warnings) std::cerr << a.file << ": warning: " << w << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus, lang = "auto", out;
  std::vector<std::string> token_files;
  int order = 3;
  double discount = 0.75;
};

int cmd_train(const TrainArgs& a, RunManifest& m) {
  std::vector<TokenStream> streams;
  if (!a.corpus.empty()) {
    for (const auto& f : list_files(a.corpus)) {
      const auto path = (fs::path(a.corpus) / f).string();
      const auto text = read_file(path);
      m.add_input(path, text);
      streams.push_back(tokenize(text, language_for(a.lang, f)));
    }
  }
  for (const auto& path : a.token_files) {
    const auto j = read_json(path, m);
    TokenStream s;
    try {
      s.source_digest = j.at("source_digest").get<std::string>();
      s.line_count = j.at("line_count").get<int>();
      for (const auto& t : j.at("tokens")) {
        Token tok;
        tok.text = t.at("text").get<std::string>();
        tok.line = t.at("line").get<int>();
        tok.span = {t.at("start").get<std::size_t>(), t.at("end").get<std::size_t>()};
        s.tokens.push_back(std::move(tok));
      }
    } catch (const json::exception& e) {
      throw InputError(path + ": malformed token file: " + e.what());
    }
    streams.push_back(std::move(s));
  }
  const auto model = NGramModel::train(streams, a.order, a.discount);
  write_json(a.out, model.to_json(), m);
  return 0;
}

struct EntropyArgs {
  std::vector<std::string> files;
  std::string root, lang = "auto", out;
  BackendOptions backend;
  unsigned jobs = 1;
};

int cmd_entropy(const EntropyArgs& a, RunManifest& m) {
  const auto backend = make_backend(a.backend, m);
  EntropyCache cache;
  std::vector<EntropyReport> reports;
  for (const auto& file : a.files) {
    const auto path = a.root.empty() ? file : (fs::path(a.root) / file).string();
    auto text = read_file(path);
    m.add_input(path, text);
    const auto doc = make_document(std::move(text), language_for(a.lang, file), file);
    reports.push_back(score_file(doc, *backend, {&cache, a.jobs}));
  }
  bool complete = true;
  for (const auto& r : reports) {
    if (!r.complete) {
      complete = false;
      std::cerr << r.file << ": " << r.failed_lines.size()
                << " line(s) could not be scored (backend unavailable)\n";
    }
  }
  if (reports.size() == 1) {
    write_json(a.out, to_json(reports.front()), m);
  } else {
    json all = json::array();
    for (const auto& r : reports) all.push_back(to_json(r));
    write_json(a.out, {{"reports", all}}, m);
  }
  return complete ? 0 : 2;
}

struct SbflArgs {
  std::string coverage, out, stats;
};

int cmd_sbfl(const SbflArgs& a, RunManifest& m) {
  const auto text = read_file(a.coverage);
  m.add_input(a.coverage, text);
  const auto list = ochiai(parse_coverage(text));
  write_tsv(a.out, to_tsv(list), m);
  if (!a.stats.empty()) {
    const auto ties = tie_stats(list);
    json groups = json::array();
    for (const auto& g : ties.groups) groups.push_back({{"score", g.score}, {"size", g.size}});
    write_json(a.stats,
               {{"tied_line_count", ties.tied_line_count},
                {"max_group_size", ties.max_group_size},
                {"groups", groups},
                {"variance", list.entries.empty() ? json(nullptr)
                                                  : json(score_variance(list))}},
               m);
  }
  return 0;
}

struct RerankArgs {
  std::string prior, out, tie_break = "prior-order";
  std::vector<std::string> entropy;
  std::size_t filter = 6;
  bool entropy_only = false;
};

int cmd_rerank(const RerankArgs& a, RunManifest& m) {
  std::vector<EntropyReport> reports;
  for (const auto& p : a.entropy) {
    for (auto& r : load_reports(p, m)) reports.push_back(std::move(r));
  }
  SuspiciousnessList out;
  if (a.entropy_only) {
    out.technique_id = "entropy";
    for (const auto& r : reports) {
      const auto ranked = entropy_only_rank(r);
      out.entries.insert(out.entries.end(), ranked.entries.begin(), ranked.entries.end());
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const Suspicion& x, const Suspicion& y) { return x.score > y.score; });
  } else {
    if (a.prior.empty()) throw InputError("--prior is required unless --entropy-only");
    const auto prior = load_list(a.prior, m);
    out = rerank(prior, EntropyIndex(std::move(reports)),
                 {a.filter, parse_tie_break(a.tie_break)});
  }
  write_tsv(a.out, to_tsv(out), m);
  return 0;
}

struct ScoreArgs {
  std::vector<std::string> techniques;
  std::string truth, out;
};

int cmd_fl_score(const ScoreArgs& a, RunManifest& m) {
  const auto truth = ground_truth_from_json(read_json(a.truth, m));
  std::vector<TopNRow> rows;
  for (const auto& arg : a.techniques) {
    const auto [name, bugs] = load_technique(arg, m);
    rows.push_back({name, top_n_score(bugs, truth, 1), top_n_score(bugs, truth, 3),
                    top_n_score(bugs, truth, 5)});
  }
  write_tsv(a.out, top_n_tsv(rows), m);
  return 0;
}

struct DeltaArgs {
  std::string bundle, source_root, bug, out;
  BackendOptions backend;
  unsigned jobs = 1;
};

int cmd_delta(const DeltaArgs& a, RunManifest& m) {
  const auto backend = make_backend(a.backend, m);
  auto patches = load_bundle(a.bundle, m);
  if (!a.bug.empty()) {
    std::erase_if(patches, [&](const CandidatePatch& p) { return p.bug_id != a.bug; });
  }
  SourceFiles sources;
  for (const auto& p : patches) {
    for (const auto& f : p.files()) {
      if (sources.contains(f)) continue;
      const auto path = (fs::path(a.source_root) / f).string();
      sources[f] = read_file(path);
      m.add_input(path, sources[f]);
    }
  }
  EntropyCache cache;
  std::vector<EntropyDelta> deltas(patches.size());
  parallel_for(patches.size(), a.jobs, [&](std::size_t i) {
    deltas[i] = entropy_delta(sources, patches[i], *backend, &cache);
  });
  json out = json::array();
  for (const auto& d : deltas) out.push_back(to_json(d));
  write_json(a.out, {{"deltas", out}}, m);
  return 0;
}

struct RankArgs {
  std::string deltas, out;
};

int cmd_rank(const RankArgs& a, RunManifest& m) {
  std::map<std::string, std::vector<EntropyDelta>> by_bug;
  for (auto& d : load_deltas(a.deltas, m)) by_bug[d.bug_id].push_back(std::move(d));
  json sets = json::array();
  for (const auto& [bug, deltas] : by_bug) sets.push_back(to_json(rank_patches(deltas)));
  write_json(a.out, {{"sets", sets}}, m);
  return 0;
}

std::vector<RankedPatchSet> load_ranked_sets(const std::string& path, RunManifest& m) {
  const auto j = read_json(path, m);
  std::vector<RankedPatchSet> out;
  if (j.contains("sets")) {
    for (const auto& s : j.at("sets")) out.push_back(ranked_patch_set_from_json(s));
  } else {
    out.push_back(ranked_patch_set_from_json(j));
  }
  return out;
}

struct ClassifyArgs {
  std::string deltas, bundle, out, tsv, technique = "entropy-delta";
};

int cmd_classify(const ClassifyArgs& a, RunManifest& m) {
  const auto deltas = load_deltas(a.deltas, m);
  std::map<std::string, PatchLabel> labels;
  for (const auto& p : load_bundle(a.bundle, m)) {
    labels[p.patch_id] = p.label.value_or(PatchLabel::kUnknown);
  }
  std::vector<Leaning> predictions;
  std::vector<PatchLabel> truth;
  json rows = json::array();
  std::size_t skipped = 0;
  std::map<std::string, std::vector<EntropyDelta>> by_bug;
  for (const auto& d : deltas) {
    const auto it = labels.find(d.patch_id);
    const auto label = it == labels.end() ? PatchLabel::kUnknown : it->second;
    const auto leaning = classify(d);
    rows.push_back({{"patch_id", d.patch_id},
                    {"bug_id", d.bug_id},
                    {"delta", d.value},
                    {"leaning", to_string(leaning)},
                    {"label", to_string(label)}});
    if (label == PatchLabel::kUnknown) {
      ++skipped;
      continue;
    }
    predictions.push_back(leaning);
    truth.push_back(label);
    by_bug[d.bug_id].push_back(d);
  }
  const auto report = classification_report(predictions, truth);
  json top = nullptr;
  try {
    std::vector<RankedPatchSet> sets;
    for (const auto& [bug, ds] : by_bug) sets.push_back(rank_patches(ds));
    top = {{"top1", patch_top_n(sets, labels, 1)},
           {"top2", patch_top_n(sets, labels, 2)},
           {"top3", patch_top_n(sets, labels, 3)}};
  } catch (const InputError&) {
    // Top-N needs exactly one correct patch per bug; omit it otherwise.
  }
  write_json(a.out,
             {{"technique", a.technique},
              {"report", to_json(report)},
              {"patch_top_n", top},
              {"unlabeled", skipped},
              {"predictions", rows}},
             m);
  if (!a.tsv.empty()) write_tsv(a.tsv, classification_tsv(a.technique, report), m);
  return 0;
}

struct SessionArgs {
  std::string bundle, bug, source_root, test_cmd, ranked, order = "original",
                                                          stop = "first-plausible", log, out;
  std::uint64_t seed = 0;
  std::size_t k = 1;
  long timeout_ms = 600000;
  int compile_error_exit = 125;
  bool no_cache = false;
};

int cmd_eval_session(const SessionArgs& a, RunManifest& m) {
  auto patches = load_bundle(a.bundle, m);
  std::set<std::string> bugs;
  for (const auto& p : patches) bugs.insert(p.bug_id);
  std::string bug = a.bug;
  if (bug.empty()) {
    if (bugs.size() != 1) throw InputError("bundle holds several bugs; pass --bug");
    bug = *bugs.begin();
  }
  std::erase_if(patches, [&](const CandidatePatch& p) { return p.bug_id != bug; });
  if (patches.empty()) throw InputError("no patches for bug '" + bug + "'");

  EvalPolicy policy;
  policy.order = parse_order_kind(a.order);
  policy.stop = parse_stop_kind(a.stop);
  policy.seed = a.seed;
  policy.k = a.k;
  policy.timeout = std::chrono::milliseconds(a.timeout_ms);

  std::optional<RankedPatchSet> ranked;
  if (policy.order == OrderKind::kEntropyDelta) {
    if (a.ranked.empty()) throw InputError("--order entropy-delta needs --ranked");
    for (auto& s : load_ranked_sets(a.ranked, m)) {
      if (s.bug_id == bug) ranked = std::move(s);
    }
    if (!ranked) throw InputError("no ranked set for bug '" + bug + "'");
  }

  HarnessOptions options;
  options.cache = !a.no_cache;
  options.compile_error_exit = a.compile_error_exit;
  std::string log_text;
  if (!a.log.empty()) {
    log_text = json{{"manifest", to_json(m)}}.dump() + "\n";
    options.on_record = [&](const EvalSession& s, const EvalRecord& r) {
      auto line = to_json(r);
      line["bug_id"] = s.bug_id;
      line["position"] = s.records.size();
      log_text += line.dump() + "\n";
      write_output(a.log, log_text);
    };
  }
  const auto session = run_session(a.source_root, patches, a.test_cmd, policy,
                                   ranked ? &*ranked : nullptr, options);
  write_json(a.out, to_json(session), m);
  return 0;
}

struct CompareArgs {
  std::vector<std::string> baseline, candidate;
  std::string out;
};

std::map<std::string, EvalSession> load_sessions(const std::vector<std::string>& paths,
                                                 RunManifest& m) {
  std::map<std::string, EvalSession> out;
  for (const auto& p : paths) {
    auto s = eval_session_from_json(read_json(p, m));
    const auto id = s.bug_id;
    if (!out.emplace(id, std::move(s)).second) {
      throw InputError("two sessions for bug '" + id + "'");
    }
  }
  return out;
}

int cmd_compare(const CompareArgs& a, RunManifest& m) {
  auto base = load_sessions(a.baseline, m);
  auto cand = load_sessions(a.candidate, m);
  std::vector<SessionPair> pairs;
  for (auto& [bug, s] : base) {
    const auto it = cand.find(bug);
    if (it == cand.end()) throw InputError("no candidate session for bug '" + bug + "'");
    pairs.emplace_back(std::move(s), std::move(it->second));
    cand.erase(it);
  }
  if (!cand.empty()) {
    throw InputError("no baseline session for bug '" + cand.begin()->first + "'");
  }
  write_json(a.out, to_json(compare_orderings(pairs)), m);
  return 0;
}

struct ReportArgs {
  std::string kind, compare, deltas, bundle, truth, out;
  std::vector<std::string> techniques;
};

int cmd_report(const ReportArgs& a, RunManifest& m) {
  std::string body;
  if (a.kind == "ranks") {
    if (a.compare.empty()) throw InputError("--kind ranks needs --compare");
    const auto j = read_json(a.compare, m);
    body = "bug\tbaseline\tcandidate\tsaved\n";
    for (const auto& b : j.at("per_bug")) {
      body += b.at("bug_id").get<std::string>() + "\t" +
              std::to_string(b.at("baseline_position").get<std::size_t>()) + "\t" +
              std::to_string(b.at("candidate_position").get<std::size_t>()) + "\t" +
              std::to_string(b.at("saved").get<long>()) + "\n";
    }
  } else if (a.kind == "deltas") {
    if (a.deltas.empty() || a.bundle.empty()) {
      throw InputError("--kind deltas needs --deltas and --bundle");
    }
    std::map<std::string, PatchLabel> labels;
    for (const auto& p : load_bundle(a.bundle, m)) {
      labels[p.patch_id] = p.label.value_or(PatchLabel::kUnknown);
    }
    body = "bug\tpatch\tlabel\tdelta\n";
    for (const auto& d : load_deltas(a.deltas, m)) {
      const auto it = labels.find(d.patch_id);
      body += d.bug_id + "\t" + d.patch_id + "\t" +
              std::string(to_string(it == labels.end() ? PatchLabel::kUnknown : it->second)) +
              "\t" + format_score(d.value) + "\n";
    }
  } else if (a.kind == "fl-ranks") {
    if (a.truth.empty()) throw InputError("--kind fl-ranks needs --truth");
    const auto truth = ground_truth_from_json(read_json(a.truth, m));
    body = "bug\ttechnique\trank\n";
    for (const auto& arg : a.techniques) {
      const auto [name, bugs] = load_technique(arg, m);
      for (const auto& [bug, list] : bugs) {
        const auto it = truth.find(bug);
        if (it == truth.end()) throw InputError("no ground truth for bug '" + bug + "'");
        const auto rank = first_fault_rank(list, it->second);
        body += bug + "\t" + name + "\t" + (rank ? std::to_string(*rank) : "NA") + "\n";
      }
    }
  } else {
    throw InputError("unknown report kind '" + a.kind + "' (ranks, deltas, fl-ranks)");
  }
  write_tsv(a.out, body, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Code-naturalness toolkit: entropy scoring, fault localization, patch ranking"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.set_config("--config", "", "TOML file with option values");
  app.require_subcommand(1);

  TokenizeArgs tok;
  auto* s_tok = app.add_subcommand("tokenize", "lex one source file into tokens");
  s_tok->add_option("--file", tok.file, "source file")->required();
  s_tok->add_option("--lang", tok.lang, "java, c-like, plain or auto")->capture_default_str();
  s_tok->add_option("--out", tok.out, "token JSON")->required();

  TrainArgs train;
  auto* s_train = app.add_subcommand("train-ngram", "train an n-gram model");
  s_train->add_option("--corpus", train.corpus, "directory of source files");
  s_train->add_option("--tokens", train.token_files, "token files from tokenize");
  s_train->add_option("--order", train.order, "n-gram order")->capture_default_str();
  s_train->add_option("--discount", train.discount, "absolute discount in [0,1)")
      ->capture_default_str();
  s_train->add_option("--lang", train.lang, "java, c-like, plain or auto")
      ->capture_default_str();
  s_train->add_option("--out", train.out, "model JSON")->required();

  EntropyArgs ent;
  auto* s_ent = app.add_subcommand("entropy", "per-line entropy report");
  s_ent->add_option("--file", ent.files, "source file(s)")->required();
  s_ent->add_option("--root", ent.root, "directory the --file paths are relative to");
  s_ent->add_option("--lang", ent.lang, "java, c-like, plain or auto")->capture_default_str();
  add_backend_options(s_ent, ent.backend);
  s_ent->add_option("--jobs", ent.jobs, "parallel workers")->capture_default_str();
  s_ent->add_option("--out", ent.out, "report JSON")->required();

  SbflArgs sbfl;
  auto* s_sbfl = app.add_subcommand("sbfl", "Ochiai suspiciousness from coverage");
  s_sbfl->add_option("--coverage", sbfl.coverage, "coverage TSV")->required();
  s_sbfl->add_option("--stats", sbfl.stats, "tie and variance diagnostics JSON");
  s_sbfl->add_option("--out", sbfl.out, "suspiciousness TSV")->required();

  RerankArgs rr;
  auto* s_rr = app.add_subcommand("fl-rerank", "entropy re-ranking of a prior list");
  s_rr->add_option("--prior", rr.prior, "prior suspiciousness TSV");
  s_rr->add_option("--entropy", rr.entropy, "entropy report(s)")->required();
  s_rr->add_option("--filter", rr.filter, "entries re-ranked from the top")
      ->capture_default_str();
  s_rr->add_option("--tie-break", rr.tie_break, "prior-order or entropy-then-prior")
      ->capture_default_str();
  s_rr->add_flag("--entropy-only", rr.entropy_only, "rank every line by entropy alone");
  s_rr->add_option("--out", rr.out, "ranked TSV")->required();

  ScoreArgs score;
  auto* s_score = app.add_subcommand("fl-score", "Top-1/3/5 over ranked lists");
  s_score->add_option("--technique", score.techniques,
                      "NAME=PATH (list file or directory of BUG.tsv)")
      ->required();
  s_score->add_option("--truth", score.truth, "ground-truth JSON")->required();
  s_score->add_option("--out", score.out, "Top-N TSV")->required();

  DeltaArgs delta;
  auto* s_delta = app.add_subcommand("delta", "entropy-delta of candidate patches");
  s_delta->add_option("--bundle", delta.bundle, "patch bundle directory")->required();
  s_delta->add_option("--source-root", delta.source_root, "unpatched source tree")
      ->required();
  s_delta->add_option("--bug", delta.bug, "restrict to one bug");
  add_backend_options(s_delta, delta.backend);
  s_delta->add_option("--jobs", delta.jobs, "parallel workers")->capture_default_str();
  s_delta->add_option("--out", delta.out, "deltas JSON")->required();

  RankArgs rank;
  auto* s_rank = app.add_subcommand("rank-patches", "order patches by entropy-delta");
  s_rank->add_option("--deltas", rank.deltas, "deltas JSON")->required();
  s_rank->add_option("--out", rank.out, "ranked sets JSON")->required();

  ClassifyArgs cls;
  auto* s_cls = app.add_subcommand("classify", "correct/incorrect leaning and metrics");
  s_cls->add_option("--deltas", cls.deltas, "deltas JSON")->required();
  s_cls->add_option("--bundle", cls.bundle, "bundle with labels")->required();
  s_cls->add_option("--technique", cls.technique, "row name in the TSV")
      ->capture_default_str();
  s_cls->add_option("--tsv", cls.tsv, "summary TSV");
  s_cls->add_option("--out", cls.out, "classification JSON")->required();

  SessionArgs ses;
  auto* s_ses = app.add_subcommand("eval-session", "run patches against a test command");
  s_ses->add_option("--bundle", ses.bundle, "patch bundle directory")->required();
  s_ses->add_option("--bug", ses.bug, "bug id when the bundle holds several");
  s_ses->add_option("--source-root", ses.source_root, "source tree to patch")->required();
  s_ses->add_option("--test-cmd", ses.test_cmd, "shell command; {workdir} is substituted")
      ->required();
  s_ses->add_option("--order", ses.order, "original, entropy-delta or random")
      ->capture_default_str();
  s_ses->add_option("--ranked", ses.ranked, "rank-patches output");
  s_ses->add_option("--seed", ses.seed, "random order seed")->capture_default_str();
  s_ses->add_option("--stop", ses.stop, "first-plausible, exhaust or first-k-plausible")
      ->capture_default_str();
  s_ses->add_option("--k", ses.k, "plausible patches for first-k-plausible")
      ->capture_default_str();
  s_ses->add_option("--timeout-ms", ses.timeout_ms, "per-evaluation timeout")
      ->capture_default_str();
  s_ses->add_option("--compile-error-exit", ses.compile_error_exit,
                    "test command exit code meaning the patch does not compile")
      ->capture_default_str();
  s_ses->add_flag("--no-cache", ses.no_cache, "re-run byte-identical patched sources");
  s_ses->add_option("--log", ses.log, "JSON-lines log, one record per evaluation");
  s_ses->add_option("--out", ses.out, "session JSON")->required();

  CompareArgs cmp;
  auto* s_cmp = app.add_subcommand("compare", "evaluations saved between two orderings");
  s_cmp->add_option("--baseline", cmp.baseline, "baseline session files")->required();
  s_cmp->add_option("--candidate", cmp.candidate, "candidate session files")->required();
  s_cmp->add_option("--out", cmp.out, "summary JSON")->required();

  ReportArgs rep;
  auto* s_rep = app.add_subcommand("report", "plot-ready TSV tables");
  s_rep->add_option("--kind", rep.kind, "ranks, deltas or fl-ranks")->required();
  s_rep->add_option("--compare", rep.compare, "compare output (ranks)");
  s_rep->add_option("--deltas", rep.deltas, "deltas JSON (deltas)");
  s_rep->add_option("--bundle", rep.bundle, "bundle with labels (deltas)");
  s_rep->add_option("--technique", rep.techniques, "NAME=PATH lists (fl-ranks)");
  s_rep->add_option("--truth", rep.truth, "ground-truth JSON (fl-ranks)");
  s_rep->add_option("--out", rep.out, "TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  CLI::App* sub = app.get_subcommands().front();
  RunManifest manifest;
  manifest.command = sub->get_name();
  manifest.config_digest = sha256_hex(sub->config_to_str(true, false));
  manifest.timestamp = manifest_timestamp();

  try {
    if (sub == s_tok) return cmd_tokenize(tok, manifest);
    if (sub == s_train) return cmd_train(train, manifest);
    if (sub == s_ent) return cmd_entropy(ent, manifest);
    if (sub == s_sbfl) return cmd_sbfl(sbfl, manifest);
    if (sub == s_rr) return cmd_rerank(rr, manifest);
    if (sub == s_score) return cmd_fl_score(score, manifest);
    if (sub == s_delta) return cmd_delta(delta, manifest);
    if (sub == s_rank) return cmd_rank(rank, manifest);
    if (sub == s_cls) return cmd_classify(cls, manifest);
    if (sub == s_ses) return cmd_eval_session(ses, manifest);
    if (sub == s_cmp) return cmd_compare(cmp, manifest);
    if (sub == s_rep) return cmd_report(rep, manifest);
  } catch (const TransportError& e) {
    std::cerr << "codenat: backend error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "codenat: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "codenat: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "codenat: " << e.what() << "\n";
    return 1;
  }
  return 64;
}
