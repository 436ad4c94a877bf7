// prof: command line entry point for data checks, analysis, the preference
// loop and evaluation. Outputs go under <runs_dir>/<run_id>/.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/pattern_formatter.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "prof/backend.hpp"
#include "prof/config.hpp"
#include "prof/data.hpp"
#include "prof/diff.hpp"
#include "prof/dpo.hpp"
#include "prof/error.hpp"
#include "prof/eval.hpp"
#include "prof/judge.hpp"
#include "prof/loop.hpp"
#include "prof/policy.hpp"
#include "prof/preference.hpp"
#include "prof/prompt.hpp"
#include "prof/run_dir.hpp"
#include "prof/scripted.hpp"
#include "prof/simulator.hpp"
#include "prof/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace prof;

namespace {

// ---------------------------------------------------------------- logging

// %v as a JSON string body.
class JsonMessageFlag : public spdlog::custom_flag_formatter {
 public:
  void format(const spdlog::details::log_msg& msg, const std::tm&, spdlog::memory_buf_t& dest) override {
    const std::string escaped = json(std::string(msg.payload.data(), msg.payload.size())).dump();
    dest.append(escaped.data() + 1, escaped.data() + escaped.size() - 1);
  }
  std::unique_ptr<custom_flag_formatter> clone() const override { return std::make_unique<JsonMessageFlag>(); }
};

void setup_logging(const std::string& level) {
  auto logger = std::make_shared<spdlog::logger>("prof", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  auto formatter = std::make_unique<spdlog::pattern_formatter>(spdlog::pattern_time_type::utc);
  formatter->add_flag<JsonMessageFlag>('*').set_pattern(R"({"ts":"%Y-%m-%dT%H:%M:%S.%eZ","level":"%l","msg":"%*"})");
  logger->set_formatter(std::move(formatter));
  logger->set_level(spdlog::level::from_str(level));
  spdlog::set_default_logger(logger);
}

// ---------------------------------------------------------------- options

struct Options {
  std::optional<std::string> config;
  std::optional<std::string> run_id;
  std::optional<std::string> runs_dir;
  bool mock = false;
  bool resume = false;
  std::optional<std::size_t> max_concurrency;
  std::optional<int> iterations;
  std::optional<int> k;
  std::optional<double> beta;
  std::vector<double> temperatures;
  std::vector<std::int64_t> seeds;
  bool lenient = false;
  std::optional<std::string> log_level;

  // subcommand arguments
  std::string input;
  std::string output;
  std::string policy;
  std::string prefs;
  std::string annotations;
  std::optional<std::size_t> train_count;
  std::optional<double> temperature;
  std::optional<int> stop_after;
};

// ---------------------------------------------------------------- context

class Context {
 public:
  explicit Context(const Options& opt) : opt_(opt) {
    if (opt.config) {
      cfg_ = load_config(*opt.config);
    } else if (auto dir = getenv_lookup("PROF_CACHE_DIR"); dir && !dir->empty()) {
      cfg_.cache_dir = fs::path(*dir);
    }
    if (opt.run_id) cfg_.run_id = *opt.run_id;
    if (opt.runs_dir) cfg_.runs_dir = *opt.runs_dir;
    if (opt.max_concurrency) cfg_.max_concurrency = *opt.max_concurrency;
    if (cfg_.max_concurrency == 0) throw ConfigError("--max-concurrency must be >= 1");
    auto& m = cfg_.manifest;
    if (opt.iterations) m.iteration_count = *opt.iterations;
    if (opt.k) m.k_samples = *opt.k;
    if (opt.beta) m.beta = *opt.beta;
    if (!opt.temperatures.empty()) m.temperatures = opt.temperatures;
    if (!opt.seeds.empty()) m.seeds = opt.seeds;
    m.run_id = cfg_.run_id;
    if (opt.log_level) cfg_.log_level = *opt.log_level;
    prompts_ = std::make_shared<const PromptLibrary>(cfg_.prompts_dir);
  }

  const CliConfig& config() const { return cfg_; }
  const Options& options() const { return opt_; }
  RunLayout layout() const { return RunLayout(cfg_.runs_dir, cfg_.run_id); }
  std::shared_ptr<const PromptLibrary> prompts() const { return prompts_; }

  fs::path dataset_path() const {
    if (!opt_.input.empty()) return opt_.input;
    if (cfg_.dataset) return *cfg_.dataset;
    throw ConfigError("no dataset given; pass a path or set paths.dataset");
  }

  std::vector<EssayRecord> dataset() const {
    LoadOptions lo;
    lo.expected_feedback_count = cfg_.feedback_per_essay;
    lo.lenient = opt_.lenient;
    LoadReport report;
    auto records = load_dataset(dataset_path(), lo, &report);
    for (const auto& r : report.rejected) spdlog::warn("skipped: {}", r);
    return records;
  }

  std::pair<std::vector<EssayRecord>, std::vector<EssayRecord>> splits() const {
    const auto records = dataset();
    return split_dataset(records, std::min(cfg_.train_count, records.size()));
  }

  BackendPtr backend(Role role) {
    const std::string name = to_string(role);
    if (opt_.mock) {
      if (!mock_) {
        scripted::Schedule schedule = scripted::default_schedule();
        if (cfg_.mock_schedule) schedule = scripted::schedule_from_json(read_json_file(*cfg_.mock_schedule));
        mock_ = scripted::make_backend(prompts_, schedule, "mock", cfg_.cache_dir);
      }
      return mock_;
    }
    if (auto it = http_.find(name); it != http_.end()) return it->second;
    auto it = cfg_.backends.find(name);
    if (it == cfg_.backends.end()) throw ConfigError("no backend configured for role '" + name + "' (or pass --mock)");
    BackendConfig bc = it->second;
    if (!bc.cache_dir && cfg_.cache_dir) bc.cache_dir = *cfg_.cache_dir / name;
    auto b = std::make_shared<Backend>(bc, bc.kind == BackendKind::http_chat ? make_http_transport() : nullptr);
    if (bc.kind == BackendKind::scripted_mock) scripted::install_routes(*b, prompts_, scripted::default_schedule());
    http_[name] = b;
    return b;
  }

  bool has_backend(Role role) const { return opt_.mock || cfg_.backends.count(to_string(role)) > 0; }

  Judge judge() { return Judge(backend(Role::judge), prompts_); }
  SimulatorHandle simulator() { return make_simulator(backend(Role::simulator), *prompts_, backend_label(Role::simulator)); }

  std::string backend_label(Role role) {
    return backend_identity(backend(role)->config());
  }

  GeneratorHandle initial_generator() {
    if (!opt_.policy.empty()) return GeneratorHandle::from_policy(load_policy(opt_.policy));
    if (cfg_.initial_policy) return GeneratorHandle::from_policy(load_policy(*cfg_.initial_policy));
    if (has_backend(Role::generator)) return GeneratorHandle::from_backend(backend(Role::generator), prompts_);
    throw ConfigError("no generator: set paths.initial_policy or configure a generator backend");
  }

  /// Manifest with the identities of every backend the loop touches.
  RunManifest manifest() {
    RunManifest m = cfg_.manifest;
    for (Role r : {Role::simulator, Role::judge}) m.backend_configs[to_string(r)] = backend_label(r);
    if (cfg_.initial_policy && opt_.policy.empty()) {
      m.backend_configs["generator"] = "toy_policy:" + sha256_hex(read_file(*cfg_.initial_policy)).substr(0, 16);
    } else if (!opt_.policy.empty()) {
      m.backend_configs["generator"] = "toy_policy:" + sha256_hex(read_file(opt_.policy)).substr(0, 16);
    } else {
      m.backend_configs["generator"] = backend_label(Role::generator);
    }
    return m;
  }

 private:
  const Options& opt_;
  CliConfig cfg_;
  std::shared_ptr<const PromptLibrary> prompts_;
  BackendPtr mock_;
  std::map<std::string, BackendPtr> http_;
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

fs::path out_path(const Context& ctx, const fs::path& fallback) {
  return ctx.options().output.empty() ? fallback : fs::path(ctx.options().output);
}

std::string feedback_for(const EssayRecord& e) {
  std::string joined;
  for (const auto& f : e.peer_feedback) joined += f + "\n";
  return joined;
}

// ---------------------------------------------------------------- subcommands

void cmd_validate_data(Context& ctx) {
  LoadOptions lo;
  lo.expected_feedback_count = ctx.config().feedback_per_essay;
  lo.lenient = ctx.options().lenient;
  LoadReport report;
  const auto records = load_dataset(ctx.dataset_path(), lo, &report);
  print_json({{"accepted", records.size()}, {"rejected", report.rejected}});
}

void cmd_split(Context& ctx) {
  const auto records = ctx.dataset();
  const std::size_t n = ctx.options().train_count.value_or(ctx.config().train_count);
  auto [train, test] = split_dataset(records, std::min(n, records.size()));
  const auto dir = ctx.layout().data_dir();
  fs::create_directories(dir);
  write_jsonl(train, dir / "train.jsonl");
  write_jsonl(test, dir / "test.jsonl");
  print_json({{"train", train.size()}, {"test", test.size()}, {"dir", dir.string()}});
}

void cmd_analyze_diff(Context& ctx) {
  const auto records = ctx.dataset();
  std::vector<json> rows;
  diff::ModificationSummary total;
  std::size_t n = 0;
  for (const auto& e : records) {
    if (!e.revised) continue;
    const auto s = diff::classify_modifications(e.initial, *e.revised);
    rows.push_back({{"essay_id", e.essay_id}, {"summary", s}});
    total.words_added += s.words_added;
    total.words_deleted += s.words_deleted;
    total.sentences_added += s.sentences_added;
    total.sentences_deleted += s.sentences_deleted;
    ++n;
  }
  const auto path = out_path(ctx, ctx.layout().analysis_dir() / "diff.jsonl");
  fs::create_directories(path.parent_path());
  write_jsonl_rows(rows, path);
  const double d = n ? static_cast<double>(n) : 1.0;
  print_json({{"essays", n},
              {"mean_words_added", total.words_added / d},
              {"mean_words_deleted", total.words_deleted / d},
              {"mean_sentences_added", total.sentences_added / d},
              {"mean_sentences_deleted", total.sentences_deleted / d},
              {"output", path.string()}});
}

json summary_json(const FaithfulnessSummary& mean) {
  json out = mean;
  try {
    out["gamma"] = gamma(mean.faithful, mean.unfaithful);
  } catch (const DegenerateCounts& e) {
    out["gamma"] = nullptr;
    out["gamma_note"] = e.what();
  }
  return out;
}

void cmd_faithfulness(Context& ctx) {
  if (!ctx.options().annotations.empty()) {
    const auto records = read_annotations(ctx.options().annotations);
    std::vector<FaithfulnessSummary> s;
    for (const auto& r : records) s.push_back(r.summary);
    print_json({{"rows", records.size()}, {"mean", summary_json(mean_summary(s))}});
    return;
  }
  const auto records = ctx.dataset();
  Judge judge = ctx.judge();
  std::vector<json> rows(records.size());
  std::vector<std::optional<FaithfulnessSummary>> results(records.size());
  parallel_for(records.size(), ctx.config().max_concurrency, [&](std::size_t i) {
    const auto& e = records[i];
    rows[i] = {{"essay_id", e.essay_id}};
    if (!e.revised) {
      rows[i]["error"] = "no revision";
      return;
    }
    try {
      results[i] = judge.classify_faithfulness(e.initial, feedback_for(e), *e.revised, static_cast<std::int64_t>(i));
      rows[i]["summary"] = *results[i];
    } catch (const BackendError& ex) {
      rows[i]["error"] = ex.what();
    }
  });
  std::vector<FaithfulnessSummary> ok;
  for (const auto& r : results) {
    if (r) ok.push_back(*r);
  }
  const auto path = out_path(ctx, ctx.layout().analysis_dir() / "faithfulness.jsonl");
  fs::create_directories(path.parent_path());
  write_jsonl_rows(rows, path);
  json out{{"essays", ok.size()}, {"output", path.string()}};
  if (!ok.empty()) out["mean"] = summary_json(mean_summary(ok));
  print_json(out);
}

std::vector<std::optional<FeedbackText>> combine_all(Context& ctx, const std::vector<EssayRecord>& records,
                                                     std::vector<json>* rows) {
  auto backend = ctx.backend(Role::combiner);
  std::vector<std::optional<FeedbackText>> out(records.size());
  if (rows) rows->assign(records.size(), json::object());
  parallel_for(records.size(), ctx.config().max_concurrency, [&](std::size_t i) {
    std::vector<FeedbackText> peers;
    for (const auto& f : records[i].peer_feedback) peers.push_back({f, FeedbackOrigin::human_peer, std::nullopt, std::nullopt});
    json row{{"essay_id", records[i].essay_id}};
    try {
      out[i] = combine_feedback(peers, *backend, *ctx.prompts(), static_cast<std::int64_t>(i));
      row["feedback"] = *out[i];
    } catch (const Error& ex) {
      row["error"] = ex.what();
    }
    if (rows) (*rows)[i] = std::move(row);
  });
  return out;
}

void cmd_combine(Context& ctx) {
  const auto records = ctx.dataset();
  std::vector<json> rows;
  const auto combined = combine_all(ctx, records, &rows);
  const auto path = out_path(ctx, ctx.layout().analysis_dir() / "combined.jsonl");
  fs::create_directories(path.parent_path());
  write_jsonl_rows(rows, path);
  const auto ok = std::count_if(combined.begin(), combined.end(), [](const auto& c) { return c.has_value(); });
  print_json({{"combined", ok}, {"essays", records.size()}, {"output", path.string()}});
}

// Revises every essay under its combined feedback at each temperature and
// classifies faithfulness; one F/U/gamma summary per temperature.
void cmd_simulate(Context& ctx) {
  const auto records = ctx.dataset();
  const auto combined = combine_all(ctx, records, nullptr);
  auto sim = ctx.simulator();
  Judge judge = ctx.judge();
  std::vector<double> temps = ctx.config().manifest.temperatures;
  if (ctx.options().temperature) temps = {*ctx.options().temperature};
  const std::int64_t seed = ctx.config().manifest.seed;
  json table = json::array();
  std::vector<json> rows;
  for (double t : temps) {
    std::vector<json> trows(records.size());
    std::vector<std::optional<FaithfulnessSummary>> res(records.size());
    parallel_for(records.size(), ctx.config().max_concurrency, [&](std::size_t i) {
      json row{{"essay_id", records[i].essay_id}, {"temperature", t}};
      if (!combined[i]) {
        row["error"] = "no combined feedback";
        trows[i] = row;
        return;
      }
      try {
        const auto revised = revise(sim, records[i].initial, *combined[i], t, seed);
        row["revised"] = revised;
        row["modifications"] = diff::classify_modifications(records[i].initial, revised);
        res[i] = judge.classify_faithfulness(records[i].initial, combined[i]->body, revised, seed);
        row["summary"] = *res[i];
      } catch (const Error& ex) {
        row["error"] = ex.what();
      }
      trows[i] = row;
    });
    std::vector<FaithfulnessSummary> ok;
    for (const auto& r : res) {
      if (r) ok.push_back(*r);
    }
    json entry{{"temperature", t}, {"essays", ok.size()}};
    if (!ok.empty()) entry["mean"] = summary_json(mean_summary(ok));
    table.push_back(entry);
    rows.insert(rows.end(), trows.begin(), trows.end());
  }
  const auto dir = ctx.layout().analysis_dir();
  fs::create_directories(dir);
  write_jsonl_rows(rows, dir / "simulate.jsonl");
  write_json_file(dir / "simulate.json", table);
  print_json(table);
}

void cmd_build_prefs(Context& ctx) {
  auto [train, test] = ctx.splits();
  const auto generator = ctx.initial_generator();
  auto sim = ctx.simulator();
  Judge judge = ctx.judge();
  const auto& m = ctx.config().manifest;
  std::vector<std::vector<FeedbackText>> candidates;
  std::vector<EssayRecord> eligible;
  for (const auto& e : train) {
    std::vector<FeedbackText> ok;
    for (auto& s : sample_feedback(generator, e.essay_id, e.initial, m.k_samples, m.generator_temperature, m.seed)) {
      if (s.feedback) ok.push_back(std::move(*s.feedback));
    }
    if (ok.size() >= 2) {
      eligible.push_back(e);
      candidates.push_back(std::move(ok));
    }
  }
  BuildOptions bo;
  bo.sim_temperature = m.sim_temperature;
  bo.max_concurrency = ctx.config().max_concurrency;
  const auto outcomes = build_pairs(eligible, candidates, sim, judge, m.seed, bo);
  std::vector<PreferencePair> pairs;
  std::vector<json> revisions;
  for (const auto& o : outcomes) {
    for (const auto& r : o.revisions) revisions.push_back(to_json_row(r));
    if (o.pair) pairs.push_back(*o.pair);
  }
  const auto path = out_path(ctx, ctx.layout().root() / "prefs" / "prefs.jsonl");
  fs::create_directories(path.parent_path());
  write_jsonl(pairs, path);
  write_jsonl_rows(revisions, path.parent_path() / "revisions.jsonl");
  print_json({{"pairs", pairs.size()}, {"essays", train.size()}, {"output", path.string()}});
}

void cmd_train_dpo(Context& ctx) {
  if (ctx.options().prefs.empty()) throw ConfigError("train-dpo needs --prefs");
  const auto pairs = read_jsonl<PreferencePair>(ctx.options().prefs);
  GeneratorHandle gen = ctx.initial_generator();
  if (gen.kind != GeneratorHandle::Kind::toy_policy) throw ConfigError("train-dpo needs a toy policy (--policy)");
  const auto& m = ctx.config().manifest;
  DPOConfig cfg{m.beta, m.learning_rate, m.epochs, m.loss_form};
  TrainReport report;
  const ToyPolicy next = train_dpo(*gen.policy, pairs, cfg, &report);
  const auto path = out_path(ctx, ctx.layout().root() / "prefs" / "policy.json");
  fs::create_directories(path.parent_path());
  save_policy(next, path);
  print_json({{"loss_before", report.loss_before}, {"loss_after", report.loss_after}, {"output", path.string()}});
}

void cmd_export_prefs(Context& ctx) {
  if (ctx.options().prefs.empty()) throw ConfigError("export-prefs needs --prefs");
  const auto pairs = read_jsonl<PreferencePair>(ctx.options().prefs);
  const auto rows = export_prefs(pairs, &ctx.prompts()->get("generate_feedback"));
  const auto path = out_path(ctx, fs::path(ctx.options().prefs).parent_path() / "export.jsonl");
  write_jsonl_rows(rows, path);
  print_json({{"pairs", rows.size()}, {"output", path.string()}});
}

void cmd_loop(Context& ctx) {
  auto [train, test] = ctx.splits();
  const auto layout = ctx.layout();
  const RunManifest manifest = ctx.manifest();
  if (ctx.options().resume && !read_manifest(layout)) {
    throw ConfigError("--resume given but run '" + layout.run_id() + "' does not exist");
  }
  if (!ctx.options().resume && read_manifest(layout) && layout.last_completed_iteration() < manifest.iteration_count) {
    spdlog::info("run {} exists; continuing from iteration {}", layout.run_id(), layout.last_completed_iteration() + 1);
  }
  LoopOptions lo;
  lo.max_concurrency = ctx.config().max_concurrency;
  lo.stop_after = ctx.options().stop_after;
  const auto result = prof_loop(train, ctx.initial_generator(), ctx.simulator(), ctx.judge(), manifest, layout, lo);
  json its = json::array();
  for (const auto& s : result.iterations) {
    json j{{"iteration", s.iteration}, {"resumed", s.resumed}};
    if (!s.resumed) {
      j["pairs"] = s.pairs;
      j["skipped"] = s.skipped;
      j["samples"] = s.samples;
      if (s.loss_before) j["loss_before"] = *s.loss_before;
      if (s.loss_after) j["loss_after"] = *s.loss_after;
    }
    its.push_back(j);
  }
  print_json({{"run", layout.root().string()},
              {"iterations", its},
              {"awaiting_external_model", result.awaiting_external_model}});
}

// Initial generator plus every trained policy found in the run.
std::vector<std::pair<std::string, GeneratorHandle>> run_generators(Context& ctx) {
  std::vector<std::pair<std::string, GeneratorHandle>> out;
  out.emplace_back("initial", ctx.initial_generator());
  const auto layout = ctx.layout();
  for (int t = 1; fs::exists(layout.policy(t)); ++t) {
    out.emplace_back(fmt::format("iteration {}", t), GeneratorHandle::from_policy(load_policy(layout.policy(t))));
  }
  return out;
}

std::string run_manifest_hash(Context& ctx) {
  if (auto m = read_manifest(ctx.layout())) return manifest_hash(*m);
  return manifest_hash(ctx.manifest());
}

void write_table(const fs::path& dir, const std::string& stem, const Table& table) {
  fs::create_directories(dir);
  write_json_file(dir / (stem + ".json"), table);
  write_file_atomic(dir / (stem + ".csv"), to_csv(table));
  write_file_atomic(dir / (stem + ".md"), to_markdown(table));
}

void cmd_eval_extrinsic(Context& ctx) {
  auto [train, test] = ctx.splits();
  if (test.empty()) throw PreconditionError("test split is empty; lower data.train_count");
  auto sim = ctx.simulator();
  Judge judge = ctx.judge();
  EvalOptions eo;
  eo.max_concurrency = ctx.config().max_concurrency;
  eo.manifest_hash = run_manifest_hash(ctx);
  const auto& m = ctx.config().manifest;
  std::vector<ExtrinsicResult> results;
  std::vector<json> provenance;
  for (const auto& [label, gen] : run_generators(ctx)) {
    auto r = extrinsic_eval(gen, label, sim, judge, test, m.temperatures, m.seeds, eo);
    for (const auto& rec : r.provenance) {
      json row = to_json_row(rec);
      row["model"] = label;
      provenance.push_back(std::move(row));
    }
    results.push_back(std::move(r));
  }
  const Table table = extrinsic_table(results, eo.manifest_hash);
  const auto dir = ctx.layout().eval_dir();
  write_table(dir, "extrinsic", table);
  write_jsonl_rows(provenance, dir / "extrinsic_provenance.jsonl");
  std::cout << to_markdown(table);
}

void cmd_eval_intrinsic(Context& ctx) {
  auto [train, test] = ctx.splits();
  if (test.empty()) throw PreconditionError("test split is empty; lower data.train_count");
  Judge judge = ctx.judge();
  EvalOptions eo;
  eo.max_concurrency = ctx.config().max_concurrency;
  eo.manifest_hash = run_manifest_hash(ctx);
  std::vector<IntrinsicResult> results;
  std::vector<json> provenance;
  for (const auto& [label, gen] : run_generators(ctx)) {
    auto r = intrinsic_eval(gen, label, judge, test, eo);
    for (const auto& rec : r.records) {
      json row = to_json_row(rec);
      row["model"] = label;
      provenance.push_back(std::move(row));
    }
    results.push_back(std::move(r));
  }
  const Table table = intrinsic_table(results, eo.manifest_hash);
  const auto dir = ctx.layout().eval_dir();
  write_table(dir, "intrinsic", table);
  write_jsonl_rows(provenance, dir / "intrinsic_provenance.jsonl");
  std::cout << to_markdown(table);
}

void cmd_segments(Context& ctx) {
  Judge judge = ctx.judge();
  const auto evo = segment_evolution(ctx.layout(), judge, ctx.config().max_concurrency);
  const auto dir = ctx.layout().eval_dir();
  fs::create_directories(dir);
  json j = evo;
  j["manifest_hash"] = run_manifest_hash(ctx);
  write_json_file(dir / "segments.json", j);
  write_file_atomic(dir / "segments.csv", to_csv(evo));
  print_json(j);
}

void cmd_report(Context& ctx) {
  const RunLayout layout = ctx.options().input.empty() ? ctx.layout() : RunLayout(fs::path(ctx.options().input));
  const auto dir = layout.eval_dir();
  std::string md = "# Run " + layout.run_id() + "\n";
  bool any = false;
  for (const auto& [stem, title] : {std::pair{"intrinsic", "Intrinsic (pedagogical) evaluation"},
                                    std::pair{"extrinsic", "Extrinsic (revision quality) evaluation"}}) {
    const auto path = dir / (std::string(stem) + ".json");
    if (!fs::exists(path)) continue;
    const Table t = read_json_file(path).get<Table>();
    if (!averages_consistent(t)) throw InternalError(path.string() + ": avg column does not match its cells");
    md += "\n## " + std::string(title) + "\n\n" + to_markdown(t);
    any = true;
  }
  if (fs::exists(dir / "segments.json")) {
    const json s = read_json_file(dir / "segments.json");
    md += "\n## Segment evolution\n\n| Iteration | Praise | Solution | Problem | Local | Consistent |\n|---:|---:|---:|---:|---:|---:|\n";
    auto opt = [](const json& v) { return v.is_null() ? std::string("n/a") : fmt::format("{:.2f}", v.get<double>()); };
    for (const auto& it : s.at("iterations")) {
      md += fmt::format("| {} | {:.2f} | {:.2f} | {:.2f} | {} | {} |\n", it.at("iteration").get<int>(),
                        it.at("mean_praise").get<double>(), it.at("mean_solution").get<double>(),
                        it.at("mean_problem").get<double>(), opt(it.at("local_fraction")),
                        opt(it.at("consistent_fraction")));
    }
    any = true;
  }
  if (!any) throw MissingFile((dir / "extrinsic.json").string());
  write_file_atomic(dir / "report.md", md);
  std::cout << md;
}

int exit_code(const Error& e) { return static_cast<int>(e.error_class()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback optimization through simulated student revisions"};
  app.require_subcommand(1);
  // global flags may follow the subcommand too
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "YAML config file")->check(CLI::ExistingFile);
  app.add_option("--run-id", opt.run_id, "Run identifier (directory under runs_dir)");
  app.add_option("--runs-dir", opt.runs_dir, "Override paths.runs_dir");
  app.add_flag("--mock", opt.mock, "Use scripted backends for every role; no network");
  app.add_flag("--resume", opt.resume, "Continue an existing run");
  app.add_option("--max-concurrency", opt.max_concurrency, "Requests in flight");
  app.add_option("--iterations", opt.iterations, "Loop iterations T");
  app.add_option("--k", opt.k, "Samples per essay K");
  app.add_option("--beta", opt.beta, "DPO beta");
  app.add_option("--temperatures", opt.temperatures, "Simulator temperatures for evaluation")->delimiter(',');
  app.add_option("--seeds", opt.seeds, "Seeds for evaluation")->delimiter(',');
  app.add_flag("--lenient", opt.lenient, "Skip malformed dataset lines instead of failing");
  app.add_option("--log-level", opt.log_level, "trace|debug|info|warn|error");

  struct Sub {
    const char* name;
    const char* help;
    void (*run)(Context&);
  };
  const std::vector<Sub> subs = {
      {"validate-data", "Validate an essays JSONL file", cmd_validate_data},
      {"split", "Write train/test splits", cmd_split},
      {"analyze-diff", "Word and sentence level edits between initial and revised essays", cmd_analyze_diff},
      {"faithfulness", "Faithful/unfaithful edit counts and gamma", cmd_faithfulness},
      {"combine", "Merge the peer reviews of each essay", cmd_combine},
      {"simulate", "Simulated revisions per temperature with faithfulness", cmd_simulate},
      {"build-prefs", "One round of sampling and preference pairs", cmd_build_prefs},
      {"train-dpo", "Train a toy policy on preference pairs", cmd_train_dpo},
      {"export-prefs", "Preference pairs as prompt/chosen/rejected rows", cmd_export_prefs},
      {"loop", "Iterative sample, pair, train loop", cmd_loop},
      {"eval-extrinsic", "Revision quality table over temperatures and seeds", cmd_eval_extrinsic},
      {"eval-intrinsic", "Pedagogical quality table", cmd_eval_intrinsic},
      {"segments", "Praise/problem/solution segment evolution", cmd_segments},
      {"report", "Markdown report of the evaluation tables", cmd_report},
  };
  std::map<std::string, void (*)(Context&)> handlers;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    handlers[s.name] = s.run;
    const std::string name = s.name;
    if (name == "validate-data" || name == "split" || name == "analyze-diff" || name == "faithfulness" ||
        name == "combine" || name == "simulate") {
      sub->add_option("input", opt.input, "Essays JSONL (defaults to paths.dataset)");
    }
    if (name == "report") sub->add_option("run_dir", opt.input, "Run directory");
    if (name == "analyze-diff" || name == "faithfulness" || name == "combine" || name == "build-prefs" ||
        name == "train-dpo" || name == "export-prefs") {
      sub->add_option("-o,--output", opt.output, "Output path");
    }
    if (name == "split") sub->add_option("--train-count", opt.train_count, "Records in the train split");
    if (name == "faithfulness") sub->add_option("--annotations", opt.annotations, "Annotation JSONL to summarize");
    if (name == "simulate") sub->add_option("--temperature", opt.temperature, "Single simulator temperature");
    if (name == "build-prefs" || name == "train-dpo" || name == "loop" || name == "eval-extrinsic" ||
        name == "eval-intrinsic") {
      sub->add_option("--policy", opt.policy, "Initial toy policy JSON");
    }
    if (name == "train-dpo" || name == "export-prefs") sub->add_option("--prefs", opt.prefs, "Preference pairs JSONL");
    if (name == "loop") sub->add_option("--stop-after", opt.stop_after, "Stop after this iteration");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorClass::config);
  }

  setup_logging(opt.log_level.value_or("info"));
  int rc = 0;
  try {
    Context ctx(opt);
    if (!opt.log_level) spdlog::set_level(spdlog::level::from_str(ctx.config().log_level));
    for (auto* sub : app.get_subcommands()) handlers.at(sub->get_name())(ctx);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    rc = exit_code(e);
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    rc = static_cast<int>(ErrorClass::internal);
  }
  const auto calls = network_call_count();
  spdlog::info("network_calls={}", calls);
  if (opt.mock && calls != 0) {
    spdlog::error("mock run performed {} network calls", calls);
    return static_cast<int>(ErrorClass::internal);
  }
  return rc;
}
