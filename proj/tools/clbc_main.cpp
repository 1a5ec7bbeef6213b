#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clbc/pipeline.hpp"

namespace {

using namespace clbc;

struct Args {
  std::string command;
  std::map<std::string, std::string> options;

  bool has(const std::string& name) const { return options.count(name) > 0; }

  std::string get(const std::string& name, const std::string& fallback = "") const {
    auto it = options.find(name);
    return it == options.end() ? fallback : it->second;
  }

  std::string need(const std::string& name) const {
    auto it = options.find(name);
    if (it == options.end()) throw ConfigError("missing required option --" + name);
    return it->second;
  }

  std::int64_t get_int(const std::string& name, std::int64_t fallback) const {
    auto it = options.find(name);
    return it == options.end() ? fallback : std::stoll(it->second);
  }

  std::uint64_t get_u64(const std::string& name, std::uint64_t fallback) const {
    auto it = options.find(name);
    return it == options.end() ? fallback : std::stoull(it->second);
  }

  double get_double(const std::string& name, double fallback) const {
    auto it = options.find(name);
    return it == options.end() ? fallback : std::stod(it->second);
  }
};

Args parse_args(int argc, char** argv) {
  Args args;
  if (argc < 2) return args;
  args.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    std::string tok = argv[i];
    if (tok.rfind("--", 0) != 0) throw ConfigError("unexpected argument: " + tok);
    std::string name = tok.substr(2);
    if (i + 1 < argc && std::string(argv[i + 1]).rfind("--", 0) != 0) {
      args.options[name] = argv[++i];
    } else {
      args.options[name] = "1";  // bare flag
    }
  }
  return args;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

std::vector<TaskFamily> parse_families(const std::string& csv) {
  std::vector<TaskFamily> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    std::string item = csv.substr(pos, comma - pos);
    if (!item.empty()) out.push_back(family_from_label(item));
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("family list is empty");
  return out;
}

PipelineConfig pipeline_config(const Args& args) {
  PipelineConfig cfg;
  if (args.has("root")) cfg.artifact_root = args.get("root");
  cfg.master_seed = args.get_u64("master-seed", cfg.master_seed);
  if (args.has("thresholds"))
    cfg.thresholds = ThresholdFile::from_value(parse_value(read_file(args.need("thresholds"))));
  if (args.has("seeds")) cfg.seed_count = args.get_int("seeds", cfg.seed_count);
  if (args.has("strict-episodes"))
    cfg.strict_episodes = args.get_int("strict-episodes", cfg.strict_episodes);
  if (args.has("probes")) cfg.probe_count = args.get_int("probes", cfg.probe_count);
  if (args.has("episodes"))
    cfg.sweep.episodes_per_seed = args.get_int("episodes", cfg.sweep.episodes_per_seed);
  if (args.has("eval-episodes"))
    cfg.sweep.budget.eval_episodes = args.get_int("eval-episodes", cfg.sweep.budget.eval_episodes);
  if (args.has("restarts"))
    cfg.sweep.budget.restarts = args.get_int("restarts", cfg.sweep.budget.restarts);
  if (args.has("steps"))
    cfg.sweep.budget.steps_per_restart =
        args.get_int("steps", cfg.sweep.budget.steps_per_restart);
  if (args.has("preset")) cfg.sweep.objective = attack_preset(args.need("preset"));
  if (args.has("quick")) {
    cfg.strict_episodes = 100;
    cfg.probe_count = 200;
    cfg.sweep.episodes_per_seed = 60;
    cfg.sweep.budget.eval_episodes = 12;
  }
  return cfg;
}

int cmd_gen_catalogs(const Args& args) {
  CatalogConfig cfg;
  cfg.catalog_id = args.get("id", "catalog-0");
  cfg.seed = args.get_u64("seed", 0);
  cfg.k = args.get_int("k", 2);
  cfg.task_count = args.get_int("task-count", 6);
  if (args.has("families")) cfg.families = parse_families(args.need("families"));
  if (args.has("min-options") || args.has("max-options")) {
    int lo = static_cast<int>(args.get_int("min-options", 2));
    int hi = static_cast<int>(args.get_int("max-options", lo));
    cfg.option_count_override = {lo, hi};
  }
  Catalog catalog = generate_catalog(cfg);
  std::string text = serialize_text(catalog.to_value());
  std::string out = args.get("out");
  if (out.empty()) {
    std::string root = args.has("root") ? args.get("root") : artifact_root_from_env();
    out = (std::filesystem::path(root) / "catalogs" / (cfg.catalog_id + ".log")).string();
  }
  write_file(out, text);
  std::cout << "catalog " << catalog.catalog_id << " tasks=" << catalog.tasks.size()
            << " k=" << catalog.k << " digest=" << catalog.digest().hex() << "\n"
            << "wrote " << out << "\n";
  return 0;
}

int cmd_policy(const Args& args) {
  PolicyDocument policy = args.has("timing") ? timing_channel_policy() : default_policy();
  std::string text = serialize_text(policy.to_value());
  if (args.has("out")) {
    write_file(args.need("out"), text);
    std::cout << "policy " << policy.hash().hex() << "\nwrote " << args.need("out") << "\n";
  } else {
    std::cout << text << "\n";
  }
  return 0;
}

int cmd_admit(const Args& args) {
  PolicyDocument policy =
      args.has("policy")
          ? PolicyDocument::from_value(parse_value(read_file(args.need("policy"))))
          : default_policy();
  std::string dir = args.need("transcript");
  std::string in_path = args.need("in");

  std::optional<Catalog> catalog;
  if (args.has("catalog"))
    catalog = Catalog::from_value(parse_value(read_file(args.need("catalog"))));

  Bytes seed_bytes(32, 0);
  if (args.has("seed-hex")) {
    seed_bytes = from_hex(args.need("seed-hex"));
    if (seed_bytes.size() != 32) throw ConfigError("--seed-hex must decode to 32 octets");
  }
  LaneSettings lane;
  lane.lane_id = "cli";
  lane.policy = policy;
  lane.seed = SeedContext::from_bytes(seed_bytes, args.get("epoch", "epoch-0"));
  if (args.has("key-hex")) {
    lane.receipt_key = from_hex(args.need("key-hex"));
  } else {
    Digest d = sha256(std::string("cli-receipt-key"));
    lane.receipt_key.assign(d.v.begin(), d.v.end());
  }
  if (args.has("sampled"))
    lane.proof = ProofSettings::sampled(args.get_int("sampled", 6));
  if (args.has("permissive")) lane.profile = AdmissionProfile::permissive();
  lane.admit_all = args.has("admit-all");
  lane.log_verdicts = args.has("log-verdicts");

  std::string transcript_path = (std::filesystem::path(dir) / "transcript.log").string();
  std::string rejection_path = (std::filesystem::path(dir) / "rejections.log").string();
  TranscriptState state;
  if (std::filesystem::exists(transcript_path))
    state = transcript_from_log(read_file(transcript_path));
  std::string prior_rejections;
  if (std::filesystem::exists(rejection_path)) prior_rejections = read_file(rejection_path);

  AdmissionEnv env = lane.admission_env();
  bool simple = args.has("simple");
  std::string input = read_file(in_path);
  std::size_t admitted = 0, rejected = 0, pos = 0;
  while (pos < input.size()) {
    std::size_t eol = input.find('\n', pos);
    if (eol == std::string::npos) eol = input.size();
    std::string line = input.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;

    const TaskInstance* task = nullptr;
    if (catalog)
      task = &catalog->tasks[static_cast<std::size_t>(state.turn_count) %
                             catalog->tasks.size()];
    Bytes wire;
    CandidateEnvelope cand;
    bool parsed = true;
    try {
      wire = from_hex(line);
      cand = CandidateEnvelope::from_bytes(wire);
    } catch (const Error& e) {
      parsed = false;
      state.rejected.push_back({sha256(wire), ReasonCode::Canonicalization, state.turn_count,
                                std::string("unparseable candidate: ") + e.what()});
      std::cout << "turn=" << state.turn_count << " rejected reason=canonicalization\n";
      ++rejected;
    }
    if (!parsed) continue;
    AdmissionVerdict v =
        simple ? [&] {
          AdmissionVerdict sv = admit_simple(cand, make_context(state, env, task), policy);
          if (sv.admitted) {
            // mirror apply_admission's bookkeeping for the reduced gate
            ChainLink link = extend_chain(state.head, cand.env.payload_bytes(), state.turn_count);
            state.seen_payloads.insert(link.payload);
            state.admitted.push_back({cand.wire, sv, link});
            state.head = link.link;
            ++state.turn_count;
          } else {
            state.rejected.push_back(
                {cand.env.payload_digest(), sv.reason, state.turn_count, sv.detail});
          }
          return sv;
        }()
               : apply_admission(state, cand, env, policy, task);
    std::cout << "turn=" << (v.admitted ? state.turn_count - 1 : state.turn_count)
              << (v.admitted ? " admitted" : " rejected") << " reason=" << reason_label(v.reason)
              << "\n";
    v.admitted ? ++admitted : ++rejected;
  }

  write_file(transcript_path, transcript_to_log(state));
  write_file(rejection_path, prior_rejections + rejections_to_log(state));
  std::cout << "admitted=" << admitted << " rejected=" << rejected
            << " turns=" << state.turn_count << " head=" << state.head.hex() << "\n";
  return 0;
}

int cmd_stage(const Args& args, Stage stage) {
  PipelineRun run(pipeline_config(args));
  StageResult r = run.run_stage_standalone(stage);
  std::cout << "stage " << stage_label(stage) << (r.ok ? " ok" : " FAILED") << "\n";
  if (!r.ok) std::cout << "reason " << r.failure_reason << "\n";

  if (stage == Stage::Attacker) {
    std::cout << "best=" << r.summary.at("best_strategy").as_string()
              << " strategies=" << r.summary.at("strategy_count").as_int()
              << " train_steps=" << r.summary.at("train_steps").as_int()
              << " delta_norm=" << fmt(r.summary.at("parameter_delta_norm").as_double())
              << "\nadv=" << fmt(r.summary.at("max_adv").as_double())
              << " utility=" << fmt(r.summary.at("min_utility").as_double()) << " reproducible="
              << (r.summary.at("reproducible").as_bool() ? "yes" : "no") << "\n";
  }
  if (stage == Stage::Baselines) {
    for (const Value& c : r.summary.at("classes").as_array())
      std::cout << c.at("class_id").as_string()
                << " utility=" << fmt(c.at("utility").as_double())
                << " adv=" << fmt(c.at("decoder_adv").as_double())
                << " success=" << fmt(c.at("exact_success").as_double())
                << " unique=" << fmt(c.at("unique_response").as_double()) << "\n";
    std::cout << "security_gap=" << fmt(r.summary.at("security_gap").as_double())
              << " ladder=" << (r.summary.at("ladder_monotonic").as_bool() ? "monotonic" : "BROKEN")
              << "\n";
  }
  return r.ok ? 0 : 1;
}

int cmd_audit(const Args& args) {
  std::string dir = args.need("transcript");
  std::string transcript_path = (std::filesystem::path(dir) / "transcript.log").string();
  TranscriptState state = transcript_from_log(read_file(transcript_path));
  if (state.turn_count == 0) throw ConfigError("transcript is empty");

  Digest policy_hash = default_policy().hash();
  if (args.has("policy"))
    policy_hash = PolicyDocument::from_value(parse_value(read_file(args.need("policy")))).hash();

  double rate = args.get_double("rate", 0.05);
  std::uint64_t seed = args.get_u64("audit-seed", 7);
  AuditEpoch epoch = make_epoch(pipeline_seed(seed, 0), policy_hash, rate);
  std::int64_t len = state.turn_count;
  std::int64_t m = args.get_int("m", std::max<std::int64_t>(
                                         1, static_cast<std::int64_t>(rate * double(len) + 0.5)));
  std::vector<std::int64_t> picks = select_challenges(len, seed, m);
  AuditVerdict verdict = respond_and_verify(state, picks, epoch);
  for (const AuditFinding& f : verdict.findings)
    std::cout << "turn=" << f.turn_index
              << (f.failed_check.empty() ? " pass" : " FAIL " + f.failed_check) << "\n";
  std::cout << "audit " << (verdict.pass ? "pass" : "FAIL") << " challenges=" << m << " of "
            << len << " detection_at_f0.1=" << fmt(detection_probability(0.1, m)) << "\n";
  return verdict.pass ? 0 : 1;
}

int cmd_evaluate(const Args& args) {
  PipelineRun run(pipeline_config(args));
  if (run.manifest_on_disk()) run.load_manifest();
  std::vector<StageResult> results = run.run_all();
  run.save_manifest();
  bool all_ok = true;
  for (const StageResult& r : results) {
    all_ok = all_ok && r.ok;
    std::cout << "stage " << r.stage << (r.ok ? " ok" : " FAILED " + r.failure_reason) << "\n";
  }
  std::string report_path = run.store().full_path("report.txt");
  if (std::filesystem::exists(report_path)) std::cout << read_file(report_path);
  return all_ok ? 0 : 1;
}

int cmd_report(const Args& args) {
  PipelineRun run(pipeline_config(args));
  if (!run.manifest_on_disk())
    throw ConfigError("no manifest under " + run.store().root + "; run `clbc evaluate` first");
  run.load_manifest();
  RunManifest manifest = run.manifest();
  Value aggregate = run.store().load_checked(manifest, "aggregate.log");
  std::string text = emit_report_bundle(run.store(), manifest, aggregate);
  std::cout << text << "frontier " << run.store().full_path("frontier.csv") << "\n";
  const Value* verdict = aggregate.find("verdict");
  return verdict && verdict->as_string() == "PASS" ? 0 : 1;
}

int cmd_latency(const Args& args) {
  std::uint64_t master = args.get_u64("master-seed", 2024);
  Catalog catalog = strict_catalog(master);
  LaneSettings lane = lane_for_class(BaselineClass::ClbcFull, default_policy(),
                                     pipeline_seed(master, 0), pipeline_receipt_key(master));
  std::int64_t cadence = args.get_int("cadence", 0);
  lane.proof = cadence > 0 ? ProofSettings::sampled(cadence) : ProofSettings::strict();
  LatencyProfile p = latency_profile(catalog, lane, args.get_double("prover-ms", 50.0),
                                     args.get_int("turns", 200));
  std::cout << "median_ms=" << fmt(p.median_ms) << " p95_ms=" << fmt(p.p95_ms)
            << " proof_rate=" << fmt(p.proof_rate)
            << " non_proved_median_ms=" << fmt(p.non_proved_median_ms) << "\n";
  return 0;
}

int usage() {
  std::cout <<
      "usage: clbc <command> [options]\n"
      "\n"
      "commands:\n"
      "  gen-catalogs  write a task catalog file\n"
      "                [--id NAME] [--seed N] [--families a,b,c] [--k N] [--task-count N]\n"
      "                [--min-options N] [--max-options N] [--out FILE] [--root DIR]\n"
      "  policy        write the built-in policy document\n"
      "                [--timing] [--out FILE]\n"
      "  admit         gate candidate envelopes into a transcript\n"
      "                --transcript DIR --in FILE [--policy FILE] [--catalog FILE]\n"
      "                [--seed-hex HEX] [--epoch ID] [--key-hex HEX] [--sampled N]\n"
      "                [--permissive] [--simple] [--admit-all] [--log-verdicts]\n"
      "  attack        run the adaptive strategy search stage\n"
      "                [--root DIR] [--preset NAME] [--restarts N] [--steps N]\n"
      "                [--eval-episodes N] [--master-seed N]\n"
      "  baselines     run the admission-class comparison stage\n"
      "                [--root DIR] [--episodes N] [--seeds N] [--master-seed N]\n"
      "  audit         spot-check a transcript with seeded challenges\n"
      "                --transcript DIR [--policy FILE] [--rate X] [--m N] [--audit-seed N]\n"
      "  evaluate      run all stages and aggregate against thresholds\n"
      "                [--thresholds FILE] [--root DIR] [--master-seed N] [--quick]\n"
      "                [--seeds N] [--strict-episodes N] [--probes N] [--episodes N]\n"
      "  report        re-emit the report bundle from stored artifacts\n"
      "                [--root DIR]\n"
      "  latency       profile admission latency with a simulated prover\n"
      "                [--prover-ms X] [--turns N] [--cadence N] [--master-seed N]\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    Args args = parse_args(argc, argv);
    if (args.command == "gen-catalogs") return cmd_gen_catalogs(args);
    if (args.command == "policy") return cmd_policy(args);
    if (args.command == "admit") return cmd_admit(args);
    if (args.command == "attack") return cmd_stage(args, Stage::Attacker);
    if (args.command == "baselines") return cmd_stage(args, Stage::Baselines);
    if (args.command == "audit") return cmd_audit(args);
    if (args.command == "evaluate") return cmd_evaluate(args);
    if (args.command == "report") return cmd_report(args);
    if (args.command == "latency") return cmd_latency(args);
    return usage();
  } catch (const clbc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
