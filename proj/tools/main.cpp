#include <CLI11.hpp>
#include <malloc.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "cotpot/checkpoint.hpp"
#include "cotpot/config.hpp"
#include "cotpot/curriculum.hpp"
#include "cotpot/eval.hpp"
#include "cotpot/minilang.hpp"
#include "cotpot/problem_gen.hpp"
#include "cotpot/synth.hpp"
#include "cotpot/tokenizer.hpp"

// Exit codes: 0 success, 2 config/usage error, 3 missing artifact,
// 4 numerical failure. `mini-lang run` additionally maps interpreter error
// classes to codes 10..17 (see docs/minilang.md).
namespace {

namespace fs = std::filesystem;
using namespace cotpot;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingArtifact("missing artifact: " + path);
}

struct DataBundle {
  std::vector<problem_gen::Problem> train;
  std::vector<problem_gen::Problem> held_out;
  std::vector<synth::AcceptedPair> corpus;
};

std::string data_dir(const config::ExperimentConfig& cfg) {
  return cfg.out_dir + "/data";
}

DataBundle load_data(const config::ExperimentConfig& cfg, bool need_corpus) {
  DataBundle data;
  const std::string dir = data_dir(cfg);
  require_file(dir + "/train.jsonl");
  require_file(dir + "/held_out.jsonl");
  data.train = problem_gen::load_problems(dir + "/train.jsonl");
  data.held_out = problem_gen::load_problems(dir + "/held_out.jsonl");
  if (need_corpus) {
    require_file(dir + "/corpus.jsonl");
    data.corpus = synth::load_corpus(data.train, dir + "/corpus.jsonl");
  }
  return data;
}

tok::Vocab build_vocab(const DataBundle& data) {
  std::vector<std::string> corpus;
  for (const auto& p : data.train) {
    corpus.push_back(p.question);
    corpus.push_back(p.cot.text);
    corpus.push_back(p.pot.text);
  }
  for (const auto& p : data.held_out) {
    corpus.push_back(p.question);
    corpus.push_back(p.cot.text);
    corpus.push_back(p.pot.text);
  }
  // The grammar lexicon keeps jittered re-renders in vocabulary.
  for (auto& word : problem_gen::grammar_lexicon()) corpus.push_back(word);
  return tok::Vocab::build(corpus);
}

struct EncodedCorpora {
  std::vector<tok::EncodedExample> d_cot;
  std::vector<tok::EncodedExample> d_pot;
  std::vector<tok::EncodedExample> probe_cot;
};

EncodedCorpora encode_corpora(const DataBundle& data, const tok::Vocab& vocab) {
  EncodedCorpora out;
  for (const synth::AcceptedPair& pair : data.corpus) {
    const problem_gen::Problem& p = data.train[pair.problem_index];
    tok::EncodedExample ex = tok::encode(vocab, p, pair.rationale);
    (pair.rationale.mode == problem_gen::Mode::Cot ? out.d_cot : out.d_pot)
        .push_back(std::move(ex));
  }
  const std::size_t probe_n = std::min<std::size_t>(64, data.held_out.size());
  for (std::size_t i = 0; i < probe_n; ++i) {
    out.probe_cot.push_back(
        tok::encode(vocab, data.held_out[i], data.held_out[i].cot));
  }
  return out;
}

eval::AblationConfig ablation_config(const config::ExperimentConfig& cfg) {
  eval::AblationConfig ab;
  if (!cfg.strategies.empty()) {
    ab.strategies.clear();
    for (const std::string& name : cfg.strategies) {
      ab.strategies.push_back(*curriculum::StrategySpec::parse(name));
    }
  }
  ab.seeds = cfg.seeds;
  ab.retention_fraction = cfg.retention_fraction;
  ab.train = cfg.train;
  ab.model = cfg.model;
  ab.eval = cfg.eval_opts;
  return ab;
}

int cmd_gen_data(const config::ExperimentConfig& cfg) {
  problem_gen::Dataset ds = problem_gen::generate_dataset(cfg.problems);
  const std::string dir = data_dir(cfg);
  fs::create_directories(dir);
  problem_gen::save_problems(ds.train, dir + "/train.jsonl");
  problem_gen::save_manifest(ds.train_manifest, dir + "/train.manifest");
  problem_gen::save_problems(ds.held_out, dir + "/held_out.jsonl");
  problem_gen::save_manifest(ds.held_out_manifest, dir + "/held_out.manifest");
  std::cout << "generated " << ds.train.size() << " train / "
            << ds.held_out.size() << " held-out problems into " << dir << "\n";
  return kExitOk;
}

int cmd_synth(const config::ExperimentConfig& cfg) {
  DataBundle data = load_data(cfg, false);
  // The manifest is the authority on what the corpus should cover.
  require_file(data_dir(cfg) + "/train.manifest");
  problem_gen::DatasetManifest manifest =
      problem_gen::load_manifest(data_dir(cfg) + "/train.manifest");
  if (manifest.problem_ids.size() != data.train.size()) {
    throw MissingArtifact("train.manifest disagrees with train.jsonl (" +
                          std::to_string(manifest.problem_ids.size()) + " vs " +
                          std::to_string(data.train.size()) + " records)");
  }
  auto [pairs, report] =
      synth::build_corpus(data.train, cfg.teacher, cfg.dedup_threshold);
  const std::string dir = data_dir(cfg);
  synth::save_corpus(pairs, data.train, dir + "/corpus.jsonl");
  synth::save_filter_report(report, dir + "/filter_report.csv");
  std::cout << "kept " << report.total.kept << " of " << report.total.generated
            << " candidates (wrong " << report.total.rejected_wrong
            << ", invalid " << report.total.rejected_invalid << ", duplicate "
            << report.total.removed_duplicates << ")\n";
  return kExitOk;
}

int cmd_train(const config::ExperimentConfig& cfg, const std::string& strategy,
              bool resume) {
  auto spec = curriculum::StrategySpec::parse(strategy);
  if (!spec) {
    std::cerr << "unknown strategy '" << strategy << "'\n";
    return kExitConfig;
  }
  const std::uint64_t seed = cfg.seeds.front();
  const std::string run_dir =
      cfg.out_dir + "/runs/" + spec->name() + "-seed" + std::to_string(seed);
  if (resume && fs::exists(run_dir + "/run.meta")) {
    std::cout << "run already complete: " << run_dir << "\n";
    return kExitOk;
  }
  DataBundle data = load_data(cfg, true);
  tok::Vocab vocab = build_vocab(data);
  EncodedCorpora enc = encode_corpora(data, vocab);

  curriculum::TrainConfig train = cfg.train;
  train.seed = mix_seed(seed, "train");
  model::ModelConfig mc = cfg.model;
  mc.vocab_size = vocab.size();
  mc.init_seed = mix_seed(seed, "init");
  curriculum::RetentionConfig retention;
  retention.fraction = cfg.retention_fraction;
  retention.seed = mix_seed(seed, "retention");

  curriculum::RunInputs inputs;
  inputs.d_cot = std::move(enc.d_cot);
  inputs.d_pot = std::move(enc.d_pot);
  inputs.probe_cot = std::move(enc.probe_cot);
  curriculum::RunRecord record =
      curriculum::run_strategy(*spec, inputs, retention, train, mc, vocab,
                               run_dir, cfg.snapshot());
  std::cout << "trained " << spec->name() << " (" << record.checkpoints.size()
            << " checkpoints) in " << run_dir << "\n";
  return kExitOk;
}

int cmd_eval(const config::ExperimentConfig& cfg, const std::string& run_dir,
             const std::string& manifest_path, const std::string& mode_name) {
  if (mode_name != "cot" && mode_name != "pot") {
    std::cerr << "mode must be cot or pot\n";
    return kExitConfig;
  }
  require_file(run_dir + "/vocab.txt");
  tok::Vocab vocab = tok::Vocab::load(run_dir + "/vocab.txt");
  curriculum::RunRecord record = curriculum::load_run_record(run_dir);
  if (record.checkpoints.empty()) {
    throw MissingArtifact("no phase checkpoints in " + run_dir);
  }
  require_file(manifest_path);
  problem_gen::DatasetManifest manifest =
      problem_gen::load_manifest(manifest_path);
  std::string records_path = manifest_path;
  auto dot = records_path.rfind(".manifest");
  if (dot != std::string::npos) records_path.replace(dot, 9, ".jsonl");
  require_file(records_path);
  std::vector<problem_gen::Problem> all =
      problem_gen::load_problems(records_path);
  std::set<std::string> wanted(manifest.problem_ids.begin(),
                               manifest.problem_ids.end());
  std::vector<problem_gen::Problem> problems;
  for (auto& p : all) {
    if (wanted.count(p.id)) problems.push_back(std::move(p));
  }
  model::Parameters params =
      model::load_checkpoint(record.checkpoints.back());
  problem_gen::Mode mode = mode_name == "cot" ? problem_gen::Mode::Cot
                                              : problem_gen::Mode::Pot;
  eval::EvalResult result = eval::evaluate(params, problems, mode, vocab,
                                           manifest.name, cfg.eval_opts);
  eval::save_eval_csv(result, run_dir + "/eval.csv");
  std::cout << manifest.name << " " << mode_name
            << " accuracy: " << result.accuracy << " (n=" << result.n << ")\n";
  return kExitOk;
}

bool mentions_large_number(const problem_gen::Problem& p) {
  int run = 0;
  for (char c : p.question) {
    run = (c >= '0' && c <= '9') ? run + 1 : 0;
    if (run >= 4) return true;
  }
  return false;
}

void emit_case_transcripts(const config::ExperimentConfig& cfg,
                           const DataBundle& data, const tok::Vocab& vocab) {
  const std::uint64_t seed = cfg.seeds.front();
  auto ckpt_of = [&](const std::string& strategy) {
    return cfg.out_dir + "/runs/" + strategy + "-seed" + std::to_string(seed);
  };
  for (const char* required : {"cot-only", "pot-only", "cot-then-pot"}) {
    if (!fs::exists(ckpt_of(required) + "/run.meta")) return;
  }
  auto last_ckpt = [&](const std::string& strategy) {
    return model::load_checkpoint(
        curriculum::load_run_record(ckpt_of(strategy)).checkpoints.back());
  };
  model::Parameters cot_model = last_ckpt("cot-only");
  model::Parameters pot_model = last_ckpt("pot-only");
  model::Parameters seq_model = last_ckpt("cot-then-pot");
  eval::CaseModels models{&cot_model, &pot_model, &seq_model};

  // Look for a large-number problem where the prose-trained model miscomputes
  // but the curriculum model is right; fall back to the first problem.
  const problem_gen::Problem* pick = nullptr;
  int scanned = 0;
  for (const problem_gen::Problem& p : data.held_out) {
    if (scanned++ > 80) break;
    if (!mentions_large_number(p)) continue;
    auto cot_score =
        eval::score_problem(cot_model, p, problem_gen::Mode::Cot, vocab,
                            cfg.eval_opts);
    if (cot_score.correct ||
        cot_score.failure != eval::FailureKind::WrongAnswer) {
      continue;
    }
    auto seq_score =
        eval::score_problem(seq_model, p, problem_gen::Mode::Pot, vocab,
                            cfg.eval_opts);
    if (seq_score.correct) {
      pick = &p;
      break;
    }
  }
  if (!pick && !data.held_out.empty()) pick = &data.held_out.front();
  if (!pick) return;
  std::string report = eval::case_transcript(models, *pick, vocab,
                                             cfg.eval_opts);
  std::ofstream out(cfg.out_dir + "/case_" + pick->id + ".txt",
                    std::ios::binary);
  out << report;
  std::cout << "case transcript: case_" << pick->id << ".txt\n";
}

int cmd_ablate(const config::ExperimentConfig& cfg) {
  DataBundle data = load_data(cfg, true);
  tok::Vocab vocab = build_vocab(data);
  EncodedCorpora enc = encode_corpora(data, vocab);

  eval::AblationConfig ab = ablation_config(cfg);
  ab.model.vocab_size = vocab.size();
  eval::AblationInputs inputs;
  inputs.d_cot = std::move(enc.d_cot);
  inputs.d_pot = std::move(enc.d_pot);
  inputs.held_out = data.held_out;
  inputs.probe_cot_loss_batch = std::move(enc.probe_cot);

  std::vector<eval::AblationRun> runs = eval::run_ablation(
      ab, inputs, vocab, cfg.out_dir + "/runs", cfg.snapshot());
  eval::write_ablation_csv(runs, cfg.out_dir + "/ablation.csv");
  std::string table = eval::render_ablation_table(runs);
  {
    std::ofstream out(cfg.out_dir + "/ablation.txt", std::ios::binary);
    out << table;
  }
  std::cout << table;
  emit_case_transcripts(cfg, data, vocab);
  return kExitOk;
}

int cmd_report(const config::ExperimentConfig& cfg,
               const std::vector<std::string>& run_dirs,
               const std::string& out_dir) {
  std::vector<eval::AblationRun> runs = eval::load_ablation_runs(run_dirs);
  const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
  fs::create_directories(dir);
  eval::write_ablation_csv(runs, dir + "/ablation.csv");
  std::string table = eval::render_ablation_table(runs);
  {
    std::ofstream out(dir + "/ablation.txt", std::ios::binary);
    out << table;
  }
  // Combined per-step breakdown across the runs that have an eval.csv.
  std::ofstream per_step(dir + "/per_step.csv", std::ios::binary);
  per_step << "# cotpot-per-step v1\n";
  per_step << "run,dataset,mode,bucket,correct,total\n";
  for (const std::string& run_dir : run_dirs) {
    std::ifstream in(run_dir + "/eval.csv", std::ios::binary);
    if (!in) continue;
    std::string line;
    std::getline(in, line);  // schema
    std::getline(in, line);  // header
    const std::string run_name = fs::path(run_dir).filename().string();
    while (std::getline(in, line)) {
      if (!line.empty()) per_step << run_name << "," << line << "\n";
    }
  }
  std::cout << table;
  return kExitOk;
}

int cmd_minilang_run(const std::string& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  std::string source((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
  auto result = minilang::run(source);
  if (!result.ok()) {
    std::cerr << result.error().to_string() << "\n";
    return minilang::error_kind_code(result.error().kind);
  }
  std::cout << result.value().to_string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Large tensor buffers churn every step; keep freed arenas mapped.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);

  CLI::App app{"cotpot: curriculum experiments on synthetic math problems"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand name

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "experiment config file");
  app.add_option("--set", overrides, "override: section.key=value");

  auto* gen = app.add_subcommand("gen-data", "generate the problem universe");
  auto* synth_cmd =
      app.add_subcommand("synth", "run the noisy teacher and filters");
  auto* train = app.add_subcommand("train", "train one strategy");
  std::string strategy;
  bool resume = false;
  train->add_option("--strategy", strategy, "strategy name")->required();
  train->add_flag("--resume", resume, "no-op when the run is complete");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a finished run");
  std::string run_dir, manifest_path, mode_name;
  eval_cmd->add_option("--run-dir", run_dir)->required();
  eval_cmd->add_option("--manifest", manifest_path)->required();
  eval_cmd->add_option("--mode", mode_name)->required();
  auto* ablate = app.add_subcommand("ablate", "full strategy-by-seed sweep");
  auto* report = app.add_subcommand("report", "rebuild tables from run dirs");
  std::vector<std::string> report_dirs;
  std::string report_out;
  report->add_option("run_dirs", report_dirs, "run directories")->required();
  report->add_option("--out", report_out, "output directory");
  auto* mini = app.add_subcommand("mini-lang", "the program interpreter");
  auto* mini_run = mini->add_subcommand("run", "interpret a program file");
  std::string program_path;
  mini_run->add_option("file", program_path)->required();
  mini->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    config::ExperimentConfig cfg = config::ExperimentConfig::defaults();
    if (!config_path.empty()) {
      require_file(config_path);
      cfg.apply_file(config_path);
    }
    cfg.apply_env();
    for (const std::string& o : overrides) cfg.apply_override(o);
    cfg.resolve();

    if (gen->parsed()) return cmd_gen_data(cfg);
    if (synth_cmd->parsed()) return cmd_synth(cfg);
    if (train->parsed()) return cmd_train(cfg, strategy, resume);
    if (eval_cmd->parsed())
      return cmd_eval(cfg, run_dir, manifest_path, mode_name);
    if (ablate->parsed()) return cmd_ablate(cfg);
    if (report->parsed()) return cmd_report(cfg, report_dirs, report_out);
    if (mini->parsed()) return cmd_minilang_run(program_path);
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingArtifact& e) {
    std::cerr << e.what() << "\n";
    return kExitMissing;
  } catch (const model::CheckpointError& e) {
    std::cerr << e.what() << "\n";
    return kExitMissing;
  } catch (const eval::MissingCheckpoint& e) {
    std::cerr << e.what() << "\n";
    return kExitMissing;
  } catch (const curriculum::NonFiniteLoss& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
