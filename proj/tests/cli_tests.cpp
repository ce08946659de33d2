// End-to-end checks of the command-line surface: exit codes, file artifacts,
// reruns. Invoked with the binary path as argv[1].

#include <malloc.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::string g_bin;
fs::path g_work;

void check(bool ok, const std::string& what) {
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
  if (!ok) ++g_failures;
}

int run(const std::string& args, std::string* output = nullptr) {
  fs::path out_file = g_work / "cmd_output.txt";
  std::string cmd = g_bin + " " + args + " > " + out_file.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(out_file);
    output->assign((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  }
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

std::string tiny_config(const std::string& out_dir) {
  return "cotpot-config v1\n"
         "[problems]\n"
         "train_size=12\n"
         "held_out_size=4\n"
         "step_counts=1,2\n"
         "large_fraction=0\n"
         "[teacher]\n"
         "k=1\n"
         "[model]\n"
         "d_model=16\n"
         "n_layers=1\n"
         "n_heads=2\n"
         "d_ff=32\n"
         "max_seq_len=128\n"
         "[train]\n"
         "epochs_per_phase=1\n"
         "batch_size=8\n"
         "[ablate]\n"
         "seeds=1\n"
         "strategies=cot-only,cot-then-pot\n"
         "[run]\n"
         "master_seed=7\n"
         "out_dir=" +
         out_dir + "\n";
}

void test_minilang() {
  write_file(g_work / "ok.mlp", "let a = 3 * 4;\nanswer a - 2;\n");
  std::string out;
  check(run("mini-lang run " + (g_work / "ok.mlp").string(), &out) == 0 &&
            out == "10\n",
        "mini-lang prints the canonical integer and exits 0");

  write_file(g_work / "frac.mlp", "answer 1/3;\n");
  check(run("mini-lang run " + (g_work / "frac.mlp").string(), &out) == 0 &&
            out == "1/3\n",
        "mini-lang prints exact fractions");

  write_file(g_work / "lex.mlp", "answer 1 @ 2;\n");
  check(run("mini-lang run " + (g_work / "lex.mlp").string()) == 10,
        "lex errors exit with the lex code");
  write_file(g_work / "parse.mlp", "let = 1; answer 1;\n");
  check(run("mini-lang run " + (g_work / "parse.mlp").string()) == 11,
        "parse errors exit with the parse code");
  write_file(g_work / "noanswer.mlp", "let a = 1;\n");
  check(run("mini-lang run " + (g_work / "noanswer.mlp").string()) == 12,
        "missing answer exits with its own code");
  write_file(g_work / "div0.mlp", "answer 1 / 0;\n");
  check(run("mini-lang run " + (g_work / "div0.mlp").string()) == 15,
        "division by zero exits with its own code");
  check(run("mini-lang run " + (g_work / "missing.mlp").string()) == 3,
        "missing program file exits 3");
}

void test_config_errors() {
  write_file(g_work / "bad.cfg", "[model]\nbogus=1\n");
  std::string out;
  int code = run("--config " + (g_work / "bad.cfg").string() + " gen-data", &out);
  check(code == 2 && out.find("line 2") != std::string::npos,
        "malformed config exits 2 with a line diagnostic");
  check(run("frobnicate") == 2, "unknown subcommand exits 2");
  check(run("train --strategy cot-only --config /nonexistent.cfg") == 3,
        "missing config file exits 3");
}

void test_pipeline() {
  fs::path out_dir = g_work / "exp";
  fs::path cfg = g_work / "tiny.cfg";
  write_file(cfg, tiny_config(out_dir.string()));
  const std::string base = "--config " + cfg.string() + " ";

  check(run(base + "gen-data") == 0 &&
            fs::exists(out_dir / "data/train.jsonl") &&
            fs::exists(out_dir / "data/held_out.manifest"),
        "gen-data writes records and manifests, creating directories");

  check(run(base + "synth") == 0 &&
            fs::exists(out_dir / "data/corpus.jsonl") &&
            fs::exists(out_dir / "data/filter_report.csv"),
        "synth writes the corpus and filter report");
  std::string report = slurp(out_dir / "data/filter_report.csv");
  check(report.find("cot,24,24,0,0") != std::string::npos ||
            report.find("cot,12,12,0,0") != std::string::npos,
        "zero-noise teacher rejects nothing");

  std::string corpus_bytes = slurp(out_dir / "data/corpus.jsonl");
  check(run(base + "synth") == 0 &&
            slurp(out_dir / "data/corpus.jsonl") == corpus_bytes,
        "synth reruns byte-identically under one seed");

  check(run(base + "train --strategy not-a-thing") == 2,
        "unknown strategy exits 2");

  check(run(base + "train --strategy cot-then-pot") == 0 &&
            fs::exists(out_dir / "runs/cot-then-pot-seed1/phase-1.ckpt") &&
            fs::exists(out_dir / "runs/cot-then-pot-seed1/phase-2.ckpt"),
        "two-phase training emits two checkpoints");

  check(run(base + "train --strategy cot-then-pot --resume") == 0,
        "resume on a completed run is a no-op success");

  check(run(base + "eval --run-dir " +
            (out_dir / "runs/cot-then-pot-seed1").string() + " --manifest " +
            (out_dir / "data/held_out.manifest").string() + " --mode pot") ==
                0 &&
            fs::exists(out_dir / "runs/cot-then-pot-seed1/eval.csv"),
        "eval writes eval.csv for a finished run");

  check(run(base + "eval --run-dir " + (out_dir / "runs/ghost").string() +
            " --manifest " + (out_dir / "data/held_out.manifest").string() +
            " --mode pot") == 3,
        "eval on a missing run exits 3");

  check(run(base + "ablate") == 0 && fs::exists(out_dir / "ablation.csv") &&
            fs::exists(out_dir / "ablation.txt"),
        "ablate writes the strategy table");

  // report regenerates the table byte-identically from run summaries.
  std::string table_bytes = slurp(out_dir / "ablation.txt");
  fs::path report_dir = g_work / "rebuilt";
  int code = run(base + "report " +
                 (out_dir / "runs/cot-only-seed1").string() + " " +
                 (out_dir / "runs/cot-then-pot-seed1").string() + " --out " +
                 report_dir.string());
  check(code == 0 && slurp(report_dir / "ablation.txt") == table_bytes,
        "report reproduces ablation.txt from persisted records");

  check(run(base + "report " + (g_work / "not-a-run").string()) == 3,
        "report on a non-run directory exits 3");

  // Environment override changes the resolved snapshot.
  fs::path env_out = g_work / "env_exp";
  std::string env_cmd = "MODEL__D_MODEL=24 " + g_bin + " --config " +
                        cfg.string() + " --set run.out_dir=" +
                        env_out.string() + " gen-data > /dev/null 2>&1";
  std::system(env_cmd.c_str());
  check(fs::exists(env_out / "data/train.jsonl"),
        "flag overrides redirect the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);
  if (argc < 2) {
    std::fprintf(stderr, "usage: cotpot_cli_tests <path-to-cotpot>\n");
    return 2;
  }
  g_bin = argv[1];
  g_work = fs::temp_directory_path() / "cotpot_cli_tests";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  test_minilang();
  test_config_errors();
  test_pipeline();

  fs::remove_all(g_work);
  if (g_failures) {
    std::printf("%d CLI check(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all CLI checks passed\n");
  return 0;
}
