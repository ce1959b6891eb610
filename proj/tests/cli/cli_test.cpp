// Integration tests driving the mladi binary end to end. The binary path
// arrives via the MLADI_BIN environment variable (set by ctest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "mladi/corpus.hpp"
#include "mladi/encoder.hpp"
#include "mladi/io.hpp"
#include "mladi/labels.hpp"
#include "mladi/evaluation.hpp"
#include "mladi/trainer.hpp"

using namespace mladi;
namespace fs = std::filesystem;

namespace {

std::string binary_path() {
  const char* bin = std::getenv("MLADI_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "MLADI_BIN must point at the mladi binary");
  return bin;
}

std::string data_dir() {
  const char* dir = std::getenv("MLADI_DATA_DIR");
  REQUIRE_MESSAGE(dir != nullptr, "MLADI_DATA_DIR must point at the data directory");
  return dir;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log =
      fs::temp_directory_path() / ("mladi_cli_out_" + std::to_string(getpid()) + "_" +
                                   std::to_string(counter++) + ".txt");
  const std::string cmd = binary_path() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = fs::exists(log) ? read_file(log) : "";
  fs::remove(log);
  return result;
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& tag) {
    dir = fs::temp_directory_path() / ("mladi_cli_" + tag + "_" + std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

void write_corpus(const fs::path& path, const std::vector<std::array<std::string, 4>>& rows) {
  std::string out = "id\ttext\tgeo\taldi\n";
  for (const auto& r : rows) out += r[0] + "\t" + r[1] + "\t" + r[2] + "\t" + r[3] + "\n";
  atomic_write(path, out);
}

}  // namespace

TEST_CASE("aggregate routes a 3-sample fixture into a hybrid TSV with provenance") {
  Workspace ws("aggregate");
  write_corpus(ws.dir / "corpus.tsv", {{"low", "formal", "EG", "0.05"},
                                       {"mid", "mixed", "MA", "0.5"},
                                       {"high", "dialect", "SY", "0.95"}});
  auto write_labels = [&](const std::string& name, const std::string& bitstring,
                          const std::string& provenance, const std::string& source) {
    std::string out = "id\ttext\tgeo\taldi\tlabels\tprovenance\tsource\n";
    for (const char* id : {"low", "mid", "high"}) {
      out += std::string(id) + "\tt\tEG\t0.5\t" + bitstring + "\t" + provenance + "\t" + source +
             "\n";
    }
    atomic_write(ws.dir / name, out);
  };
  write_labels("bin.tsv", "100000000000000000", "binary-classifiers", "bin");
  write_labels("gpt.tsv", "010000000000000000", "gpt", "gpt");

  auto res = run_cli("aggregate --corpus " + ws.path("corpus.tsv") + " --bin " +
                     ws.path("bin.tsv") + " --gpt " + ws.path("gpt.tsv") +
                     " --aldi-routing default --out " + ws.path("hybrid.tsv"));
  REQUIRE(res.exit_code == 0);

  auto hybrid = load_labeled(ws.dir / "hybrid.tsv");
  REQUIRE(hybrid.size() == 3);
  CHECK(hybrid[0].sample.id == "low");
  CHECK(hybrid[0].routed_source == "bin");
  CHECK(hybrid[1].routed_source == "gpt");
  CHECK(hybrid[2].routed_source == "bin");
  for (const auto& ls : hybrid) CHECK(ls.provenance == Provenance::kHybrid);
  CHECK(fs::exists(ws.dir / "run_manifest.json"));
}

TEST_CASE("schedule runs are byte-identical for the same seed") {
  Workspace ws("sched");
  std::string labeled = "id\ttext\tgeo\taldi\tlabels\tprovenance\tsource\n";
  std::string losses = "id\tloss\n";
  for (int i = 0; i < 40; ++i) {
    const std::string id = "s" + std::to_string(i);
    const double aldi = (i % 4) * 0.26 + 0.01;
    labeled += id + "\ttext\tEG\t" + format_double(aldi) + "\t100000000000000000\thybrid\tbin\n";
    losses += id + "\t" + format_double(0.01 * i) + "\n";
  }
  atomic_write(ws.dir / "ds.tsv", labeled);
  atomic_write(ws.dir / "losses.tsv", losses);

  const std::string base = "schedule --dataset " + ws.path("ds.tsv") + " --losses " +
                           ws.path("losses.tsv") + " --kind aldi --seed 7 --out ";
  REQUIRE(run_cli(base + ws.path("a.json")).exit_code == 0);
  REQUIRE(run_cli(base + ws.path("b.json")).exit_code == 0);
  CHECK(read_file(ws.dir / "a.json") == read_file(ws.dir / "b.json"));
}

TEST_CASE("evaluate on a model that copies gold yields all-1.0 metrics") {
  Workspace ws("eval");
  // Hand-built checkpoint: each label's row fires on its own marker text, so
  // predictions copy the gold labels exactly.
  ReferenceEncoderConfig ecfg;
  ecfg.buckets = 1u << 12;
  auto enc = std::make_shared<ReferenceEncoder>(ecfg);
  LinearModel model(enc, kNumDialects);
  for (auto& b : model.bias()) b = -6.0;
  auto marker = [](DialectLabel d) {
    const std::string code(d.code());
    return code + code + code;
  };
  const auto dev8 = parse_labelset("dev8");
  for (auto d : dev8) {
    for (const auto& [idx, value] : enc->encode(marker(d)).entries) {
      model.weights()[d.index() * model.dim() + idx] += 20.0 * value;
    }
  }
  ModelCheckpointInfo info;
  info.kind = "multilabel";
  save_model(model, ws.dir / "model", info);

  std::string gold = "id\ttext\tgeo\taldi\tlabels\tprovenance\tsource\n";
  int i = 0;
  for (auto d : dev8) {
    LabelVector v;
    v.set(d, true);
    Sample s;
    s.text = marker(d);
    REQUIRE(predict(model, s, 0.3) == v);
    gold += "g" + std::to_string(i++) + "\t" + marker(d) + "\tEG\t0.5\t" + v.to_bitstring() +
            "\tgold\t\n";
  }
  atomic_write(ws.dir / "gold.tsv", gold);

  auto res = run_cli("evaluate --model " + ws.path("model") + " --gold " + ws.path("gold.tsv") +
                     " --labelset dev8 --out " + ws.path("report"));
  REQUIRE(res.exit_code == 0);
  auto report = nlohmann::json::parse(read_file(ws.dir / "report" / "report.json"));
  CHECK(report["macro"]["precision"].get<double>() == 1.0);
  CHECK(report["macro"]["recall"].get<double>() == 1.0);
  CHECK(report["macro"]["f1"].get<double>() == 1.0);
  CHECK(report["accuracy"].get<double>() == 1.0);
  CHECK(report["labelset"].size() == 8);
}

TEST_CASE("dry-run prints the plan and writes nothing") {
  Workspace ws("dry");
  write_corpus(ws.dir / "corpus.tsv", {{"a", "text", "EG", "0.9"},
                                       {"b", "text2", "MA", "0.95"}});
  auto res = run_cli("--dry-run build-binary --corpus " + ws.path("corpus.tsv") +
                     " --adjacency " + data_dir() + "/adjacency.txt --dialect EG --out " +
                     ws.path("out"));
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("build-binary") != std::string::npos);
  CHECK_FALSE(fs::exists(ws.dir / "out"));
}

TEST_CASE("exit codes distinguish usage and data errors") {
  Workspace ws("codes");
  CHECK(run_cli("no-such-subcommand").exit_code == 1);
  CHECK(run_cli("evaluate --model x").exit_code == 1);  // missing required flags
  write_corpus(ws.dir / "corpus.tsv", {{"a", "text", "EG", "0.9"}});
  // corpus exists but the adjacency file does not -> data error
  auto res = run_cli("build-binary --corpus " + ws.path("corpus.tsv") + " --adjacency " +
                     ws.path("missing.txt") + " --dialect EG --out " + ws.path("out"));
  CHECK(res.exit_code == 2);
  // replay pseudo-labeling without fixtures -> usage error
  auto res2 = run_cli("pseudo-label --corpus " + ws.path("corpus.tsv") + " --source gpt --out " +
                      ws.path("x.tsv"));
  CHECK(res2.exit_code == 1);
}

TEST_CASE("config file values apply with flag precedence") {
  Workspace ws("config");
  write_corpus(ws.dir / "corpus.tsv", {{"p1", "aaaa x", "EG", "0.9"},
                                       {"p2", "aaaa y", "EG", "0.9"},
                                       {"n1", "zzzz x", "MA", "0.95"},
                                       {"n2", "zzzz y", "MA", "0.95"}});
  REQUIRE(run_cli("build-binary --corpus " + ws.path("corpus.tsv") + " --adjacency " + data_dir() +
                  "/adjacency.txt --dialect EG --out " + ws.path("ds"))
              .exit_code == 0);
  atomic_write(ws.dir / "cfg.ini", "[train-binary]\nepochs=2\ncadence=1\n");

  auto run_with = [&](const std::string& extra, const std::string& out) {
    return run_cli("--config " + ws.path("cfg.ini") + " train-binary --dataset " +
                   ws.path("ds/EG") + " --out " + ws.path(out) + " " + extra);
  };
  REQUIRE(run_with("", "m1").exit_code == 0);
  auto trace1 = load_trace(ws.dir / "m1" / "trace.jsonl");
  CHECK(trace1.epochs == 2);  // from the config file

  REQUIRE(run_with("--epochs 3", "m2").exit_code == 0);
  auto trace2 = load_trace(ws.dir / "m2" / "trace.jsonl");
  CHECK(trace2.epochs == 3);  // flag wins over config
}

TEST_CASE("the cartography chain runs: train-binary, cartography, flag, annotate-export") {
  Workspace ws("chain");
  std::vector<std::array<std::string, 4>> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({"p" + std::to_string(i), "aaaa pad" + std::to_string(i % 5), "EG", "0.9"});
    rows.push_back({"n" + std::to_string(i), "zzzz pad" + std::to_string(i % 5), "MA", "0.95"});
  }
  write_corpus(ws.dir / "corpus.tsv", rows);

  REQUIRE(run_cli("build-binary --corpus " + ws.path("corpus.tsv") + " --adjacency " + data_dir() +
                  "/adjacency.txt --dialect EG --mode cartography --out " + ws.path("ds"))
              .exit_code == 0);
  REQUIRE(run_cli("train-binary --dataset " + ws.path("ds/EG") +
                  " --cadence-fraction 0.34 --epochs 5 --buckets 4096 --out " + ws.path("model"))
              .exit_code == 0);
  REQUIRE(run_cli("cartography --trace " + ws.path("model/trace.jsonl") + " --out " +
                  ws.path("carto"))
              .exit_code == 0);
  REQUIRE(run_cli("flag --records " + ws.path("carto/records.tsv") + " --out " +
                  ws.path("carto/flagged.tsv"))
              .exit_code == 0);
  REQUIRE(run_cli("annotate-export --records " + ws.path("carto/records.tsv") + " --corpus " +
                  ws.path("corpus.tsv") + " --per-bin 5 --seed 3 --out " + ws.path("sheet.tsv"))
              .exit_code == 0);
  REQUIRE(run_cli("report --kind cartography --records " + ws.path("carto/records.tsv") +
                  " --out " + ws.path("figs"))
              .exit_code == 0);

  CHECK(fs::exists(ws.dir / "carto" / "records.tsv"));
  CHECK(fs::exists(ws.dir / "figs" / "cartography_positive.svg"));
  const auto sheet = read_file(ws.dir / "sheet.tsv");
  CHECK(sheet.find("polarity") != std::string::npos);
  const auto svg = read_file(ws.dir / "figs" / "cartography_negative.svg");
  CHECK(svg.find("<svg") != std::string::npos);
}
