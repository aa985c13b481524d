#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fgml/dataset.hpp"
#include "fgml/graph.hpp"
#include "fgml/model.hpp"
#include "fgml/vocab.hpp"
#include "support/gen.hpp"

namespace fs = std::filesystem;
using namespace fgml;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args) {
  std::string cmd = std::string(FGML_BIN) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

struct Workspace {
  fs::path root;

  Workspace() {
    root = fs::temp_directory_path() / "fgml_cli_test";
    fs::remove_all(root);
    fs::create_directories(root / "corpus");
    Rng rng(2468);
    testgen::GenOptions opt;
    opt.instr_budget_min = 4;
    opt.instr_budget_max = 12;
    for (int i = 0; i < 8; ++i) {
      std::ofstream f(root / "corpus" / ("m" + std::to_string(i) + ".ll"));
      f << testgen::random_module_text(rng, opt);
    }
  }
};

}  // namespace

TEST_CASE("end-to-end pipeline: build, dataset, train, eval") {
  Workspace ws;
  const std::string corpus = (ws.root / "corpus").string();
  const std::string gdir = (ws.root / "graphs").string();
  const std::string ddir = (ws.root / "data").string();
  const std::string mdir = (ws.root / "model").string();

  REQUIRE(run("build " + corpus + " --out " + gdir) == 0);
  REQUIRE(fs::exists(gdir + "/graphs.jsonl"));
  REQUIRE(fs::exists(gdir + "/run.json"));

  // idempotence: identical inputs give byte-identical graph files
  std::string first = slurp(gdir + "/graphs.jsonl");
  REQUIRE(run("build " + corpus + " --out " + gdir) == 0);
  CHECK(slurp(gdir + "/graphs.jsonl") == first);

  REQUIRE(run("dataset --graphs " + gdir + "/graphs.jsonl --out " + ddir +
              " --seed 5 --timesteps 30") == 0);
  REQUIRE(fs::exists(ddir + "/manifest.json"));
  REQUIRE(fs::exists(ddir + "/instances_reachability.jsonl"));
  std::string instances = slurp(ddir + "/instances_reachability.jsonl");
  REQUIRE(run("dataset --graphs " + gdir + "/graphs.jsonl --out " + ddir +
              " --seed 5 --timesteps 30") == 0);
  CHECK(slurp(ddir + "/instances_reachability.jsonl") == instances);

  // seed change: same labels per (path, root), possibly different splits
  const std::string ddir2 = (ws.root / "data2").string();
  REQUIRE(run("dataset --graphs " + gdir + "/graphs.jsonl --out " + ddir2 +
              " --seed 6 --timesteps 30") == 0);
  auto one = dataset::load_instances(ddir + "/instances_reachability.jsonl");
  auto two = dataset::load_instances(ddir2 + "/instances_reachability.jsonl");
  std::map<std::pair<std::string, int32_t>, std::vector<int32_t>> labels_of;
  for (const auto& inst : one) labels_of[{inst.path, inst.root}] = inst.label_ids;
  for (const auto& inst : two) {
    auto it = labels_of.find({inst.path, inst.root});
    if (it != labels_of.end()) REQUIRE(it->second == inst.label_ids);
  }

  // instance labels replay the analysis directly
  auto graphs = graph::load_graphs_file(gdir + "/graphs.jsonl");
  dataset::GraphCorpus corpus_graphs(std::move(graphs));
  for (const auto& inst : one) {
    const auto& g = corpus_graphs.by_path(inst.path);
    auto res = analysis::run_analysis(g, inst.task, inst.root);
    REQUIRE(res.labels.ones() == inst.label_ids);
    REQUIRE(res.steps == inst.steps);
  }

  REQUIRE(run("train --data " + ddir + " --task reachability --out " + mdir +
              " --embed-dim 8 -T 4 --batch-vertices 400 --checkpoint-every 40"
              " --max-graphs 240 --seed 3") == 0);
  REQUIRE(fs::exists(mdir + "/checkpoint.json"));
  REQUIRE(fs::exists(mdir + "/vocab.tsv"));
  std::string log = slurp(mdir + "/train_log.csv");
  CHECK(log.rfind("checkpoint,graphs_seen,loss,val_precision,val_recall,val_f1",
                  0) == 0);

  REQUIRE(run("eval --model " + mdir + " --data " + ddir +
              " --task reachability --split test --out " + mdir) == 0);
  std::string metrics = slurp(mdir + "/metrics.csv");
  CHECK(metrics.find("reachability,test,") != std::string::npos);

  // the CLI metrics equal model::evaluate run in-process
  auto [params, config] = model::load_checkpoint(mdir + "/checkpoint.json");
  auto vocab = vocab::load_vocabulary(mdir + "/vocab.tsv");
  std::vector<std::vector<int32_t>> tokens;
  for (const auto& g : corpus_graphs.all()) {
    std::vector<int32_t> t;
    for (const auto& v : g.vertices) t.push_back(vocab::encode_vertex(v, vocab));
    tokens.push_back(std::move(t));
  }
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < corpus_graphs.all().size(); ++i)
    index[corpus_graphs.all()[i].source_path] = i;
  std::vector<model::Example> test_examples;
  for (const auto& inst : one) {
    if (inst.split != dataset::Split::Test) continue;
    size_t gi = index.at(inst.path);
    test_examples.push_back({&corpus_graphs.all()[gi], &tokens[gi], &inst});
  }
  model::Metrics m = model::evaluate(test_examples, params, config);
  char want[64];
  std::snprintf(want, sizeof want, ",%.6f,%.6f,%.6f,", m.precision, m.recall,
                m.f1);
  CHECK(metrics.find(want) != std::string::npos);

  fs::remove_all(ws.root);
}

TEST_CASE("build: one bad file is non-fatal, all-bad exits 1") {
  Workspace ws;
  std::ofstream(ws.root / "corpus" / "broken.ll") << "define !!! nonsense";
  const std::string gdir = (ws.root / "graphs").string();
  REQUIRE(run("build " + (ws.root / "corpus").string() + " --out " + gdir) == 0);
  auto graphs = graph::load_graphs_file(gdir + "/graphs.jsonl");
  CHECK(graphs.size() == 8);  // 9 files, 1 skipped

  fs::path bad_dir = ws.root / "allbad";
  fs::create_directories(bad_dir);
  std::ofstream(bad_dir / "x.ll") << "garbage(((";
  CHECK(run("build " + bad_dir.string() + " --out " +
            (ws.root / "g2").string()) == 1);
  fs::remove_all(ws.root);
}

TEST_CASE("dataset: corpus below five files exits nonzero") {
  Workspace ws;
  fs::path small = ws.root / "small";
  fs::create_directories(small);
  Rng rng(1);
  for (int i = 0; i < 3; ++i)
    std::ofstream(small / ("s" + std::to_string(i) + ".ll"))
        << testgen::random_module_text(rng);
  const std::string gdir = (ws.root / "gs").string();
  REQUIRE(run("build " + small.string() + " --out " + gdir) == 0);
  CHECK(run("dataset --graphs " + gdir + "/graphs.jsonl --out " +
            (ws.root / "ds").string() + " --seed 1") == 1);
  fs::remove_all(ws.root);
}

TEST_CASE("export-dot writes a digraph") {
  Workspace ws;
  fs::path out = ws.root / "g.dot";
  REQUIRE(run("export-dot " + (ws.root / "corpus" / "m0.ll").string() +
              " --out " + out.string()) == 0);
  CHECK(slurp(out).rfind("digraph", 0) == 0);
  fs::remove_all(ws.root);
}
