// fgml: IR files -> program graphs -> labeled dataflow datasets -> trained
// message-passing models. Subcommands: build | dataset | train | eval |
// stats | export-dot.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "fgml/analysis.hpp"
#include "fgml/dataset.hpp"
#include "fgml/graph.hpp"
#include "fgml/ir.hpp"
#include "fgml/model.hpp"
#include "fgml/vocab.hpp"

namespace fs = std::filesystem;
using namespace fgml;

namespace {

constexpr const char* kVersion = "0.1.0";

int default_threads() {
  if (const char* env = std::getenv("FGML_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void json_escape(const std::string& s, std::string& out) {
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
}

// Every run echoes its full resolved configuration; timestamps live only
// here.
void write_run_json(const fs::path& out_dir, const std::string& command,
                    const std::map<std::string, std::string>& config) {
  fs::create_directories(out_dir);
  std::string j = "{\"tool\":\"fgml\",\"version\":\"";
  j += kVersion;
  j += "\",\"command\":\"" + command + "\",\"timestamp\":\"" +
       timestamp_utc() + "\",\"config\":{";
  bool first = true;
  for (const auto& [k, v] : config) {
    if (!first) j += ",";
    first = false;
    j += "\"" + k + "\":\"";
    json_escape(v, j);
    j += "\"";
  }
  j += "}}\n";
  std::ofstream f(out_dir / "run.json", std::ios::binary);
  f << j;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::recursive_directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".ll")
          files.push_back(entry.path().string());
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Order-preserving parallel map: results land in input slots.
template <class T, class F>
auto parallel_map(const std::vector<T>& items, int threads, F&& fn)
    -> std::vector<decltype(fn(items[0]))> {
  using R = decltype(fn(items[0]));
  std::vector<R> results(items.size());
  if (threads <= 1 || items.size() <= 1) {
    for (size_t i = 0; i < items.size(); ++i) results[i] = fn(items[i]);
    return results;
  }
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      results[i] = fn(items[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

// ---------------------------------------------------------------------------
// build

struct BuildOutcome {
  bool ok = false;
  std::string jsonl;
  std::string error;
  graph::GraphStats stats;
  double millis = 0;
};

int cmd_build(const std::vector<std::string>& inputs, const std::string& out,
              const std::string& format, int threads, uint64_t seed) {
  auto files = expand_inputs(inputs);
  if (files.empty()) {
    std::cerr << "fgml build: no input files\n";
    return 1;
  }
  fs::create_directories(out);

  auto outcomes = parallel_map(files, threads, [&](const std::string& path) {
    BuildOutcome r;
    auto t0 = std::chrono::steady_clock::now();
    try {
      ir::IRModule m = ir::parse_ir(read_file(path), path);
      graph::ProgramGraph g = graph::build_graph(m);
      r.stats = graph::stats(g);
      r.jsonl = graph::to_jsonl(g);
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    auto t1 = std::chrono::steady_clock::now();
    r.millis = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return r;
  });

  int ok = 0;
  int64_t total_v = 0, total_e = 0;
  std::vector<double> times;
  if (format == "dot") {
    for (size_t i = 0; i < files.size(); ++i) {
      if (!outcomes[i].ok) continue;
      graph::ProgramGraph g = graph::from_jsonl(outcomes[i].jsonl);
      fs::path dot =
          fs::path(out) / (fs::path(files[i]).stem().string() + ".dot");
      std::ofstream f(dot, std::ios::binary);
      f << graph::export_dot(g);
    }
  }
  std::ofstream gf(fs::path(out) / "graphs.jsonl", std::ios::binary);
  for (size_t i = 0; i < files.size(); ++i) {
    const auto& r = outcomes[i];
    if (!r.ok) {
      std::cerr << "skip " << files[i] << ": " << r.error << "\n";
      continue;
    }
    gf << r.jsonl << "\n";
    ++ok;
    total_v += r.stats.vertex_count;
    total_e += r.stats.edge_count;
    times.push_back(r.millis);
  }
  gf.close();

  double median_ms = 0;
  if (!times.empty()) {
    std::sort(times.begin(), times.end());
    median_ms = times[times.size() / 2];
  }
  std::ostringstream stats_json;
  stats_json << "{\"files\":" << files.size() << ",\"ok\":" << ok
             << ",\"failed\":" << files.size() - ok
             << ",\"mean_vertices\":" << (ok ? double(total_v) / ok : 0)
             << ",\"mean_edges\":" << (ok ? double(total_e) / ok : 0)
             << ",\"median_build_ms\":" << median_ms << "}\n";
  std::ofstream(fs::path(out) / "build_stats.json", std::ios::binary)
      << stats_json.str();

  std::cout << "built " << ok << "/" << files.size() << " graphs; mean |V| "
            << (ok ? double(total_v) / ok : 0) << ", mean |E| "
            << (ok ? double(total_e) / ok : 0) << ", median " << median_ms
            << " ms per IR\n";

  write_run_json(out, "build",
                 {{"out", out},
                  {"format", format},
                  {"threads", std::to_string(threads)},
                  {"seed", std::to_string(seed)},
                  {"inputs", std::to_string(files.size())}});
  return ok > 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// dataset

int cmd_dataset(const std::string& graphs_file, const std::string& out,
                const std::string& tasks_csv, uint64_t seed, int timesteps,
                const std::string& filter_splits) {
  auto graphs = graph::load_graphs_file(graphs_file);
  fs::create_directories(out);

  std::vector<dataset::ManifestEntry> entries;
  for (const auto& g : graphs)
    entries.push_back({g.source_path, g.num_vertices(),
                       static_cast<int64_t>(g.edges.size()),
                       dataset::Split::Train});
  dataset::CorpusManifest manifest = dataset::split_corpus(entries, seed);
  manifest.graphs_file = fs::absolute(graphs_file).string();
  std::map<std::string, dataset::Split> split_of;
  for (const auto& e : manifest.entries) split_of[e.path] = e.split;

  std::vector<analysis::AnalysisTask> tasks;
  std::stringstream ss(tasks_csv);
  std::string item;
  while (std::getline(ss, item, ',')) tasks.push_back(analysis::parse_task(item));

  dataset::GraphCorpus corpus(std::move(graphs));
  std::cout << "task             instances      kept  excluded  excl%  positive%\n";
  for (auto task : tasks) {
    std::vector<dataset::LabeledInstance> all;
    for (const auto& g : corpus.all()) {
      for (auto& inst : dataset::make_instances(g, task, seed)) {
        inst.split = split_of.at(inst.path);
        all.push_back(std::move(inst));
      }
    }
    auto filtered = dataset::filter_by_steps(std::move(all), timesteps);
    std::vector<dataset::LabeledInstance> kept;
    if (filter_splits == "test") {
      // the test-only exclusion variant: non-test instances stay
      kept = filtered.kept;
      for (auto& inst : filtered.excluded)
        if (inst.split != dataset::Split::Test) kept.push_back(inst);
      std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return std::tie(a.path, a.root) < std::tie(b.path, b.root);
      });
    } else {
      kept = filtered.kept;
    }
    double balance = kept.empty() ? 0.0 : dataset::class_balance(kept, corpus);
    size_t total = filtered.kept.size() + filtered.excluded.size();
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %9zu %9zu %9zu %6.2f %10.2f\n",
                  analysis::task_name(task), total, kept.size(),
                  filtered.excluded.size(),
                  100.0 * filtered.excluded_instance_ratio, 100.0 * balance);
    std::cout << line;
    dataset::save_instances(
        (fs::path(out) / ("instances_" +
                          std::string(analysis::task_name(task)) + ".jsonl"))
            .string(),
        kept);
  }
  dataset::save_manifest((fs::path(out) / "manifest.json").string(), manifest);

  write_run_json(out, "dataset",
                 {{"graphs", graphs_file},
                  {"out", out},
                  {"tasks", tasks_csv},
                  {"seed", std::to_string(seed)},
                  {"timesteps", std::to_string(timesteps)},
                  {"filter_splits", filter_splits}});
  return 0;
}

// ---------------------------------------------------------------------------
// train / eval

struct LoadedData {
  std::vector<graph::ProgramGraph> graphs;
  std::map<std::string, size_t> graph_index;
  std::vector<std::vector<int32_t>> tokens;
  std::vector<dataset::LabeledInstance> instances;
};

LoadedData load_data(const std::string& data_dir, analysis::AnalysisTask task,
                     const vocab::Vocabulary& vocab) {
  LoadedData d;
  auto manifest =
      dataset::load_manifest((fs::path(data_dir) / "manifest.json").string());
  d.graphs = graph::load_graphs_file(manifest.graphs_file);
  d.tokens.resize(d.graphs.size());
  for (size_t i = 0; i < d.graphs.size(); ++i) {
    d.graph_index[d.graphs[i].source_path] = i;
    for (const auto& v : d.graphs[i].vertices)
      d.tokens[i].push_back(vocab::encode_vertex(v, vocab));
  }
  d.instances = dataset::load_instances(
      (fs::path(data_dir) /
       ("instances_" + std::string(analysis::task_name(task)) + ".jsonl"))
          .string());
  return d;
}

std::vector<model::Example> select_examples(const LoadedData& d,
                                            dataset::Split split) {
  std::vector<model::Example> out;
  for (const auto& inst : d.instances) {
    if (inst.split != split) continue;
    size_t gi = d.graph_index.at(inst.path);
    out.push_back({&d.graphs[gi], &d.tokens[gi], &inst});
  }
  return out;
}

vocab::Vocabulary train_split_vocab(const std::string& data_dir, int min_count) {
  auto manifest =
      dataset::load_manifest((fs::path(data_dir) / "manifest.json").string());
  auto graphs = graph::load_graphs_file(manifest.graphs_file);
  std::set<std::string> train_paths;
  for (const auto& e : manifest.entries)
    if (e.split == dataset::Split::Train) train_paths.insert(e.path);
  std::vector<graph::ProgramGraph> train_graphs;
  for (auto& g : graphs)
    if (train_paths.count(g.source_path)) train_graphs.push_back(std::move(g));
  return vocab::build_vocab(train_graphs, min_count);
}

void print_metrics(const model::Metrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "precision %.3f  recall %.3f  F1 %.3f%s\n"
                "            P-        P+\n"
                "  T-   %6.2f%%   %6.2f%%\n"
                "  T+   %6.2f%%   %6.2f%%\n",
                m.precision, m.recall, m.f1,
                m.zero_division ? "  (zero-division)" : "",
                100.0 * m.ratio_tn(), 100.0 * m.ratio_fp(),
                100.0 * m.ratio_fn(), 100.0 * m.ratio_tp());
  std::cout << buf;
}

int cmd_train(const std::string& data_dir, const std::string& task_name,
              const std::string& out, model::ModelConfig config,
              int min_count) {
  auto task = analysis::parse_task(task_name);
  fs::create_directories(out);

  vocab::Vocabulary vocab = train_split_vocab(data_dir, min_count);
  LoadedData d = load_data(data_dir, task, vocab);
  auto train_examples = select_examples(d, dataset::Split::Train);
  auto val_examples = select_examples(d, dataset::Split::Val);
  std::cout << "train " << train_examples.size() << " instances, val "
            << val_examples.size() << ", vocabulary " << vocab.size() << "\n";

  vocab::save_vocabulary((fs::path(out) / "vocab.tsv").string(), vocab);
  std::string ckpt = (fs::path(out) / "checkpoint.json").string();
  std::string log_csv = (fs::path(out) / "train_log.csv").string();

  write_run_json(out, "train",
                 {{"data", data_dir},
                  {"task", task_name},
                  {"out", out},
                  {"embed_dim", std::to_string(config.embed_dim)},
                  {"timesteps", std::to_string(config.timesteps)},
                  {"learning_rate", std::to_string(config.learning_rate)},
                  {"batch_vertices", std::to_string(config.batch_vertices)},
                  {"checkpoint_every",
                   std::to_string(config.checkpoint_every_graphs)},
                  {"max_graphs", std::to_string(config.max_train_graphs)},
                  {"seed", std::to_string(config.seed)},
                  {"min_count", std::to_string(min_count)}});

  try {
    auto progress = [](const model::TrainLogRow& row) {
      std::cout << "checkpoint " << row.checkpoint << ": " << row.graphs_seen
                << " graphs, loss " << row.loss << ", val P " << row.val.precision
                << " R " << row.val.recall << " F1 " << row.val.f1 << std::endl;
    };
    auto result = model::train(train_examples, val_examples, vocab.size(),
                               config, progress);
    model::save_checkpoint(ckpt, result.best_params, config);
    model::write_train_log_csv(log_csv, result.log);
    std::cout << "finished after " << result.graphs_seen
              << " training graphs; best checkpoint " << result.best_checkpoint
              << "\n";
    for (const auto& row : result.log)
      if (row.checkpoint == result.best_checkpoint) print_metrics(row.val);
  } catch (const NonFiniteLoss& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cmd_eval(const std::string& model_dir, const std::string& data_dir,
             const std::string& task_name, const std::string& split_name,
             const std::string& out) {
  auto task = analysis::parse_task(task_name);
  auto [params, config] = model::load_checkpoint(
      (fs::path(model_dir) / "checkpoint.json").string());
  vocab::Vocabulary vocab =
      vocab::load_vocabulary((fs::path(model_dir) / "vocab.tsv").string());

  LoadedData d = load_data(data_dir, task, vocab);
  auto examples = select_examples(d, dataset::parse_split(split_name));
  model::Metrics m = model::evaluate(examples, params, config);
  std::cout << task_name << " on " << split_name << " (" << examples.size()
            << " instances, " << m.total() << " vertices)\n";
  print_metrics(m);

  fs::path out_dir = out.empty() ? fs::path(model_dir) : fs::path(out);
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
  csv << "task,split,precision,recall,f1,tn,fp,fn,tp\n";
  char buf[200];
  std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%lld,%lld,%lld,%lld\n",
                task_name.c_str(), split_name.c_str(), m.precision, m.recall,
                m.f1, (long long)m.tn, (long long)m.fp, (long long)m.fn,
                (long long)m.tp);
  csv << buf;

  write_run_json(out_dir, "eval",
                 {{"model", model_dir},
                  {"data", data_dir},
                  {"task", task_name},
                  {"split", split_name}});
  return 0;
}

int cmd_stats(const std::string& graphs_file) {
  auto graphs = graph::load_graphs_file(graphs_file);
  int64_t v = 0, e = 0;
  int32_t max_pos = 0;
  int64_t kinds[4] = {0, 0, 0, 0};
  int64_t flows[3] = {0, 0, 0};
  for (const auto& g : graphs) {
    auto s = graph::stats(g);
    v += s.vertex_count;
    e += s.edge_count;
    max_pos = std::max(max_pos, s.max_position);
    for (int k = 0; k < 4; ++k) kinds[k] += s.kind_counts[k];
    for (int k = 0; k < 3; ++k) flows[k] += s.flow_counts[k];
  }
  size_t n = graphs.size();
  std::cout << "graphs: " << n << "\n";
  if (n) {
    std::cout << "vertices: " << v << " (mean " << double(v) / n << ")\n"
              << "edges: " << e << " (mean " << double(e) / n << ")\n"
              << "max edge position: " << max_pos << "\n"
              << "kinds: instruction " << kinds[0] << ", variable " << kinds[1]
              << ", constant " << kinds[2] << ", external " << kinds[3] << "\n"
              << "flows: control " << flows[0] << ", data " << flows[1]
              << ", call " << flows[2] << "\n";
  }
  return n ? 0 : 1;
}

int cmd_export_dot(const std::string& input, const std::string& out) {
  ir::IRModule m = ir::parse_ir(read_file(input), input);
  graph::ProgramGraph g = graph::build_graph(m);
  std::string dot = graph::export_dot(g);
  if (out.empty()) {
    std::cout << dot;
  } else {
    std::ofstream f(out, std::ios::binary);
    f << dot;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IR program graphs, dataflow datasets, and graph models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  uint64_t seed = 0;
  int threads = default_threads();

  auto* build = app.add_subcommand("build", "construct graphs from IR files");
  std::vector<std::string> build_inputs;
  std::string build_out = "graphs";
  std::string build_format = "jsonl";
  build->add_option("paths", build_inputs, "IR files or directories")
      ->required();
  build->add_option("--out,-o", build_out, "output directory");
  build->add_option("--format", build_format, "jsonl or dot")
      ->check(CLI::IsMember({"jsonl", "dot"}));
  build->add_option("--threads", threads, "worker threads");
  build->add_option("--seed", seed, "run seed (recorded)");

  auto* ds = app.add_subcommand("dataset", "sample labeled analysis instances");
  std::string ds_graphs, ds_out = "data";
  std::string ds_tasks = "reachability,domtree,datadep,liveness,subexpressions";
  int ds_T = 30;
  std::string ds_filter = "all";
  ds->add_option("--graphs", ds_graphs, "graphs.jsonl from build")->required();
  ds->add_option("--out,-o", ds_out, "output directory");
  ds->add_option("--tasks", ds_tasks, "comma list of analyses");
  ds->add_option("--seed", seed, "sampling and split seed");
  ds->add_option("--timesteps,-T", ds_T, "step budget for the T-filter");
  ds->add_option("--filter-splits", ds_filter,
                 "apply the T-filter to 'all' splits or only 'test'")
      ->check(CLI::IsMember({"all", "test"}));

  auto* tr = app.add_subcommand("train", "train a model for one analysis");
  std::string tr_data, tr_task, tr_out = "model";
  model::ModelConfig cfg;
  int tr_min_count = 1;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--task", tr_task, "analysis task")->required();
  tr->add_option("--out,-o", tr_out, "output directory");
  tr->add_option("--embed-dim", cfg.embed_dim, "embedding width");
  tr->add_option("--timesteps,-T", cfg.timesteps, "message passing steps");
  tr->add_option("--lr", cfg.learning_rate, "Adam learning rate");
  tr->add_option("--batch-vertices", cfg.batch_vertices,
                 "max vertices per batch");
  tr->add_option("--checkpoint-every", cfg.checkpoint_every_graphs,
                 "graphs between validations");
  tr->add_option("--max-graphs", cfg.max_train_graphs, "training graph budget");
  tr->add_option("--val-cap", cfg.val_cap, "validation instances per check");
  tr->add_option("--time-limit", cfg.time_limit_seconds,
                 "wall-clock cap in seconds (0 = off)");
  tr->add_option("--seed", cfg.seed, "initialization and shuffle seed");
  tr->add_option("--min-count", tr_min_count, "vocabulary frequency floor");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string ev_model, ev_data, ev_task, ev_split = "test", ev_out;
  ev->add_option("--model", ev_model, "model directory")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--task", ev_task, "analysis task")->required();
  ev->add_option("--split", ev_split, "train, val, or test");
  ev->add_option("--out,-o", ev_out, "metrics output directory");

  auto* st = app.add_subcommand("stats", "summarize a graph corpus");
  std::string st_graphs;
  st->add_option("--graphs", st_graphs, "graphs.jsonl")->required();

  auto* xd = app.add_subcommand("export-dot", "emit a DOT rendering of one IR");
  std::string xd_input, xd_out;
  xd->add_option("input", xd_input, "IR file")->required();
  xd->add_option("--out,-o", xd_out, "output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed())
      return cmd_build(build_inputs, build_out, build_format, threads, seed);
    if (ds->parsed())
      return cmd_dataset(ds_graphs, ds_out, ds_tasks, seed, ds_T, ds_filter);
    if (tr->parsed())
      return cmd_train(tr_data, tr_task, tr_out, cfg, tr_min_count);
    if (ev->parsed())
      return cmd_eval(ev_model, ev_data, ev_task, ev_split, ev_out);
    if (st->parsed()) return cmd_stats(st_graphs);
    if (xd->parsed()) return cmd_export_dot(xd_input, xd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
