#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "fgml/dataset.hpp"

namespace fgml::dataset {

using analysis::AnalysisTask;

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw std::runtime_error("unknown split: " + name);
}

int root_count(int64_t num_vertices) {
  int64_t n = (num_vertices + 9) / 10;
  return static_cast<int>(std::min<int64_t>(n, 10));
}

std::vector<LabeledInstance> make_instances(const graph::ProgramGraph& g,
                                            AnalysisTask task, uint64_t seed) {
  uint64_t hash = graph::graph_hash(g);
  Rng rng(mix64(mix64(seed, hash), static_cast<uint64_t>(task)));

  std::vector<int32_t> roots = analysis::eligible_roots(g, task);
  size_t k = std::min<size_t>(root_count(g.num_vertices()), roots.size());
  // partial Fisher-Yates: the first k entries are a uniform sample
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + rng.below(roots.size() - i);
    std::swap(roots[i], roots[j]);
  }
  roots.resize(k);
  std::sort(roots.begin(), roots.end());

  std::vector<LabeledInstance> out;
  out.reserve(k);
  for (int32_t root : roots) {
    analysis::AnalysisResult res = analysis::run_analysis(g, task, root);
    LabeledInstance inst;
    inst.path = g.source_path;
    inst.graph_hash = hash;
    inst.task = task;
    inst.root = root;
    inst.label_ids = res.labels.ones();
    inst.steps = res.steps;
    out.push_back(std::move(inst));
  }
  return out;
}

CorpusManifest split_corpus(std::vector<ManifestEntry> entries, uint64_t seed) {
  if (entries.size() < 5)
    throw CorpusTooSmall("need at least 5 corpus files, have " +
                         std::to_string(entries.size()));
  CorpusManifest m;
  m.seed = seed;
  std::vector<size_t> perm(entries.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(mix64(seed, 0x5f5e1u));
  rng.shuffle(perm);

  size_t n = entries.size();
  size_t val = n / 5;
  size_t test = n / 5;
  size_t train = n - val - test;  // remainder goes to train
  for (size_t i = 0; i < n; ++i) {
    Split s = i < train            ? Split::Train
              : i < train + val    ? Split::Val
                                   : Split::Test;
    entries[perm[i]].split = s;
  }
  m.entries = std::move(entries);
  return m;
}

FilterOutcome filter_by_steps(std::vector<LabeledInstance> instances, int T) {
  FilterOutcome out;
  std::set<std::string> touched_graphs;
  std::set<std::string> all_graphs;
  for (auto& inst : instances) {
    all_graphs.insert(inst.path);
    if (inst.steps > T) {
      touched_graphs.insert(inst.path);
      out.excluded.push_back(std::move(inst));
    } else {
      out.kept.push_back(std::move(inst));
    }
  }
  size_t total = out.kept.size() + out.excluded.size();
  if (total > 0)
    out.excluded_instance_ratio =
        static_cast<double>(out.excluded.size()) / static_cast<double>(total);
  if (!all_graphs.empty())
    out.excluded_graph_ratio = static_cast<double>(touched_graphs.size()) /
                               static_cast<double>(all_graphs.size());
  return out;
}

GraphCorpus::GraphCorpus(std::vector<graph::ProgramGraph> graphs)
    : graphs_(std::move(graphs)) {
  for (size_t i = 0; i < graphs_.size(); ++i) index_[graphs_[i].source_path] = i;
}

const graph::ProgramGraph& GraphCorpus::by_path(const std::string& path) const {
  auto it = index_.find(path);
  if (it == index_.end()) throw std::runtime_error("graph not loaded: " + path);
  return graphs_[it->second];
}

double class_balance(const std::vector<LabeledInstance>& instances,
                     const GraphCorpus& corpus) {
  if (instances.empty())
    throw std::runtime_error("class_balance of empty instance list");
  int64_t positive = 0;
  int64_t eligible = 0;
  for (const auto& inst : instances) {
    const auto& g = corpus.by_path(inst.path);
    graph::VertexKind kind = analysis::task_label_kind(inst.task);
    for (const auto& v : g.vertices)
      if (v.kind == kind) ++eligible;
    positive += static_cast<int64_t>(inst.label_ids.size());
  }
  return eligible ? static_cast<double>(positive) / static_cast<double>(eligible)
                  : 0.0;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void json_escape(const std::string& s, std::string& out) {
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
}

}  // namespace

std::string instance_to_jsonl(const LabeledInstance& inst) {
  std::string out = "{\"path\":\"";
  json_escape(inst.path, out);
  out += "\",\"task\":\"";
  out += analysis::task_name(inst.task);
  out += "\",\"root\":";
  out += std::to_string(inst.root);
  out += ",\"selector_root\":";
  out += std::to_string(inst.root);
  out += ",\"labels\":[";
  for (size_t i = 0; i < inst.label_ids.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(inst.label_ids[i]);
  }
  out += "],\"steps\":";
  out += std::to_string(inst.steps);
  out += ",\"split\":\"";
  out += split_name(inst.split);
  out += "\"}";
  return out;
}

LabeledInstance instance_from_jsonl(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  LabeledInstance inst;
  inst.path = j.at("path").get<std::string>();
  inst.task = analysis::parse_task(j.at("task").get<std::string>());
  inst.root = j.at("root").get<int32_t>();
  if (j.at("selector_root").get<int32_t>() != inst.root)
    throw std::runtime_error("instance selector_root differs from root");
  for (const auto& id : j.at("labels"))
    inst.label_ids.push_back(id.get<int32_t>());
  inst.steps = j.at("steps").get<int>();
  inst.split = parse_split(j.at("split").get<std::string>());
  return inst;
}

void save_instances(const std::string& path,
                    const std::vector<LabeledInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& inst : instances) out << instance_to_jsonl(inst) << "\n";
}

std::vector<LabeledInstance> load_instances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<LabeledInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(instance_from_jsonl(line));
  }
  return out;
}

void save_manifest(const std::string& path, const CorpusManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "{\"seed\":" << manifest.seed << ",\"ratios\":[3,1,1]";
  out << ",\"graphs_file\":\"";
  std::string esc;
  json_escape(manifest.graphs_file, esc);
  out << esc << "\",\"entries\":[";
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (i) out << ",";
    std::string p;
    json_escape(e.path, p);
    out << "{\"path\":\"" << p << "\",\"vertices\":" << e.vertices
        << ",\"edges\":" << e.edges << ",\"split\":\"" << split_name(e.split)
        << "\"}";
  }
  out << "]}\n";
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  CorpusManifest m;
  m.seed = j.at("seed").get<uint64_t>();
  m.graphs_file = j.value("graphs_file", "");
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.path = je.at("path").get<std::string>();
    e.vertices = je.at("vertices").get<int64_t>();
    e.edges = je.at("edges").get<int64_t>();
    e.split = parse_split(je.at("split").get<std::string>());
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace fgml::dataset
