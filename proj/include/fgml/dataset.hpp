#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fgml/analysis.hpp"
#include "fgml/common.hpp"
#include "fgml/graph.hpp"

namespace fgml::dataset {

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct LabeledInstance {
  std::string path;  // source graph path
  uint64_t graph_hash = 0;
  analysis::AnalysisTask task = analysis::AnalysisTask::Reachability;
  int32_t root = 0;  // the single 1 of the vertex selector
  std::vector<int32_t> label_ids;  // vertices labeled 1, ascending
  int steps = 0;
  Split split = Split::Train;

  BitVec labels_bitvec(size_t num_vertices) const {
    BitVec bv(num_vertices);
    for (int32_t id : label_ids) bv.set(id);
    return bv;
  }
};

struct ManifestEntry {
  std::string path;
  int64_t vertices = 0;
  int64_t edges = 0;
  Split split = Split::Train;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  uint64_t seed = 0;
  std::string graphs_file;  // path of the serialized graph corpus
};

// n = min(ceil(|V| / 10), 10)
int root_count(int64_t num_vertices);

// Samples distinct roots without replacement; deterministic in
// (seed, graph content, task). Empty when the task has no eligible roots.
std::vector<LabeledInstance> make_instances(const graph::ProgramGraph& g,
                                            analysis::AnalysisTask task,
                                            uint64_t seed);

// Random 3:1:1 file-level split; remainder goes to train. Throws
// CorpusTooSmall below 5 entries.
CorpusManifest split_corpus(std::vector<ManifestEntry> entries, uint64_t seed);

struct FilterOutcome {
  std::vector<LabeledInstance> kept;
  std::vector<LabeledInstance> excluded;
  double excluded_instance_ratio = 0.0;
  double excluded_graph_ratio = 0.0;  // graphs losing at least one instance
};

FilterOutcome filter_by_steps(std::vector<LabeledInstance> instances, int T);

// Positive labels over all eligible-vertex labels. Needs the graphs to count
// eligible vertices per instance.
class GraphCorpus {
 public:
  explicit GraphCorpus(std::vector<graph::ProgramGraph> graphs);

  const graph::ProgramGraph& by_path(const std::string& path) const;
  const std::vector<graph::ProgramGraph>& all() const { return graphs_; }

 private:
  std::vector<graph::ProgramGraph> graphs_;
  std::unordered_map<std::string, size_t> index_;
};

double class_balance(const std::vector<LabeledInstance>& instances,
                     const GraphCorpus& corpus);

// JSON-Lines instance records and the corpus manifest.
std::string instance_to_jsonl(const LabeledInstance& inst);
LabeledInstance instance_from_jsonl(const std::string& line);
void save_instances(const std::string& path,
                    const std::vector<LabeledInstance>& instances);
std::vector<LabeledInstance> load_instances(const std::string& path);

void save_manifest(const std::string& path, const CorpusManifest& manifest);
CorpusManifest load_manifest(const std::string& path);

}  // namespace fgml::dataset
