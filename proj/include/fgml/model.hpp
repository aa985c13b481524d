#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "fgml/common.hpp"
#include "fgml/dataset.hpp"
#include "fgml/graph.hpp"
#include "fgml/tensor.hpp"
#include "fgml/vocab.hpp"

namespace fgml::model {

struct ModelConfig {
  int embed_dim = 32;  // d
  int selector_dim = 2;
  int timesteps = 30;  // T
  double learning_rate = 1e-3;
  int batch_vertices = 2000;
  int64_t checkpoint_every_graphs = 10000;
  int64_t max_train_graphs = 1000000;
  int64_t val_cap = 20000;
  uint64_t seed = 0;
  double time_limit_seconds = 0;  // 0 = no wall-clock cap
  double selector_scale = 50.0;

  int hidden() const { return embed_dim + selector_dim; }
  void check() const;  // embed_dim >= 4 and even; timesteps >= 1
};

struct ModelParameters {
  int vocab_size = 0;
  int embed_dim = 0;
  int hidden_dim = 0;

  Mat embed;  // vocab_size × embed_dim

  // message matrices: [flow * 2 + direction], direction 0 = along the stored
  // edge, 1 = its backward sibling
  std::array<Mat, 6> msg;

  Mat gru_wz, gru_uz, gru_wr, gru_ur, gru_wc, gru_uc;  // hidden × hidden
  Vec gru_bz, gru_br, gru_bc;                          // hidden

  Mat i_w1;  // hidden × 2*hidden  (input: h_T ++ h_0)
  Vec i_b1;
  Mat i_w2;  // 2 × hidden
  Vec i_b2;
  Mat j_w1;  // hidden × hidden
  Vec j_b1;
  Mat j_w2;  // 2 × hidden
  Vec j_b2;

  static ModelParameters init(int vocab_size, const ModelConfig& config,
                              Rng& rng);
  static ModelParameters zeros_like(const ModelParameters& other);

  struct TensorRef {
    const char* name;
    Vec* data;
  };
  std::vector<TensorRef> tensors();  // fixed enumeration order
};

// pos[2i] = sin(p / 10000^(2i/dim)), pos[2i+1] = cos(p / 10000^(2i/dim))
Vec position_encoding(int position, int dim);

struct GraphInput {
  const graph::ProgramGraph* g = nullptr;
  const std::vector<int32_t>* tokens = nullptr;  // per-vertex vocabulary ids
};

// T message-passing steps; returns the final states, one row per vertex.
// `root` is the selector vertex (-1 for none).
Mat propagate(const GraphInput& in, int32_t root, const ModelParameters& params,
              const ModelConfig& config);

// Initial states (embedding ++ scaled selector one-hot), one row per vertex.
Mat initial_states(const GraphInput& in, int32_t root,
                   const ModelParameters& params, const ModelConfig& config);

std::array<double, 2> readout_vertex(const double* h_t, const double* h_0,
                                     const ModelParameters& params);

std::array<double, 2> readout_graph(const Mat& h_t, const Mat& h_0,
                                    const ModelParameters& params);

struct Example {
  const graph::ProgramGraph* g = nullptr;
  const std::vector<int32_t>* tokens = nullptr;
  const dataset::LabeledInstance* inst = nullptr;
};

// Mean cross-entropy over the eligible vertices of the batch; accumulates
// parameter gradients into `grads` (same shapes as `params`).
double loss_and_grads(const std::vector<Example>& batch,
                      const ModelParameters& params, const ModelConfig& config,
                      ModelParameters& grads);

struct Metrics {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  bool zero_division = false;

  int64_t total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() ? static_cast<double>(tp + tn) / total() : 0.0;
  }
  // confusion cells as ratios of all eligible predictions
  double ratio_tn() const { return total() ? (double)tn / total() : 0.0; }
  double ratio_fp() const { return total() ? (double)fp / total() : 0.0; }
  double ratio_fn() const { return total() ? (double)fn / total() : 0.0; }
  double ratio_tp() const { return total() ? (double)tp / total() : 0.0; }
};

Metrics evaluate(const std::vector<Example>& examples,
                 const ModelParameters& params, const ModelConfig& config);

struct TrainLogRow {
  int checkpoint = 0;
  int64_t graphs_seen = 0;
  double loss = 0;
  Metrics val;
};

struct TrainResult {
  ModelParameters best_params;
  std::vector<TrainLogRow> log;
  int best_checkpoint = 0;
  int64_t graphs_seen = 0;
};

// Adam with shuffled vertex-packed batches; validates every
// checkpoint_every_graphs and returns the checkpoint with the best
// validation F1. Throws NonFiniteLoss (checkpoint context in the message).
// `on_checkpoint` fires after each validation row.
using CheckpointHook = std::function<void(const TrainLogRow&)>;
TrainResult train(const std::vector<Example>& train_examples,
                  const std::vector<Example>& val_examples, int vocab_size,
                  const ModelConfig& config,
                  const CheckpointHook& on_checkpoint = {});

void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const ModelConfig& config);
std::pair<ModelParameters, ModelConfig> load_checkpoint(const std::string& path);

void write_train_log_csv(const std::string& path,
                         const std::vector<TrainLogRow>& log);

}  // namespace fgml::model
