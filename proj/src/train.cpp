#include <chrono>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "fgml/model.hpp"

namespace fgml::model {

namespace {

struct Adam {
  ModelParameters m, v;
  int64_t t = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(const ModelParameters& params)
      : m(ModelParameters::zeros_like(params)),
        v(ModelParameters::zeros_like(params)) {}

  void step(ModelParameters& params, ModelParameters& grads, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    auto pr = params.tensors();
    auto gr = grads.tensors();
    auto mr = m.tensors();
    auto vr = v.tensors();
    for (size_t i = 0; i < pr.size(); ++i) {
      Vec& p = *pr[i].data;
      Vec& g = *gr[i].data;
      Vec& mm = *mr[i].data;
      Vec& vv = *vr[i].data;
      for (size_t k = 0; k < p.size(); ++k) {
        mm[k] = kBeta1 * mm[k] + (1.0 - kBeta1) * g[k];
        vv[k] = kBeta2 * vv[k] + (1.0 - kBeta2) * g[k] * g[k];
        double mhat = mm[k] / bc1;
        double vhat = vv[k] / bc2;
        p[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
      }
    }
  }
};

void zero(ModelParameters& grads) {
  for (auto ref : grads.tensors())
    std::fill(ref.data->begin(), ref.data->end(), 0.0);
}

}  // namespace

TrainResult train(const std::vector<Example>& train_examples,
                  const std::vector<Example>& val_examples, int vocab_size,
                  const ModelConfig& config,
                  const CheckpointHook& on_checkpoint) {
  config.check();
  if (train_examples.empty())
    throw std::runtime_error("training requires a non-empty train split");

  Rng rng(mix64(config.seed, 0x7261696eull));
  ModelParameters params = ModelParameters::init(vocab_size, config, rng);
  ModelParameters grads = ModelParameters::zeros_like(params);
  Adam adam(params);

  std::vector<Example> val_subset(
      val_examples.begin(),
      val_examples.begin() +
          std::min<int64_t>(static_cast<int64_t>(val_examples.size()),
                            config.val_cap));

  TrainResult result;
  result.best_params = params;
  double best_f1 = -1.0;
  int checkpoint = 0;
  int64_t graphs_seen = 0;
  int64_t next_checkpoint = config.checkpoint_every_graphs;
  double loss_sum = 0.0;
  int64_t loss_batches = 0;
  bool stop = false;

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  std::vector<size_t> order(train_examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto run_validation = [&]() {
    ++checkpoint;
    TrainLogRow row;
    row.checkpoint = checkpoint;
    row.graphs_seen = graphs_seen;
    row.loss = loss_batches ? loss_sum / loss_batches : 0.0;
    row.val = evaluate(val_subset, params, config);
    result.log.push_back(row);
    if (on_checkpoint) on_checkpoint(row);
    loss_sum = 0.0;
    loss_batches = 0;
    if (row.val.f1 > best_f1) {
      best_f1 = row.val.f1;
      result.best_params = params;
      result.best_checkpoint = checkpoint;
    }
    if (row.val.accuracy() >= 0.9999) stop = true;
  };

  while (!stop && graphs_seen < config.max_train_graphs) {
    rng.shuffle(order);
    size_t i = 0;
    while (i < order.size() && !stop &&
           graphs_seen < config.max_train_graphs) {
      std::vector<Example> batch;
      int64_t vertices = 0;
      while (i < order.size()) {
        const Example& ex = train_examples[order[i]];
        int64_t v = ex.g->num_vertices();
        if (!batch.empty() && vertices + v > config.batch_vertices) break;
        batch.push_back(ex);
        vertices += v;
        ++i;
      }

      zero(grads);
      double loss;
      try {
        loss = loss_and_grads(batch, params, config, grads);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss(std::string(e.what()) + " (checkpoint " +
                            std::to_string(checkpoint) + ", " +
                            std::to_string(graphs_seen) + " graphs seen)");
      }
      adam.step(params, grads, config.learning_rate);
      graphs_seen += static_cast<int64_t>(batch.size());
      loss_sum += loss;
      ++loss_batches;

      if (graphs_seen >= next_checkpoint ||
          graphs_seen >= config.max_train_graphs) {
        run_validation();
        next_checkpoint += config.checkpoint_every_graphs;
      }
      if (config.time_limit_seconds > 0 && elapsed() > config.time_limit_seconds)
        stop = true;
    }
  }

  if (result.log.empty()) run_validation();
  result.graphs_seen = graphs_seen;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints and logs

namespace {

void write_doubles(std::string& out, const Vec& v) {
  char buf[40];
  out += "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    out += buf;
  }
  out += "]";
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const ModelConfig& config) {
  std::string out = "{\"format\":\"fgml-checkpoint\",\"version\":1,";
  out += "\"config\":{";
  out += "\"embed_dim\":" + std::to_string(config.embed_dim);
  out += ",\"selector_dim\":" + std::to_string(config.selector_dim);
  out += ",\"timesteps\":" + std::to_string(config.timesteps);
  char lr[40];
  std::snprintf(lr, sizeof lr, "%.17g", config.learning_rate);
  out += ",\"learning_rate\":" + std::string(lr);
  out += ",\"batch_vertices\":" + std::to_string(config.batch_vertices);
  out += ",\"checkpoint_every_graphs\":" +
         std::to_string(config.checkpoint_every_graphs);
  out += ",\"max_train_graphs\":" + std::to_string(config.max_train_graphs);
  out += ",\"val_cap\":" + std::to_string(config.val_cap);
  out += ",\"seed\":" + std::to_string(config.seed);
  std::snprintf(lr, sizeof lr, "%.17g", config.selector_scale);
  out += ",\"selector_scale\":" + std::string(lr);
  out += "},\"vocab_size\":" + std::to_string(params.vocab_size);
  out += ",\"tensors\":{";
  ModelParameters& p = const_cast<ModelParameters&>(params);
  bool first = true;
  for (auto ref : p.tensors()) {
    if (!first) out += ",";
    first = false;
    out += "\"";
    out += ref.name;
    out += "\":";
    write_doubles(out, *ref.data);
  }
  out += "}}\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

std::pair<ModelParameters, ModelConfig> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.value("format", "") != "fgml-checkpoint")
    throw std::runtime_error(path + " is not a checkpoint file");

  ModelConfig config;
  const auto& jc = j.at("config");
  config.embed_dim = jc.at("embed_dim").get<int>();
  config.selector_dim = jc.at("selector_dim").get<int>();
  config.timesteps = jc.at("timesteps").get<int>();
  config.learning_rate = jc.at("learning_rate").get<double>();
  config.batch_vertices = jc.at("batch_vertices").get<int>();
  config.checkpoint_every_graphs = jc.at("checkpoint_every_graphs").get<int64_t>();
  config.max_train_graphs = jc.at("max_train_graphs").get<int64_t>();
  config.val_cap = jc.at("val_cap").get<int64_t>();
  config.seed = jc.at("seed").get<uint64_t>();
  config.selector_scale = jc.at("selector_scale").get<double>();

  int vocab_size = j.at("vocab_size").get<int>();
  Rng rng(0);
  ModelParameters params = ModelParameters::init(vocab_size, config, rng);
  const auto& jt = j.at("tensors");
  for (auto ref : params.tensors()) {
    const auto& arr = jt.at(ref.name);
    if (arr.size() != ref.data->size())
      throw ShapeError(std::string("checkpoint tensor ") + ref.name +
                       " has wrong size");
    for (size_t i = 0; i < ref.data->size(); ++i)
      (*ref.data)[i] = arr[i].get<double>();
  }
  return {std::move(params), config};
}

void write_train_log_csv(const std::string& path,
                         const std::vector<TrainLogRow>& log) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "checkpoint,graphs_seen,loss,val_precision,val_recall,val_f1\n";
  char buf[160];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.9g,%.9g,%.9g,%.9g\n",
                  row.checkpoint, static_cast<long long>(row.graphs_seen),
                  row.loss, row.val.precision, row.val.recall, row.val.f1);
    f << buf;
  }
}

}  // namespace fgml::model
