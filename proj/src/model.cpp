#include <cmath>

#include "fgml/model.hpp"

namespace fgml::model {

using dataset::LabeledInstance;
using graph::Flow;
using graph::VertexKind;

void ModelConfig::check() const {
  if (embed_dim < 4 || embed_dim % 2 != 0)
    throw ShapeError("embed_dim must be even and >= 4");
  if (selector_dim != 2) throw ShapeError("selector_dim must be 2");
  if (timesteps < 1) throw ShapeError("timesteps must be >= 1");
}

Vec position_encoding(int position, int dim) {
  if (dim % 2 != 0) throw ShapeError("position encoding dim must be even");
  Vec v(dim);
  for (int i = 0; 2 * i < dim; ++i) {
    double freq = std::pow(10000.0, -2.0 * i / dim);
    v[2 * i] = std::sin(position * freq);
    v[2 * i + 1] = std::cos(position * freq);
  }
  return v;
}

namespace {

double glorot_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

void glorot(Mat& m, Rng& rng) {
  double lim = glorot_limit(m.cols, m.rows);
  for (double& x : m.a) x = (rng.real() * 2.0 - 1.0) * lim;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ModelParameters ModelParameters::init(int vocab_size, const ModelConfig& config,
                                      Rng& rng) {
  config.check();
  int d = config.embed_dim;
  int h = config.hidden();
  ModelParameters p;
  p.vocab_size = vocab_size;
  p.embed_dim = d;
  p.hidden_dim = h;

  p.embed = Mat(vocab_size, d);
  double es = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& x : p.embed.a) x = rng.normal() * es;

  for (auto& m : p.msg) {
    m = Mat(h, h);
    glorot(m, rng);
  }
  for (Mat* m : {&p.gru_wz, &p.gru_uz, &p.gru_wr, &p.gru_ur, &p.gru_wc,
                 &p.gru_uc}) {
    *m = Mat(h, h);
    glorot(*m, rng);
  }
  p.gru_bz.assign(h, 0.0);
  p.gru_br.assign(h, 0.0);
  p.gru_bc.assign(h, 0.0);

  p.i_w1 = Mat(h, 2 * h);
  glorot(p.i_w1, rng);
  p.i_b1.assign(h, 0.0);
  p.i_w2 = Mat(2, h);
  glorot(p.i_w2, rng);
  p.i_b2.assign(2, 0.0);
  p.j_w1 = Mat(h, h);
  glorot(p.j_w1, rng);
  p.j_b1.assign(h, 0.0);
  p.j_w2 = Mat(2, h);
  glorot(p.j_w2, rng);
  p.j_b2.assign(2, 0.0);
  return p;
}

ModelParameters ModelParameters::zeros_like(const ModelParameters& other) {
  ModelParameters p = other;
  for (auto ref : p.tensors()) std::fill(ref.data->begin(), ref.data->end(), 0.0);
  return p;
}

std::vector<ModelParameters::TensorRef> ModelParameters::tensors() {
  return {
      {"embed", &embed.a},     {"msg_control_fwd", &msg[0].a},
      {"msg_control_bwd", &msg[1].a}, {"msg_data_fwd", &msg[2].a},
      {"msg_data_bwd", &msg[3].a},    {"msg_call_fwd", &msg[4].a},
      {"msg_call_bwd", &msg[5].a},    {"gru_wz", &gru_wz.a},
      {"gru_uz", &gru_uz.a},   {"gru_wr", &gru_wr.a},
      {"gru_ur", &gru_ur.a},   {"gru_wc", &gru_wc.a},
      {"gru_uc", &gru_uc.a},   {"gru_bz", &gru_bz},
      {"gru_br", &gru_br},     {"gru_bc", &gru_bc},
      {"i_w1", &i_w1.a},       {"i_b1", &i_b1},
      {"i_w2", &i_w2.a},       {"i_b2", &i_b2},
      {"j_w1", &j_w1.a},       {"j_b1", &j_b1},
      {"j_w2", &j_w2.a},       {"j_b2", &j_b2},
  };
}

namespace {

void check_shapes(const GraphInput& in, const ModelParameters& params,
                  const ModelConfig& config) {
  if (params.hidden_dim != config.hidden() ||
      params.embed_dim != config.embed_dim)
    throw ShapeError("parameter dimensions do not match the configuration");
  if (in.g == nullptr || in.tokens == nullptr)
    throw ShapeError("missing graph input");
  if (in.tokens->size() != in.g->vertices.size())
    throw ShapeError("token list size does not match vertex count");
  for (int32_t t : *in.tokens)
    if (t < 0 || t >= params.vocab_size)
      throw ShapeError("vertex token id outside the vocabulary");
}

Mat build_pos_table(const graph::ProgramGraph& g, int h) {
  int32_t max_pos = 0;
  for (const auto& e : g.edges) max_pos = std::max(max_pos, e.position);
  Mat table(max_pos + 1, h);
  for (int32_t p = 0; p <= max_pos; ++p) {
    Vec enc = position_encoding(p, h);
    std::copy(enc.begin(), enc.end(), table.row(p));
  }
  return table;
}

// Full forward tape for reverse-mode accumulation. Buffers are reused across
// calls; message accumulators are re-zeroed here, everything else is fully
// overwritten by the forward pass.
struct Tape {
  int V = 0, H = 0, T = 0;
  std::vector<Mat> h;           // T+1 states
  std::vector<Mat> m, z, r, c;  // per step

  void ensure(int v, int hdim, int t) {
    if (V == v && H == hdim && T == t) {
      for (auto& mm : m) std::fill(mm.a.begin(), mm.a.end(), 0.0);
      return;
    }
    V = v;
    H = hdim;
    T = t;
    h.assign(T + 1, Mat(V, H));
    m.assign(T, Mat(V, H));
    z.assign(T, Mat(V, H));
    r.assign(T, Mat(V, H));
    c.assign(T, Mat(V, H));
  }
};

// Transposed copies of the matrices applied in the forward direction; the
// column-sweep product form needs them.
struct ForwardMats {
  std::array<Mat, 6> msg_t;
  Mat wz_t, uz_t, wr_t, ur_t, wc_t, uc_t;

  explicit ForwardMats(const ModelParameters& p)
      : wz_t(transpose(p.gru_wz)),
        uz_t(transpose(p.gru_uz)),
        wr_t(transpose(p.gru_wr)),
        ur_t(transpose(p.gru_ur)),
        wc_t(transpose(p.gru_wc)),
        uc_t(transpose(p.gru_uc)) {
    for (int i = 0; i < 6; ++i) msg_t[i] = transpose(p.msg[i]);
  }
};

void forward(const GraphInput& in, int32_t root, const ModelParameters& params,
             const ForwardMats& fm, const ModelConfig& config, Tape& tape) {
  check_shapes(in, params, config);
  const auto& g = *in.g;
  const int V = g.num_vertices();
  const int H = config.hidden();
  const int d = config.embed_dim;
  const int T = config.timesteps;

  tape.ensure(V, H, T);

  // h^0 = embedding ++ scaled selector one-hot
  for (int v = 0; v < V; ++v) {
    double* h0 = tape.h[0].row(v);
    const double* e = params.embed.row((*in.tokens)[v]);
    std::copy(e, e + d, h0);
    h0[d] = (v == root) ? config.selector_scale : 0.0;
    h0[d + 1] = (v == root) ? 0.0 : config.selector_scale;
  }

  Mat pos = build_pos_table(g, H);
  Vec tmp(H);

  for (int t = 1; t <= T; ++t) {
    Mat& hp = tape.h[t - 1];
    Mat& m = tape.m[t - 1];

    for (const auto& e : g.edges) {
      const double* pv = pos.row(e.position);
      const int f = static_cast<int>(e.flow) * 2;
      const double* hs = hp.row(e.src);
      for (int k = 0; k < H; ++k) tmp[k] = hs[k] * pv[k];
      matvec_pre_t_acc(fm.msg_t[f], tmp.data(), m.row(e.dst));
      const double* hd = hp.row(e.dst);
      for (int k = 0; k < H; ++k) tmp[k] = hd[k] * pv[k];
      matvec_pre_t_acc(fm.msg_t[f + 1], tmp.data(), m.row(e.src));
    }

    Mat& z = tape.z[t - 1];
    Mat& r = tape.r[t - 1];
    Mat& c = tape.c[t - 1];
    Vec acc(H);
    Vec rh(H);
    for (int v = 0; v < V; ++v) {
      const double* hv = hp.row(v);
      const double* mv = m.row(v);

      std::copy(params.gru_bz.begin(), params.gru_bz.end(), acc.begin());
      matvec_pre_t_acc(fm.wz_t, mv, acc.data());
      matvec_pre_t_acc(fm.uz_t, hv, acc.data());
      double* zv = z.row(v);
      for (int k = 0; k < H; ++k) zv[k] = sigmoid(acc[k]);

      std::copy(params.gru_br.begin(), params.gru_br.end(), acc.begin());
      matvec_pre_t_acc(fm.wr_t, mv, acc.data());
      matvec_pre_t_acc(fm.ur_t, hv, acc.data());
      double* rv = r.row(v);
      for (int k = 0; k < H; ++k) rv[k] = sigmoid(acc[k]);

      for (int k = 0; k < H; ++k) rh[k] = rv[k] * hv[k];
      std::copy(params.gru_bc.begin(), params.gru_bc.end(), acc.begin());
      matvec_pre_t_acc(fm.wc_t, mv, acc.data());
      matvec_pre_t_acc(fm.uc_t, rh.data(), acc.data());
      double* cv = c.row(v);
      for (int k = 0; k < H; ++k) cv[k] = std::tanh(acc[k]);

      double* hn = tape.h[t].row(v);
      for (int k = 0; k < H; ++k)
        hn[k] = (1.0 - zv[k]) * hv[k] + zv[k] * cv[k];
    }
  }
}

}  // namespace

Mat initial_states(const GraphInput& in, int32_t root,
                   const ModelParameters& params, const ModelConfig& config) {
  check_shapes(in, params, config);
  const int V = in.g->num_vertices();
  const int d = config.embed_dim;
  Mat h0(V, config.hidden());
  for (int v = 0; v < V; ++v) {
    double* row = h0.row(v);
    const double* e = params.embed.row((*in.tokens)[v]);
    std::copy(e, e + d, row);
    row[d] = (v == root) ? config.selector_scale : 0.0;
    row[d + 1] = (v == root) ? 0.0 : config.selector_scale;
  }
  return h0;
}

Mat propagate(const GraphInput& in, int32_t root, const ModelParameters& params,
              const ModelConfig& config) {
  if (config.timesteps == 0) return initial_states(in, root, params, config);
  Tape tape;
  ForwardMats fm(params);
  forward(in, root, params, fm, config, tape);
  return std::move(tape.h.back());
}

std::array<double, 2> readout_vertex(const double* h_t, const double* h_0,
                                     const ModelParameters& params) {
  const int H = params.hidden_dim;
  Vec x(2 * H);
  std::copy(h_t, h_t + H, x.begin());
  std::copy(h_0, h_0 + H, x.begin() + H);

  Vec u1 = params.i_b1;
  matvec_acc(params.i_w1, x.data(), u1.data());
  for (double& v : u1) v = std::tanh(v);
  std::array<double, 2> iout{params.i_b2[0], params.i_b2[1]};
  matvec_acc(params.i_w2, u1.data(), iout.data());

  Vec v1 = params.j_b1;
  matvec_acc(params.j_w1, h_t, v1.data());
  for (double& v : v1) v = std::tanh(v);
  std::array<double, 2> jout{params.j_b2[0], params.j_b2[1]};
  matvec_acc(params.j_w2, v1.data(), jout.data());

  return {sigmoid(iout[0]) * jout[0], sigmoid(iout[1]) * jout[1]};
}

std::array<double, 2> readout_graph(const Mat& h_t, const Mat& h_0,
                                    const ModelParameters& params) {
  if (h_t.rows != h_0.rows || h_t.cols != h_0.cols)
    throw ShapeError("state matrices disagree");
  std::array<double, 2> sum{0.0, 0.0};
  for (int v = 0; v < h_t.rows; ++v) {
    auto s = readout_vertex(h_t.row(v), h_0.row(v), params);
    sum[0] += s[0];
    sum[1] += s[1];
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Loss and gradients

namespace {

struct ReadoutTape {
  int32_t vertex = 0;
  int label = 0;
  Vec u1, v1;
  std::array<double, 2> iout{}, jout{}, prob{};
};

int64_t count_eligible(const Example& ex) {
  VertexKind kind = analysis::task_label_kind(ex.inst->task);
  int64_t n = 0;
  for (const auto& v : ex.g->vertices)
    if (v.kind == kind) ++n;
  return n;
}

}  // namespace

double loss_and_grads(const std::vector<Example>& batch,
                      const ModelParameters& params, const ModelConfig& config,
                      ModelParameters& grads) {
  const int H = config.hidden();
  const int d = config.embed_dim;

  int64_t total_eligible = 0;
  for (const auto& ex : batch) total_eligible += count_eligible(ex);
  if (total_eligible == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(total_eligible);

  double loss_sum = 0.0;
  Tape tape;
  ForwardMats fm(params);
  Vec tmp(H), tmp2(H), acc(H), x(2 * H);

  for (const auto& ex : batch) {
    const auto& g = *ex.g;
    const int V = g.num_vertices();
    const int T = config.timesteps;
    forward({ex.g, ex.tokens}, ex.inst->root, params, fm, config, tape);

    VertexKind kind = analysis::task_label_kind(ex.inst->task);
    BitVec labels = ex.inst->labels_bitvec(g.vertices.size());

    // readout + cross-entropy per eligible vertex
    std::vector<ReadoutTape> readouts;
    const Mat& hT = tape.h[T];
    const Mat& h0 = tape.h[0];
    for (int v = 0; v < V; ++v) {
      if (g.vertices[v].kind != kind) continue;
      ReadoutTape rt;
      rt.vertex = v;
      rt.label = labels.get(v) ? 1 : 0;

      std::copy(hT.row(v), hT.row(v) + H, x.begin());
      std::copy(h0.row(v), h0.row(v) + H, x.begin() + H);
      rt.u1 = params.i_b1;
      matvec_acc(params.i_w1, x.data(), rt.u1.data());
      for (double& u : rt.u1) u = std::tanh(u);
      rt.iout = {params.i_b2[0], params.i_b2[1]};
      matvec_acc(params.i_w2, rt.u1.data(), rt.iout.data());

      rt.v1 = params.j_b1;
      matvec_acc(params.j_w1, hT.row(v), rt.v1.data());
      for (double& u : rt.v1) u = std::tanh(u);
      rt.jout = {params.j_b2[0], params.j_b2[1]};
      matvec_acc(params.j_w2, rt.v1.data(), rt.jout.data());

      double s0 = sigmoid(rt.iout[0]) * rt.jout[0];
      double s1 = sigmoid(rt.iout[1]) * rt.jout[1];
      double mx = std::max(s0, s1);
      double e0 = std::exp(s0 - mx), e1 = std::exp(s1 - mx);
      double zsum = e0 + e1;
      rt.prob = {e0 / zsum, e1 / zsum};
      double ce = -std::log(rt.label ? rt.prob[1] : rt.prob[0]);
      if (!std::isfinite(ce))
        throw NonFiniteLoss("non-finite cross-entropy on " + g.source_path);
      loss_sum += ce;
      readouts.push_back(std::move(rt));
    }

    // dL/dh_T and the direct h_0 contribution from the i-network
    Mat dh(V, H);
    Mat dh0_direct(V, H);
    for (const auto& rt : readouts) {
      int v = rt.vertex;
      std::array<double, 2> ds{rt.prob[0], rt.prob[1]};
      ds[rt.label] -= 1.0;
      ds[0] *= scale;
      ds[1] *= scale;

      std::array<double, 2> diout, djout;
      for (int k = 0; k < 2; ++k) {
        double sg = sigmoid(rt.iout[k]);
        diout[k] = ds[k] * rt.jout[k] * sg * (1.0 - sg);
        djout[k] = ds[k] * sg;
      }

      // j-net backward
      outer_acc(grads.j_w2, djout.data(), rt.v1.data());
      grads.j_b2[0] += djout[0];
      grads.j_b2[1] += djout[1];
      std::fill(tmp.begin(), tmp.end(), 0.0);
      matvec_t_acc(params.j_w2, djout.data(), tmp.data());
      for (int k = 0; k < H; ++k) tmp[k] *= 1.0 - rt.v1[k] * rt.v1[k];
      outer_acc(grads.j_w1, tmp.data(), tape.h[T].row(v));
      for (int k = 0; k < H; ++k) grads.j_b1[k] += tmp[k];
      matvec_t_acc(params.j_w1, tmp.data(), dh.row(v));

      // i-net backward
      outer_acc(grads.i_w2, diout.data(), rt.u1.data());
      grads.i_b2[0] += diout[0];
      grads.i_b2[1] += diout[1];
      std::fill(tmp.begin(), tmp.end(), 0.0);
      matvec_t_acc(params.i_w2, diout.data(), tmp.data());
      for (int k = 0; k < H; ++k) tmp[k] *= 1.0 - rt.u1[k] * rt.u1[k];
      std::copy(tape.h[T].row(v), tape.h[T].row(v) + H, x.begin());
      std::copy(tape.h[0].row(v), tape.h[0].row(v) + H, x.begin() + H);
      outer_acc(grads.i_w1, tmp.data(), x.data());
      for (int k = 0; k < H; ++k) grads.i_b1[k] += tmp[k];
      Vec dx(2 * H, 0.0);
      matvec_t_acc(params.i_w1, tmp.data(), dx.data());
      for (int k = 0; k < H; ++k) dh.at(v, k) += dx[k];
      for (int k = 0; k < H; ++k) dh0_direct.at(v, k) += dx[H + k];
    }

    // unroll backward through the GRU steps and message passing
    Mat pos = build_pos_table(g, H);
    Vec dac(H), daz(H), dar(H), drh(H), dr(H);
    for (int t = T; t >= 1; --t) {
      Mat dh_prev(V, H);
      Mat dm(V, H);
      const Mat& hp = tape.h[t - 1];
      const Mat& z = tape.z[t - 1];
      const Mat& r = tape.r[t - 1];
      const Mat& c = tape.c[t - 1];
      const Mat& m = tape.m[t - 1];

      for (int v = 0; v < V; ++v) {
        const double* hv = hp.row(v);
        const double* zv = z.row(v);
        const double* rv = r.row(v);
        const double* cv = c.row(v);
        const double* mv = m.row(v);
        const double* dhv = dh.row(v);
        double* dhp = dh_prev.row(v);
        double* dmv = dm.row(v);

        // h' = (1-z) h + z c
        for (int k = 0; k < H; ++k) {
          double dz = dhv[k] * (cv[k] - hv[k]);
          double dc = dhv[k] * zv[k];
          dhp[k] += dhv[k] * (1.0 - zv[k]);
          dac[k] = dc * (1.0 - cv[k] * cv[k]);
          daz[k] = dz * zv[k] * (1.0 - zv[k]);
        }
        outer_acc(grads.gru_wc, dac.data(), mv);
        for (int k = 0; k < H; ++k) tmp[k] = rv[k] * hv[k];
        outer_acc(grads.gru_uc, dac.data(), tmp.data());
        for (int k = 0; k < H; ++k) grads.gru_bc[k] += dac[k];
        matvec_t_acc(params.gru_wc, dac.data(), dmv);
        std::fill(drh.begin(), drh.end(), 0.0);
        matvec_t_acc(params.gru_uc, dac.data(), drh.data());
        for (int k = 0; k < H; ++k) {
          dr[k] = drh[k] * hv[k];
          dhp[k] += drh[k] * rv[k];
          dar[k] = dr[k] * rv[k] * (1.0 - rv[k]);
        }

        outer_acc(grads.gru_wz, daz.data(), mv);
        outer_acc(grads.gru_uz, daz.data(), hv);
        for (int k = 0; k < H; ++k) grads.gru_bz[k] += daz[k];
        matvec_t_acc(params.gru_wz, daz.data(), dmv);
        matvec_t_acc(params.gru_uz, daz.data(), dhp);

        outer_acc(grads.gru_wr, dar.data(), mv);
        outer_acc(grads.gru_ur, dar.data(), hv);
        for (int k = 0; k < H; ++k) grads.gru_br[k] += dar[k];
        matvec_t_acc(params.gru_wr, dar.data(), dmv);
        matvec_t_acc(params.gru_ur, dar.data(), dhp);
      }

      for (const auto& e : g.edges) {
        const double* pv = pos.row(e.position);
        const int f = static_cast<int>(e.flow) * 2;
        // forward direction: m[dst] += A[f] (h[src] ⊙ pos)
        const double* hs = hp.row(e.src);
        const double* dmd = dm.row(e.dst);
        for (int k = 0; k < H; ++k) tmp[k] = hs[k] * pv[k];
        outer_acc(grads.msg[f], dmd, tmp.data());
        std::fill(tmp2.begin(), tmp2.end(), 0.0);
        matvec_t_acc(params.msg[f], dmd, tmp2.data());
        double* dhs = dh_prev.row(e.src);
        for (int k = 0; k < H; ++k) dhs[k] += tmp2[k] * pv[k];
        // backward sibling: m[src] += A[f+1] (h[dst] ⊙ pos)
        const double* hd = hp.row(e.dst);
        const double* dms = dm.row(e.src);
        for (int k = 0; k < H; ++k) tmp[k] = hd[k] * pv[k];
        outer_acc(grads.msg[f + 1], dms, tmp.data());
        std::fill(tmp2.begin(), tmp2.end(), 0.0);
        matvec_t_acc(params.msg[f + 1], dms, tmp2.data());
        double* dhd = dh_prev.row(e.dst);
        for (int k = 0; k < H; ++k) dhd[k] += tmp2[k] * pv[k];
      }

      dh = std::move(dh_prev);
    }

    // h^0: embedding rows (selector dims are constant)
    for (int v = 0; v < V; ++v) {
      double* erow = grads.embed.row((*ex.tokens)[v]);
      const double* dhv = dh.row(v);
      const double* d0 = dh0_direct.row(v);
      for (int k = 0; k < d; ++k) erow[k] += dhv[k] + d0[k];
    }
  }

  double loss = loss_sum * scale;
  if (!std::isfinite(loss)) throw NonFiniteLoss("non-finite batch loss");
  return loss;
}

Metrics evaluate(const std::vector<Example>& examples,
                 const ModelParameters& params, const ModelConfig& config) {
  Metrics m;
  for (const auto& ex : examples) {
    GraphInput in{ex.g, ex.tokens};
    Mat h0 = initial_states(in, ex.inst->root, params, config);
    Mat hT = propagate(in, ex.inst->root, params, config);
    VertexKind kind = analysis::task_label_kind(ex.inst->task);
    BitVec labels = ex.inst->labels_bitvec(ex.g->vertices.size());
    for (int v = 0; v < ex.g->num_vertices(); ++v) {
      if (ex.g->vertices[v].kind != kind) continue;
      auto s = readout_vertex(hT.row(v), h0.row(v), params);
      bool pred = s[1] > s[0];
      bool truth = labels.get(v);
      if (pred && truth) ++m.tp;
      else if (pred && !truth) ++m.fp;
      else if (!pred && truth) ++m.fn;
      else ++m.tn;
    }
  }
  if (m.tp + m.fp > 0)
    m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
  else
    m.zero_division = true;
  if (m.tp + m.fn > 0)
    m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
  else
    m.zero_division = true;
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else
    m.zero_division = true;
  return m;
}

}  // namespace fgml::model
