#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <unordered_map>

#include "fgml/analysis.hpp"

namespace fgml::analysis {

using graph::Flow;
using graph::ProgramGraph;
using graph::VertexKind;

const char* task_name(AnalysisTask t) {
  switch (t) {
    case AnalysisTask::Reachability: return "reachability";
    case AnalysisTask::DomTree: return "domtree";
    case AnalysisTask::DataDep: return "datadep";
    case AnalysisTask::Liveness: return "liveness";
    case AnalysisTask::Subexpressions: return "subexpressions";
  }
  return "?";
}

AnalysisTask parse_task(const std::string& name) {
  for (AnalysisTask t : kAllTasks)
    if (name == task_name(t)) return t;
  throw std::runtime_error("unknown analysis task: " + name);
}

graph::VertexKind task_label_kind(AnalysisTask t) {
  return t == AnalysisTask::Liveness ? VertexKind::Variable
                                     : VertexKind::Instruction;
}

namespace {

struct Adjacency {
  std::vector<std::vector<int32_t>> control_succ;
  std::vector<std::vector<int32_t>> control_pred;
  std::vector<std::vector<int32_t>> uses;  // variable operands per instruction
  std::vector<std::vector<int32_t>> defs;  // variables defined per instruction

  explicit Adjacency(const ProgramGraph& g) {
    size_t n = g.vertices.size();
    control_succ.resize(n);
    control_pred.resize(n);
    uses.resize(n);
    defs.resize(n);
    // Successors in position order: collect (position, dst) then sort.
    std::vector<std::vector<std::pair<int32_t, int32_t>>> succ_pos(n);
    for (const auto& e : g.edges) {
      switch (e.flow) {
        case Flow::Control:
          succ_pos[e.src].emplace_back(e.position, e.dst);
          control_pred[e.dst].push_back(e.src);
          break;
        case Flow::Data:
          if (g.vertices[e.src].kind == VertexKind::Variable)
            uses[e.dst].push_back(e.src);
          if (g.vertices[e.dst].kind == VertexKind::Variable)
            defs[e.src].push_back(e.dst);
          break;
        case Flow::Call:
          break;
      }
    }
    for (size_t i = 0; i < n; ++i) {
      std::sort(succ_pos[i].begin(), succ_pos[i].end());
      for (auto& [pos, dst] : succ_pos[i]) control_succ[i].push_back(dst);
    }
  }
};

void require_instruction(const ProgramGraph& g, int32_t root) {
  if (root < 0 || root >= g.num_vertices() ||
      g.vertices[root].kind != VertexKind::Instruction)
    throw RootKindError("root " + std::to_string(root) +
                        " is not an instruction vertex");
}

// DFS from `entry` over control successors in position order; returns the
// postorder sequence of visited vertices.
std::vector<int32_t> control_postorder(const Adjacency& adj, int32_t entry) {
  std::vector<int32_t> order;
  std::vector<int8_t> state(adj.control_succ.size(), 0);
  std::vector<std::pair<int32_t, size_t>> stack;
  stack.emplace_back(entry, 0);
  state[entry] = 1;
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    if (next < adj.control_succ[v].size()) {
      int32_t s = adj.control_succ[v][next++];
      if (!state[s]) {
        state[s] = 1;
        stack.emplace_back(s, 0);
      }
    } else {
      order.push_back(v);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

AnalysisResult reachability(const ProgramGraph& g, int32_t root) {
  require_instruction(g, root);
  Adjacency adj(g);
  AnalysisResult r{AnalysisTask::Reachability, root, BitVec(g.vertices.size()), 0};
  std::deque<int32_t> frontier{root};
  std::vector<int32_t> depth(g.vertices.size(), -1);
  depth[root] = 0;
  r.labels.set(root);
  while (!frontier.empty()) {
    int32_t v = frontier.front();
    frontier.pop_front();
    r.steps = std::max(r.steps, depth[v]);
    for (int32_t s : adj.control_succ[v]) {
      if (depth[s] >= 0) continue;
      depth[s] = depth[v] + 1;
      r.labels.set(s);
      frontier.push_back(s);
    }
  }
  return r;
}

AnalysisResult dominators(const ProgramGraph& g, int32_t root) {
  require_instruction(g, root);
  const auto& fn_name = g.vertices[root].function;
  const auto* info = g.find_function(fn_name);
  if (info == nullptr || !info->is_definition)
    throw RootKindError("root " + std::to_string(root) +
                        " is not inside a function definition");

  Adjacency adj(g);
  // Local index space over the function's instructions.
  std::vector<int32_t> members;
  std::unordered_map<int32_t, int32_t> local;
  for (const auto& v : g.vertices)
    if (v.kind == VertexKind::Instruction && v.function == fn_name) {
      local[v.id] = static_cast<int32_t>(members.size());
      members.push_back(v.id);
    }
  size_t n = members.size();

  std::vector<int32_t> postorder = control_postorder(adj, info->entry);
  std::vector<int32_t> rpo(postorder.rbegin(), postorder.rend());

  AnalysisResult r{AnalysisTask::DomTree, root, BitVec(g.vertices.size()), 0};
  BitVec reachable(g.vertices.size());
  for (int32_t v : postorder) reachable.set(v);
  if (!reachable.get(root)) {
    // Unreachable code gets all-zero labels.
    r.steps = 1;
    return r;
  }

  // Set-intersection fixpoint: entry owns itself, everything else starts at
  // top and shrinks. Reverse postorder with in-place updates.
  std::vector<BitVec> dom(n);
  for (size_t i = 0; i < n; ++i) {
    dom[i] = BitVec(n);
    dom[i].fill_all();
  }
  BitVec entry_only(n);
  entry_only.set(local[info->entry]);
  dom[local[info->entry]] = entry_only;

  bool changed = true;
  while (changed) {
    changed = false;
    ++r.steps;
    for (int32_t v : rpo) {
      if (v == info->entry) continue;
      BitVec next(n);
      next.fill_all();
      bool have_pred = false;
      for (int32_t p : adj.control_pred[v]) {
        if (!reachable.get(p)) continue;
        next.and_with(dom[local[p]]);
        have_pred = true;
      }
      if (!have_pred) next = BitVec(n);
      next.set(local[v]);
      if (!(next == dom[local[v]])) {
        dom[local[v]] = std::move(next);
        changed = true;
      }
    }
  }

  const BitVec& d = dom[local[root]];
  for (size_t i = 0; i < n; ++i)
    if (d.get(i)) r.labels.set(members[i]);
  return r;
}

AnalysisResult datadep(const ProgramGraph& g, int32_t root) {
  require_instruction(g, root);
  Adjacency adj(g);
  // producers(i): instructions defining a variable used by i.
  std::vector<std::vector<int32_t>> var_defs(g.vertices.size());
  for (const auto& e : g.edges)
    if (e.flow == Flow::Data && g.vertices[e.dst].kind == VertexKind::Variable)
      var_defs[e.dst].push_back(e.src);

  AnalysisResult r{AnalysisTask::DataDep, root, BitVec(g.vertices.size()), 0};
  std::deque<int32_t> frontier{root};
  std::vector<int32_t> depth(g.vertices.size(), -1);
  depth[root] = 0;
  r.labels.set(root);
  while (!frontier.empty()) {
    int32_t v = frontier.front();
    frontier.pop_front();
    r.steps = std::max(r.steps, depth[v]);
    for (int32_t var : adj.uses[v]) {
      for (int32_t producer : var_defs[var]) {
        if (depth[producer] >= 0) continue;
        depth[producer] = depth[v] + 1;
        r.labels.set(producer);
        frontier.push_back(producer);
      }
    }
  }
  return r;
}

AnalysisResult liveness(const ProgramGraph& g, int32_t root) {
  require_instruction(g, root);
  Adjacency adj(g);
  size_t n = g.vertices.size();

  // Round-robin sweeps in control postorder so information crosses one loop
  // level per sweep; unreachable instructions are appended in id order.
  std::vector<int32_t> order;
  std::vector<bool> placed(n, false);
  for (const auto& [name, info] : g.function_table) {
    for (int32_t v : control_postorder(adj, info.entry)) {
      order.push_back(v);
      placed[v] = true;
    }
  }
  for (const auto& v : g.vertices)
    if (v.kind == VertexKind::Instruction && !placed[v.id])
      order.push_back(v.id);

  std::vector<BitVec> live_out(n);
  for (int32_t v : order) live_out[v] = BitVec(n);

  AnalysisResult r{AnalysisTask::Liveness, root, BitVec(n), 0};
  bool changed = true;
  while (changed) {
    changed = false;
    ++r.steps;
    for (int32_t v : order) {
      BitVec next(n);
      for (int32_t s : adj.control_succ[v]) {
        BitVec in = live_out[s];
        for (int32_t d : adj.defs[s]) in.set(d, false);
        for (int32_t u : adj.uses[s]) in.set(u);
        next.or_with(in);
      }
      if (!(next == live_out[v])) {
        live_out[v] = std::move(next);
        changed = true;
      }
    }
  }
  r.labels = live_out[root];
  return r;
}

// ---------------------------------------------------------------------------
// Subexpressions

namespace {

// Uniform operand placeholder so operand order is carried by identity, not by
// the statement text.
std::string uniform_text(const std::string& text) {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      size_t close = text.find('>', i);
      std::string tok = text.substr(i, close == std::string::npos
                                           ? std::string::npos
                                           : close - i + 1);
      if (tok == "<%ID>" || tok == "<INT>" || tok == "<FLOAT>" ||
          tok == "<STR>") {
        out += "<OP>";
        i += tok.size();
        continue;
      }
    }
    out += text[i++];
  }
  return out;
}

std::string opcode_of(const std::string& text) {
  size_t start = 0;
  const std::string prefix = "<%ID> = ";
  if (text.rfind(prefix, 0) == 0) start = prefix.size();
  size_t sp = text.find(' ', start);
  std::string first = text.substr(start, sp - start);
  if ((first == "icmp" || first == "fcmp") && sp != std::string::npos) {
    size_t sp2 = text.find(' ', sp + 1);
    return text.substr(start, sp2 - start);
  }
  return first;
}

bool commutative_opcode(const std::string& oc) {
  static const std::set<std::string> comm = {
      "add",      "mul",      "and",      "or",       "xor",
      "fadd",     "fmul",     "icmp eq",  "icmp ne",  "fcmp oeq",
      "fcmp one", "fcmp ueq", "fcmp une"};
  return comm.count(oc) > 0;
}

}  // namespace

std::optional<std::string> expression_key(const ProgramGraph& g, int32_t vertex) {
  const auto& v = g.vertices[vertex];
  if (v.kind != VertexKind::Instruction) return std::nullopt;
  if (v.text == graph::kDummyEntryText || v.text == graph::kDummyExitText)
    return std::nullopt;

  std::string oc = opcode_of(v.text);
  static const std::set<std::string> excluded = {"load", "store", "call",
                                                 "alloca", "phi"};
  if (excluded.count(oc)) return std::nullopt;

  bool has_result = false;
  std::vector<std::pair<int32_t, int32_t>> operands;  // (position, src)
  for (const auto& e : g.edges) {
    if (e.flow != Flow::Data) continue;
    if (e.src == vertex && g.vertices[e.dst].kind == VertexKind::Variable)
      has_result = true;
    if (e.dst == vertex) operands.emplace_back(e.position, e.src);
  }
  if (!has_result || operands.empty()) return std::nullopt;

  std::sort(operands.begin(), operands.end());
  std::vector<int32_t> ids;
  for (auto& [pos, src] : operands) ids.push_back(src);
  if (commutative_opcode(oc)) std::sort(ids.begin(), ids.end());

  std::string key = uniform_text(v.text);
  key += " |";
  for (int32_t id : ids) key += " " + std::to_string(id);
  return key;
}

AnalysisResult subexpressions(const ProgramGraph& g, int32_t root) {
  require_instruction(g, root);
  auto root_key = expression_key(g, root);
  if (!root_key)
    throw IneligibleRootError("root " + std::to_string(root) +
                              " has no expression key");
  AnalysisResult r{AnalysisTask::Subexpressions, root, BitVec(g.vertices.size()), 1};
  for (const auto& v : g.vertices) {
    if (v.kind != VertexKind::Instruction) continue;
    auto key = expression_key(g, v.id);
    if (key && *key == *root_key) r.labels.set(v.id);
  }
  return r;
}

AnalysisResult run_analysis(const ProgramGraph& g, AnalysisTask task,
                            int32_t root) {
  switch (task) {
    case AnalysisTask::Reachability: return reachability(g, root);
    case AnalysisTask::DomTree: return dominators(g, root);
    case AnalysisTask::DataDep: return datadep(g, root);
    case AnalysisTask::Liveness: return liveness(g, root);
    case AnalysisTask::Subexpressions: return subexpressions(g, root);
  }
  throw std::runtime_error("unknown task");
}

std::vector<int32_t> eligible_roots(const ProgramGraph& g, AnalysisTask task) {
  std::vector<int32_t> out;
  std::set<std::string> definitions;
  for (const auto& [name, info] : g.function_table)
    if (info.is_definition) definitions.insert(name);

  if (task == AnalysisTask::Subexpressions) {
    std::map<std::string, int> key_count;
    std::vector<std::pair<int32_t, std::string>> keyed;
    for (const auto& v : g.vertices) {
      if (v.kind != VertexKind::Instruction) continue;
      auto key = expression_key(g, v.id);
      if (!key) continue;
      ++key_count[*key];
      if (definitions.count(v.function)) keyed.emplace_back(v.id, *key);
    }
    for (auto& [id, key] : keyed)
      if (key_count[key] >= 2) out.push_back(id);
    return out;
  }

  if (task == AnalysisTask::DomTree) {
    Adjacency adj(g);
    BitVec reachable(g.vertices.size());
    for (const auto& [name, info] : g.function_table) {
      if (!info.is_definition) continue;
      for (int32_t v : control_postorder(adj, info.entry)) reachable.set(v);
    }
    for (const auto& v : g.vertices)
      if (v.kind == VertexKind::Instruction && definitions.count(v.function) &&
          reachable.get(v.id))
        out.push_back(v.id);
    return out;
  }

  for (const auto& v : g.vertices)
    if (v.kind == VertexKind::Instruction && definitions.count(v.function))
      out.push_back(v.id);
  return out;
}

}  // namespace fgml::analysis
