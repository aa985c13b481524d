#include <map>
#include <set>
#include <unordered_map>

#include "fgml/graph.hpp"
#include "fgml/vocab.hpp"

namespace fgml::graph {

const char* kind_name(VertexKind k) {
  switch (k) {
    case VertexKind::Instruction: return "instruction";
    case VertexKind::Variable: return "variable";
    case VertexKind::Constant: return "constant";
    case VertexKind::External: return "external";
  }
  return "?";
}

const char* flow_name(Flow f) {
  switch (f) {
    case Flow::Control: return "control";
    case Flow::Data: return "data";
    case Flow::Call: return "call";
  }
  return "?";
}

namespace {

using ir::IRInstruction;
using ir::IRModule;
using ir::OperandKind;

class Builder {
 public:
  explicit Builder(const IRModule& module) : module_(module) {}

  ProgramGraph build() {
    bool any_definition = false;
    for (const auto& fn : module_.functions) any_definition |= fn.is_definition;
    if (!any_definition)
      throw BuildError("module " + module_.source_path +
                       " contains no function definitions");

    g_.source_path = module_.source_path;
    add_vertex(VertexKind::External, kExternalText, "");

    build_control();
    build_data();
    build_call();

    return std::move(g_);
  }

 private:
  int32_t add_vertex(VertexKind kind, std::string text, std::string function) {
    int32_t id = g_.num_vertices();
    g_.vertices.push_back(Vertex{id, kind, std::move(text), std::move(function)});
    return id;
  }

  void add_edge(int32_t src, int32_t dst, Flow flow, int32_t position) {
    g_.edges.push_back(Edge{src, dst, flow, position});
  }

  // (I) one vertex per instruction; successor edges with dense positions.
  void build_control() {
    for (const auto& fn : module_.functions) {
      if (!fn.is_definition) continue;
      FunctionInfo info;
      std::map<std::string, int32_t> block_entry;
      for (const auto& bb : fn.blocks) {
        for (size_t i = 0; i < bb.instructions.size(); ++i) {
          const auto& inst = bb.instructions[i];
          int32_t id = add_vertex(VertexKind::Instruction,
                                  vocab::normalize(inst, module_), fn.name);
          if (i == 0) block_entry[bb.label] = id;
          if (info.entry < 0) info.entry = id;
          if (inst.opcode == "ret" || inst.opcode == "unreachable")
            info.exits.push_back(id);
          inst_vertex_[&inst] = id;
        }
      }
      for (const auto& bb : fn.blocks) {
        for (size_t i = 0; i < bb.instructions.size(); ++i) {
          const auto& inst = bb.instructions[i];
          int32_t id = inst_vertex_[&inst];
          if (i + 1 < bb.instructions.size()) {
            add_edge(id, inst_vertex_[&bb.instructions[i + 1]], Flow::Control, 0);
            continue;
          }
          if (inst.opcode == "phi") continue;  // phi labels are not successors
          int32_t pos = 0;
          for (const auto& op : inst.operands) {
            if (op.kind != OperandKind::Label) continue;
            auto it = block_entry.find(op.text);
            if (it != block_entry.end())
              add_edge(id, it->second, Flow::Control, pos++);
          }
        }
      }
      g_.function_table.emplace_back(fn.name, std::move(info));
    }
  }

  // (II) variable/constant vertices on demand; positions count only
  // variable/constant operands; instruction -> result edge at position 0.
  void build_data() {
    for (const auto& fn : module_.functions) {
      if (!fn.is_definition) continue;
      for (const auto& bb : fn.blocks) {
        for (const auto& inst : bb.instructions) {
          int32_t id = inst_vertex_[&inst];
          int32_t pos = 0;
          for (const auto& op : inst.operands) {
            if (op.kind == OperandKind::Variable) {
              add_edge(variable_vertex(fn.name, op.text, op.type_text), id,
                       Flow::Data, pos++);
            } else if (op.kind == OperandKind::Constant) {
              add_edge(constant_vertex(op.text), id, Flow::Data, pos++);
            }
          }
          if (inst.result) {
            add_edge(id,
                     variable_vertex(fn.name, *inst.result,
                                     inst.result_type.value_or("")),
                     Flow::Data, 0);
          }
        }
      }
    }
  }

  // (III) call edges: site -> callee entry, every callee exit -> site; dummy
  // entry/exit pairs shared per external callee; the external vertex wires to
  // every externally visible definition.
  void build_call() {
    for (const auto& fn : module_.functions) {
      if (!fn.is_definition) continue;
      for (const auto& bb : fn.blocks) {
        for (const auto& inst : bb.instructions) {
          if (inst.opcode != "call" || inst.operands.empty()) continue;
          const auto& callee = inst.operands[0];
          if (callee.kind != OperandKind::FunctionRef) continue;
          int32_t site = inst_vertex_[&inst];
          const FunctionInfo* target = defined_function(callee.text);
          if (target == nullptr) target = dummy_function(callee.text);
          add_edge(site, target->entry, Flow::Call, 0);
          for (int32_t exit : target->exits)
            add_edge(exit, site, Flow::Call, 0);
        }
      }
    }
    for (const auto& fn : module_.functions) {
      if (!fn.is_definition || !fn.is_externally_visible) continue;
      const FunctionInfo* info = g_.find_function(fn.name);
      add_edge(0, info->entry, Flow::Call, 0);
      for (int32_t exit : info->exits) add_edge(exit, 0, Flow::Call, 0);
    }
  }

  const FunctionInfo* defined_function(const std::string& name) const {
    const auto* fn = module_.find_function(name);
    if (fn == nullptr || !fn->is_definition) return nullptr;
    return g_.find_function(name);
  }

  const FunctionInfo* dummy_function(const std::string& name) {
    auto it = dummies_.find(name);
    if (it != dummies_.end()) return &g_.function_table[it->second].second;
    FunctionInfo info;
    info.is_definition = false;
    info.entry = add_vertex(VertexKind::Instruction, kDummyEntryText, name);
    int32_t exit = add_vertex(VertexKind::Instruction, kDummyExitText, name);
    add_edge(info.entry, exit, Flow::Control, 0);
    info.exits.push_back(exit);
    g_.function_table.emplace_back(name, std::move(info));
    dummies_[name] = g_.function_table.size() - 1;
    return &g_.function_table.back().second;
  }

  // Locals are scoped by function; @-names are module-level.
  int32_t variable_vertex(const std::string& fn_name, const std::string& name,
                          const std::string& type_text) {
    bool global = !name.empty() && name[0] == '@';
    std::pair<std::string, std::string> key{global ? "" : fn_name, name};
    auto it = variables_.find(key);
    if (it != variables_.end()) return it->second;
    int32_t id = add_vertex(VertexKind::Variable, type_text, key.first);
    variables_.emplace(std::move(key), id);
    return id;
  }

  // `text` is "type value", so the key is already type-qualified.
  int32_t constant_vertex(const std::string& text) {
    auto it = constants_.find(text);
    if (it != constants_.end()) return it->second;
    int32_t id = add_vertex(VertexKind::Constant, text, "");
    constants_.emplace(text, id);
    return id;
  }

  const IRModule& module_;
  ProgramGraph g_;
  std::unordered_map<const IRInstruction*, int32_t> inst_vertex_;
  std::map<std::pair<std::string, std::string>, int32_t> variables_;
  std::map<std::string, int32_t> constants_;
  std::map<std::string, size_t> dummies_;
};

}  // namespace

ProgramGraph build_graph(const IRModule& module) { return Builder(module).build(); }

GraphStats stats(const ProgramGraph& g) {
  GraphStats s;
  s.vertex_count = static_cast<int64_t>(g.vertices.size());
  s.edge_count = static_cast<int64_t>(g.edges.size());
  for (const auto& v : g.vertices) ++s.kind_counts[static_cast<int>(v.kind)];
  for (const auto& e : g.edges) {
    ++s.flow_counts[static_cast<int>(e.flow)];
    s.max_position = std::max(s.max_position, e.position);
  }
  return s;
}

std::vector<std::string> verify_graph(const ProgramGraph& g) {
  std::vector<std::string> out;
  auto complain = [&](std::string msg) { out.push_back(std::move(msg)); };

  int externals = 0;
  for (size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    if (v.id != static_cast<int32_t>(i))
      complain("vertex ids not dense at index " + std::to_string(i));
    if (v.kind == VertexKind::External) {
      ++externals;
      if (v.id != 0) complain("external vertex is not id 0");
      if (!v.function.empty()) complain("external vertex has a function");
    }
    if (v.kind == VertexKind::Instruction && v.function.empty())
      complain("instruction vertex " + std::to_string(v.id) + " has no function");
  }
  if (externals != 1)
    complain("expected exactly one external vertex, found " +
             std::to_string(externals));

  auto kind = [&](int32_t id) { return g.vertices[id].kind; };
  std::vector<std::vector<int32_t>> out_control(g.vertices.size());
  std::vector<std::vector<int32_t>> in_data(g.vertices.size());
  std::vector<int> data_incident(g.vertices.size(), 0);

  for (const auto& e : g.edges) {
    if (e.src < 0 || e.dst < 0 || e.src >= g.num_vertices() ||
        e.dst >= g.num_vertices()) {
      complain("edge endpoint out of range");
      continue;
    }
    switch (e.flow) {
      case Flow::Control: {
        if (kind(e.src) != VertexKind::Instruction ||
            kind(e.dst) != VertexKind::Instruction)
          complain("control edge between non-instructions");
        else if (g.vertices[e.src].function != g.vertices[e.dst].function)
          complain("control edge crosses functions: " + std::to_string(e.src) +
                   "->" + std::to_string(e.dst));
        out_control[e.src].push_back(e.position);
        break;
      }
      case Flow::Data: {
        bool ok = ((kind(e.src) == VertexKind::Variable ||
                    kind(e.src) == VertexKind::Constant) &&
                   kind(e.dst) == VertexKind::Instruction) ||
                  (kind(e.src) == VertexKind::Instruction &&
                   kind(e.dst) == VertexKind::Variable);
        if (!ok) complain("data edge with wrong endpoint kinds");
        if (kind(e.dst) == VertexKind::Instruction)
          in_data[e.dst].push_back(e.position);
        ++data_incident[e.src];
        ++data_incident[e.dst];
        break;
      }
      case Flow::Call: {
        if (e.position != 0) complain("call edge with nonzero position");
        bool inst_to_inst = kind(e.src) == VertexKind::Instruction &&
                            kind(e.dst) == VertexKind::Instruction;
        bool external = kind(e.src) == VertexKind::External ||
                        kind(e.dst) == VertexKind::External;
        if (!inst_to_inst && !external)
          complain("call edge with wrong endpoint kinds");
        break;
      }
    }
  }

  auto check_dense = [&](std::vector<int32_t>& positions, int32_t id,
                         const char* what) {
    std::sort(positions.begin(), positions.end());
    for (size_t k = 0; k < positions.size(); ++k) {
      if (positions[k] != static_cast<int32_t>(k)) {
        complain(std::string(what) + " positions not dense at vertex " +
                 std::to_string(id));
        return;
      }
    }
  };
  for (int32_t i = 0; i < g.num_vertices(); ++i) {
    check_dense(out_control[i], i, "outgoing control");
    check_dense(in_data[i], i, "incoming data");
    const auto& v = g.vertices[i];
    if ((v.kind == VertexKind::Variable || v.kind == VertexKind::Constant) &&
        data_incident[i] == 0)
      complain("data vertex " + std::to_string(i) + " has no data edge");
  }

  std::set<std::string> const_texts;
  for (const auto& v : g.vertices)
    if (v.kind == VertexKind::Constant && !const_texts.insert(v.text).second)
      complain("duplicate constant vertex for \"" + v.text + "\"");

  return out;
}

}  // namespace fgml::graph
