#pragma once

#include <string>
#include <vector>

#include "fgml/common.hpp"
#include "fgml/ir.hpp"

namespace fgml::graph {

enum class VertexKind { Instruction, Variable, Constant, External };
enum class Flow { Control, Data, Call };

const char* kind_name(VertexKind k);
const char* flow_name(Flow f);

struct Vertex {
  int32_t id = 0;
  VertexKind kind = VertexKind::Instruction;
  std::string text;      // normalized statement | type | "type value" | "<external>"
  std::string function;  // empty for the external vertex and module-level data

  bool operator==(const Vertex&) const = default;
};

struct Edge {
  int32_t src = 0;
  int32_t dst = 0;
  Flow flow = Flow::Control;
  int32_t position = 0;

  bool operator==(const Edge&) const = default;
};

struct FunctionInfo {
  int32_t entry = -1;
  std::vector<int32_t> exits;  // every ret/unreachable vertex
  bool is_definition = true;   // false for dummy callee stand-ins
};

struct ProgramGraph {
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::vector<std::pair<std::string, FunctionInfo>> function_table;
  std::string source_path;

  int32_t num_vertices() const { return static_cast<int32_t>(vertices.size()); }
  const FunctionInfo* find_function(const std::string& name) const {
    for (const auto& [n, info] : function_table)
      if (n == name) return &info;
    return nullptr;
  }
};

// Texts used for synthetic vertices.
inline constexpr const char* kExternalText = "<external>";
inline constexpr const char* kDummyEntryText = "<dummy entry>";
inline constexpr const char* kDummyExitText = "<dummy exit>";

// §construction: control, data, and call passes over a validated module.
// Throws BuildError when the module contains no function definition.
ProgramGraph build_graph(const ir::IRModule& module);

struct GraphStats {
  int64_t vertex_count = 0;
  int64_t edge_count = 0;
  int32_t max_position = 0;
  int64_t kind_counts[4] = {0, 0, 0, 0};  // indexed by VertexKind
  int64_t flow_counts[3] = {0, 0, 0};     // indexed by Flow
};

GraphStats stats(const ProgramGraph& g);

// Invariant scan; returns human-readable violations (empty means clean).
std::vector<std::string> verify_graph(const ProgramGraph& g);

// Content hash over vertices and edges (the path does not participate).
uint64_t graph_hash(const ProgramGraph& g);

// One JSON line: {"path":...,"vertices":[...],"edges":[...]}, fixed field
// order, no whitespace. The inverse reconstructs the function table from the
// structure.
std::string to_jsonl(const ProgramGraph& g);
ProgramGraph from_jsonl(const std::string& line);

std::vector<ProgramGraph> load_graphs_file(const std::string& path);

std::string export_dot(const ProgramGraph& g);

}  // namespace fgml::graph
