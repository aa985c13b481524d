#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fgml/common.hpp"
#include "fgml/graph.hpp"

namespace fgml::analysis {

enum class AnalysisTask { Reachability, DomTree, DataDep, Liveness, Subexpressions };

inline constexpr AnalysisTask kAllTasks[] = {
    AnalysisTask::Reachability, AnalysisTask::DomTree, AnalysisTask::DataDep,
    AnalysisTask::Liveness, AnalysisTask::Subexpressions};

const char* task_name(AnalysisTask t);
AnalysisTask parse_task(const std::string& name);

// The vertex kind that may carry positive labels for a task.
graph::VertexKind task_label_kind(AnalysisTask t);

struct AnalysisResult {
  AnalysisTask task = AnalysisTask::Reachability;
  int32_t root = 0;
  BitVec labels;  // length |V|
  int steps = 0;  // full fixpoint sweeps (or max frontier depth for closures)
};

// Forward closure of the root over control edges.
AnalysisResult reachability(const graph::ProgramGraph& g, int32_t root);

// Dominators of the root relative to its function entry.
AnalysisResult dominators(const graph::ProgramGraph& g, int32_t root);

// Backward closure over statement def-use chains.
AnalysisResult datadep(const graph::ProgramGraph& g, int32_t root);

// Variables live out of the root statement.
AnalysisResult liveness(const graph::ProgramGraph& g, int32_t root);

// Statements computing the same expression as the root.
AnalysisResult subexpressions(const graph::ProgramGraph& g, int32_t root);

AnalysisResult run_analysis(const graph::ProgramGraph& g, AnalysisTask task,
                            int32_t root);

std::vector<int32_t> eligible_roots(const graph::ProgramGraph& g,
                                    AnalysisTask task);

// The (operation, type, operand identity) key used by the subexpression
// analysis; nullopt when the vertex has no expression key.
std::optional<std::string> expression_key(const graph::ProgramGraph& g,
                                          int32_t vertex);

}  // namespace fgml::analysis
