#pragma once

#include "fgml/common.hpp"
#include "fgml/graph.hpp"
#include "fgml/model.hpp"

namespace fgml::oracles {

// Boolean transitive closure by repeated adjacency-matrix squaring.
BitVec reachability_oracle(const graph::ProgramGraph& g, int32_t root);

// n dominates the root iff deleting n cuts every entry-to-root path.
BitVec dominator_oracle(const graph::ProgramGraph& g, int32_t root);

// Closure over an explicitly materialized def-use matrix.
BitVec datadep_oracle(const graph::ProgramGraph& g, int32_t root);

// A variable is live out of the root iff some control path from a successor
// reaches a use without first crossing a (re)definition.
BitVec liveness_oracle(const graph::ProgramGraph& g, int32_t root);

// Quadratic pairwise expression comparison.
BitVec subexpr_oracle(const graph::ProgramGraph& g, int32_t root);

BitVec analysis_oracle(const graph::ProgramGraph& g,
                       analysis::AnalysisTask task, int32_t root);

// Plain-loop reimplementation of the message-passing forward pass, kept free
// of the production code's matrix helpers and batching choices.
std::vector<std::vector<double>> dense_propagate_reference(
    const graph::ProgramGraph& g, const std::vector<int32_t>& tokens,
    int32_t root, const model::ModelParameters& params,
    const model::ModelConfig& config);

}  // namespace fgml::oracles
