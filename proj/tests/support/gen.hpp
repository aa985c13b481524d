#pragma once

#include <string>

#include "fgml/common.hpp"
#include "fgml/graph.hpp"

namespace fgml::testgen {

struct GenOptions {
  int max_functions = 2;
  int instr_budget_min = 8;
  int instr_budget_max = 40;
  int max_depth = 2;
  double dup_prob = 0.45;     // replay an earlier pure expression
  double call_prob = 0.25;
  double memory_prob = 0.3;
  double float_prob = 0.3;
  double global_prob = 0.5;
  double switch_prob = 0.15;
  double phi_prob = 0.5;
};

// Random well-formed module in the textual IR subset. Structured control
// flow (diamonds, while loops, switches), SSA names, optional helper
// functions, external declarations, and planted duplicate expressions.
std::string random_module_text(Rng& rng, const GenOptions& opt = {});

// k nested while loops with a value defined before the nest and used after
// it, so liveness has to cross every back edge. Loop connectedness d(G) = k
// by construction.
std::string loop_nest_module_text(int depth, int body_len = 2);

// Random single-function control-flow graph built directly as a
// ProgramGraph: instruction vertices 1..k, dense successor positions, entry
// at vertex 1.
graph::ProgramGraph random_cfg_graph(Rng& rng, int max_vertices);

// random_module_text -> parse -> build.
graph::ProgramGraph random_program_graph(Rng& rng, const GenOptions& opt = {});

}  // namespace fgml::testgen
