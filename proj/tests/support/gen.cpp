#include "support/gen.hpp"

#include <sstream>

#include "fgml/ir.hpp"

namespace fgml::testgen {

namespace {

struct Block {
  std::string label;
  std::vector<std::string> body;
  std::string terminator;
};

struct FunctionGen {
  Rng& rng;
  const GenOptions& opt;
  std::string name;
  const std::vector<std::string>& callables;  // earlier functions + self

  std::vector<Block> blocks;
  size_t cur = 0;
  int next_var = 0;
  int next_block = 0;
  int budget;

  std::vector<std::string> ints;    // defined i32 values (including params)
  std::vector<std::string> bools;   // i1 values
  std::vector<std::string> floats;  // double values
  std::vector<std::string> ptrs;    // i32* values
  std::vector<std::pair<std::string, std::string>> history;  // (op, "a, b")
  bool uses_globals = false;

  FunctionGen(Rng& r, const GenOptions& o, std::string n,
              const std::vector<std::string>& c)
      : rng(r), opt(o), name(std::move(n)), callables(c) {
    budget = static_cast<int>(
        rng.range(opt.instr_budget_min, opt.instr_budget_max));
  }

  std::string fresh_var() { return "%v" + std::to_string(next_var++); }
  std::string fresh_block(const char* stem) {
    return std::string(stem) + std::to_string(next_block++);
  }

  Block& here() { return blocks[cur]; }

  size_t new_block(const char* stem) {
    blocks.push_back(Block{fresh_block(stem), {}, ""});
    return blocks.size() - 1;
  }

  std::string int_operand() {
    if (!ints.empty() && rng.chance(0.7)) return rng.pick(ints);
    return std::to_string(rng.range(0, 9));
  }

  std::string float_operand() {
    if (!floats.empty() && rng.chance(0.7)) return rng.pick(floats);
    static const char* lits[] = {"1.0", "2.5", "0.5", "3.14"};
    return lits[rng.below(4)];
  }

  void emit(const std::string& line) {
    here().body.push_back(line);
    --budget;
  }

  static bool commutative(const std::string& op) {
    return op == "add" || op == "mul" || op == "and" || op == "or" ||
           op == "xor" || op == "fadd" || op == "fmul";
  }

  void emit_arith() {
    static const char* ops[] = {"add", "sub", "mul", "and", "or",
                                "xor", "shl", "ashr", "sdiv", "udiv"};
    std::string op = ops[rng.below(10)];
    std::string a = int_operand(), b = int_operand();
    std::string v = fresh_var();
    emit(v + " = " + op + " i32 " + a + ", " + b);
    history.emplace_back(op + " i32", a + ", " + b);
    ints.push_back(v);
  }

  void emit_float() {
    static const char* ops[] = {"fadd", "fsub", "fmul", "fdiv"};
    std::string op = ops[rng.below(4)];
    std::string a = float_operand(), b = float_operand();
    std::string v = fresh_var();
    emit(v + " = " + op + " double " + a + ", " + b);
    history.emplace_back(op + " double", a + ", " + b);
    floats.push_back(v);
  }

  void emit_dup() {
    if (history.empty()) {
      emit_arith();
      return;
    }
    auto [op, operands] = rng.pick(history);
    std::string v = fresh_var();
    std::string rhs = operands;
    // re-order the operands of a commutative operation half the time
    if (rng.chance(0.5)) {
      size_t comma = operands.find(", ");
      rhs = operands.substr(comma + 2) + ", " + operands.substr(0, comma);
    }
    emit(v + " = " + op + " " + rhs);
    if (op[0] == 'f')
      floats.push_back(v);
    else
      ints.push_back(v);
  }

  void emit_icmp() {
    static const char* preds[] = {"eq", "ne", "slt", "sgt", "sle", "uge"};
    std::string v = fresh_var();
    emit(v + " = icmp " + preds[rng.below(6)] + " i32 " + int_operand() + ", " +
         int_operand());
    bools.push_back(v);
  }

  void emit_select() {
    if (bools.empty()) {
      emit_icmp();
      return;
    }
    std::string v = fresh_var();
    emit(v + " = select i1 " + rng.pick(bools) + ", i32 " + int_operand() +
         ", i32 " + int_operand());
    ints.push_back(v);
  }

  void emit_cast() {
    if (bools.empty() || rng.chance(0.5)) {
      std::string v = fresh_var();
      emit(v + " = zext i32 " + int_operand() + " to i64");
      return;  // i64 values are write-only here
    }
    std::string v = fresh_var();
    emit(v + " = zext i1 " + rng.pick(bools) + " to i32");
    ints.push_back(v);
  }

  void emit_memory() {
    if (ptrs.empty() || rng.chance(0.3)) {
      std::string v = fresh_var();
      emit(v + " = alloca i32");
      ptrs.push_back(v);
      return;
    }
    switch (rng.below(3)) {
      case 0: {
        emit("store i32 " + int_operand() + ", i32* " + rng.pick(ptrs));
        break;
      }
      case 1: {
        std::string v = fresh_var();
        emit(v + " = load i32, i32* " + rng.pick(ptrs));
        ints.push_back(v);
        break;
      }
      default: {
        std::string v = fresh_var();
        emit(v + " = getelementptr i32, i32* " + rng.pick(ptrs) + ", i32 " +
             int_operand());
        ptrs.push_back(v);
        break;
      }
    }
  }

  void emit_global_use() {
    uses_globals = true;
    if (rng.chance(0.5)) {
      std::string v = fresh_var();
      emit(v + " = load i32, i32* @g0");
      ints.push_back(v);
    } else {
      emit("store i32 " + int_operand() + ", i32* @g1");
    }
  }

  void emit_call() {
    if (rng.chance(0.35) || callables.empty()) {
      std::string v = fresh_var();
      emit(v + " = call i32 @ext(i32 " + int_operand() + ")");
      ints.push_back(v);
      return;
    }
    std::string callee = rng.pick(callables);
    std::string v = fresh_var();
    emit(v + " = call i32 " + callee + "(i32 " + int_operand() + ")");
    ints.push_back(v);
  }

  void emit_one() {
    double x = rng.real();
    if (x < opt.dup_prob * 0.5) return emit_dup();
    x = rng.real();
    if (x < opt.float_prob) return emit_float();
    if (rng.chance(opt.memory_prob * 0.5)) return emit_memory();
    if (rng.chance(opt.global_prob * 0.2)) return emit_global_use();
    if (rng.chance(opt.call_prob * 0.3)) return emit_call();
    if (rng.chance(0.15)) return emit_select();
    if (rng.chance(0.1)) return emit_cast();
    if (rng.chance(0.2)) return emit_icmp();
    emit_arith();
  }

  void straight_run() {
    int n = static_cast<int>(rng.range(1, 4));
    for (int i = 0; i < n && budget > 0; ++i) emit_one();
  }

  std::string cond_var() {
    if (bools.empty() || rng.chance(0.5)) emit_icmp();
    return bools.back();
  }

  void gen_region(int depth) {
    int constructs = static_cast<int>(rng.range(1, depth == 0 ? 3 : 2));
    for (int k = 0; k < constructs && budget > 0; ++k) {
      double x = rng.real();
      if (depth < opt.max_depth && x < 0.3 && budget > 4) {
        if_else(depth);
      } else if (depth < opt.max_depth && x < 0.5 && budget > 4) {
        while_loop(depth);
      } else if (x < 0.5 + opt.switch_prob && budget > 3) {
        switch_fan();
      } else {
        straight_run();
      }
    }
  }

  void if_else(int depth) {
    std::string c = cond_var();
    size_t then_b = new_block("b");
    size_t else_b = new_block("b");
    size_t join_b = new_block("b");
    here().terminator = "br i1 " + c + ", label %" + blocks[then_b].label +
                        ", label %" + blocks[else_b].label;
    cur = then_b;
    gen_region(depth + 1);
    std::string then_exit = here().label;
    std::string then_val = ints.empty() ? "0" : ints.back();
    here().terminator = "br label %" + blocks[join_b].label;
    cur = else_b;
    gen_region(depth + 1);
    std::string else_exit = here().label;
    std::string else_val = ints.empty() ? "1" : ints.back();
    here().terminator = "br label %" + blocks[join_b].label;
    cur = join_b;
    if (rng.chance(opt.phi_prob)) {
      std::string v = fresh_var();
      emit(v + " = phi i32 [ " + then_val + ", %" + then_exit + " ], [ " +
           else_val + ", %" + else_exit + " ]");
      ints.push_back(v);
    }
  }

  void while_loop(int depth) {
    size_t header = new_block("h");
    size_t body = new_block("b");
    size_t exit = new_block("b");
    here().terminator = "br label %" + blocks[header].label;
    cur = header;
    std::string c = cond_var();
    here().terminator = "br i1 " + c + ", label %" + blocks[body].label +
                        ", label %" + blocks[exit].label;
    cur = body;
    gen_region(depth + 1);
    here().terminator = "br label %" + blocks[header].label;
    cur = exit;
  }

  void switch_fan() {
    int cases = static_cast<int>(rng.range(1, 3));
    size_t join = new_block("b");
    std::vector<size_t> arms;
    for (int k = 0; k < cases; ++k) arms.push_back(new_block("b"));
    std::ostringstream term;
    term << "switch i32 " << int_operand() << ", label %" << blocks[join].label
         << " [";
    for (int k = 0; k < cases; ++k)
      term << " i32 " << k << ", label %" << blocks[arms[k]].label;
    term << " ]";
    here().terminator = term.str();
    for (size_t arm : arms) {
      cur = arm;
      straight_run();
      here().terminator = "br label %" + blocks[join].label;
    }
    cur = join;
  }

  std::string generate(int num_params, bool externally_visible) {
    std::ostringstream os;
    os << "define " << (externally_visible ? "" : "internal ") << "i32 " << name
       << "(";
    for (int p = 0; p < num_params; ++p) {
      if (p) os << ", ";
      std::string v = "%p" + std::to_string(p);
      os << "i32 " << v;
      ints.push_back(v);
    }
    os << ") {\n";

    blocks.push_back(Block{"entry", {}, ""});
    cur = 0;
    gen_region(0);
    here().terminator = "ret i32 " + int_operand();
    // any construct block left without a terminator becomes a ret
    for (auto& b : blocks)
      if (b.terminator.empty()) b.terminator = "ret i32 0";

    for (const auto& b : blocks) {
      os << b.label << ":\n";
      for (const auto& line : b.body) os << "  " << line << "\n";
      os << "  " << b.terminator << "\n";
    }
    os << "}\n";
    return os.str();
  }
};

}  // namespace

std::string random_module_text(Rng& rng, const GenOptions& opt) {
  std::ostringstream os;
  bool any_globals = false;

  int nfuncs = static_cast<int>(rng.range(1, opt.max_functions));
  std::vector<std::string> defined;
  std::vector<std::string> bodies;
  for (int f = 0; f < nfuncs; ++f) {
    std::string name = "@f" + std::to_string(f);
    std::vector<std::string> callables = defined;
    if (rng.chance(0.3)) callables.push_back(name);  // recursion
    FunctionGen fg(rng, opt, name, callables);
    int params = static_cast<int>(rng.range(0, 2));
    bool visible = f == 0 || rng.chance(0.5);
    bodies.push_back(fg.generate(params, visible));
    any_globals |= fg.uses_globals;
    defined.push_back(name);
  }

  if (any_globals) {
    os << "@g0 = global i32 0\n";
    os << "@g1 = global i32 1\n\n";
  }
  os << "declare i32 @ext(i32)\n\n";
  for (const auto& b : bodies) os << b << "\n";
  return os.str();
}

std::string loop_nest_module_text(int depth, int body_len) {
  std::ostringstream os;
  os << "define i32 @f(i32 %n) {\n";
  os << "entry:\n";
  os << "  %a = add i32 %n, 1\n";
  os << "  br label %h1\n";
  // loop i: header h_i tests, body is loop i+1 (or the innermost block);
  // the false edge of h_{i+1} lands in l_i, the latch of loop i.
  for (int i = 1; i <= depth; ++i) {
    os << "h" << i << ":\n";
    os << "  %c" << i << " = icmp slt i32 %n, " << i << "\n";
    std::string body = i < depth ? "%h" + std::to_string(i + 1) : "%body";
    std::string exit = i == 1 ? "%after" : "%l" + std::to_string(i - 1);
    os << "  br i1 %c" << i << ", label " << body << ", label " << exit
       << "\n";
  }
  os << "body:\n";
  for (int k = 0; k < body_len; ++k)
    os << "  %t" << k << " = add i32 %n, " << (100 + k) << "\n";
  os << "  br label %l" << depth << "\n";
  for (int i = depth; i >= 1; --i) {
    os << "l" << i << ":\n";
    os << "  br label %h" << i << "\n";
  }
  os << "after:\n";
  os << "  %u = add i32 %a, 2\n";
  os << "  ret i32 %u\n";
  os << "}\n";
  return os.str();
}

graph::ProgramGraph random_cfg_graph(Rng& rng, int max_vertices) {
  using namespace fgml::graph;
  ProgramGraph g;
  g.source_path = "<random-cfg>";
  g.vertices.push_back(Vertex{0, VertexKind::External, kExternalText, ""});
  int k = static_cast<int>(rng.range(2, std::max(2, max_vertices - 1)));
  for (int i = 1; i <= k; ++i)
    g.vertices.push_back(
        Vertex{i, VertexKind::Instruction, "op", "@f"});

  FunctionInfo info;
  info.entry = 1;
  for (int i = 1; i <= k; ++i) {
    int degree = static_cast<int>(rng.below(3));
    std::vector<int32_t> targets;
    for (int d = 0; d < degree; ++d) {
      int32_t t = static_cast<int32_t>(1 + rng.below(k));
      if (std::find(targets.begin(), targets.end(), t) == targets.end())
        targets.push_back(t);
    }
    for (size_t p = 0; p < targets.size(); ++p)
      g.edges.push_back(Edge{i, targets[p], Flow::Control,
                             static_cast<int32_t>(p)});
    if (targets.empty()) info.exits.push_back(i);
  }
  g.function_table.emplace_back("@f", std::move(info));
  return g;
}

graph::ProgramGraph random_program_graph(Rng& rng, const GenOptions& opt) {
  std::string text = random_module_text(rng, opt);
  ir::IRModule m = ir::parse_ir(text, "<random-module>");
  return graph::build_graph(m);
}

}  // namespace fgml::testgen
