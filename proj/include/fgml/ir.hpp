#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fgml/common.hpp"

namespace fgml::ir {

enum class OperandKind { Variable, Constant, FunctionRef, Label };

// One instruction operand. `text` is the canonical spelling: "%x" for
// variables, "type literal" for constants (e.g. "i32 0"), "@f" for function
// references, and the bare label name for labels.
struct Operand {
  OperandKind kind = OperandKind::Variable;
  std::string text;
  std::string type_text;

  // Constant spelling without the leading type.
  std::string value_text() const {
    if (kind == OperandKind::Constant && text.size() > type_text.size())
      return text.substr(type_text.size() + 1);
    return text;
  }

  bool operator==(const Operand&) const = default;
};

struct IRInstruction {
  std::string opcode;  // "add", "icmp slt", "br", ... (predicate folded in)
  std::optional<std::string> result;       // "%x"
  std::optional<std::string> result_type;  // "i32"
  std::vector<Operand> operands;           // order exactly as written
  std::string raw_text;                    // trimmed source line(s)
  std::string block_label;
  int index_in_block = 0;
  bool lossy = false;  // unknown opcode parsed best-effort
  int line = 0;

  bool is_terminator() const {
    return opcode == "ret" || opcode == "br" || opcode == "switch" ||
           opcode == "unreachable";
  }
};

struct IRBlock {
  std::string label;
  std::vector<IRInstruction> instructions;
  int line = 0;
};

struct IRFunction {
  std::string name;  // "@f"
  bool is_definition = false;
  bool is_externally_visible = true;
  std::vector<std::pair<std::string, std::string>> params;  // (name, type)
  std::vector<IRBlock> blocks;
  std::string return_type = "void";
  int line = 0;
};

struct GlobalConstant {
  std::string name;  // "@g"
  std::string type_text;
  std::string initializer;
  bool is_constant = false;  // `constant` vs `global`
  int line = 0;
};

struct NamedType {
  std::string name;  // "%struct.foo"
  std::string definition;
};

struct IRModule {
  std::vector<IRFunction> functions;
  std::vector<GlobalConstant> globals;
  std::vector<NamedType> named_types;
  std::vector<std::string> unresolved_callees;  // sorted, unique
  std::string source_path;

  const IRFunction* find_function(const std::string& name) const {
    for (const auto& f : functions)
      if (f.name == name) return &f;
    return nullptr;
  }
  const GlobalConstant* find_global(const std::string& name) const {
    for (const auto& g : globals)
      if (g.name == name) return &g;
    return nullptr;
  }
  const NamedType* find_named_type(const std::string& name) const {
    for (const auto& t : named_types)
      if (t.name == name) return &t;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Diagnostics

enum class Severity { Error, Warning };

enum class DiagCode {
  DuplicateFunction,
  EmptyDefinition,
  EmptyBlock,
  DuplicateBlockLabel,
  MissingTerminator,
  TerminatorNotLast,
  UndefinedBlockLabel,
  DuplicateResult,
  LabelOperandMisplaced,
};

struct Diagnostic {
  DiagCode code;
  Severity severity = Severity::Error;
  std::string subject;  // the entity at fault: "%x", "@f", a block label
  std::string message;
  int line = 0;
  int col = 1;

  // "path:line:col: severity: message"
  std::string format(const std::string& path) const;

  bool operator==(const Diagnostic&) const = default;
};

// ---------------------------------------------------------------------------
// Operations

// Syntax-only parse; throws SyntaxError. Invariants are not checked.
IRModule parse_raw(std::string_view source, const std::string& path = "");

// Structural invariant checks; diagnostics are the result, never throws.
std::vector<Diagnostic> validate(const IRModule& module);

// parse_raw + validate; throws ValidationError on any error diagnostic.
IRModule parse_ir(std::string_view source, const std::string& path = "");

// Canonical printing. parse(print(m)) is structurally equal to m.
std::string print_instruction(const IRInstruction& inst);
std::string print_module(const IRModule& module);

// Structural equality: everything except raw text and source locations.
bool structurally_equal(const IRInstruction& a, const IRInstruction& b);
bool structurally_equal(const IRModule& a, const IRModule& b);

}  // namespace fgml::ir
