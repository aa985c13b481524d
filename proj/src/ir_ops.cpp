#include <map>
#include <set>
#include <sstream>

#include "fgml/ir.hpp"

namespace fgml::ir {

namespace {

bool label_needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
          c == '$' || c == '.' || c == '_'))
      return true;
  return false;
}

std::string label_ref(const std::string& label) {
  if (label_needs_quotes(label)) return "%\"" + label + "\"";
  return "%" + label;
}

std::string operand_ref(const Operand& op) {
  switch (op.kind) {
    case OperandKind::Constant:
      return op.value_text();
    case OperandKind::Label:
      return label_ref(op.text);
    default:
      return op.text;
  }
}

std::string strip_pointer(const std::string& t) {
  if (!t.empty() && t.back() == '*') return t.substr(0, t.size() - 1);
  return t;
}

}  // namespace

std::string print_instruction(const IRInstruction& inst) {
  if (inst.lossy) return inst.raw_text;
  std::ostringstream os;
  if (inst.result) os << *inst.result << " = ";
  const auto& ops = inst.operands;
  const std::string& oc = inst.opcode;

  if (oc == "ret") {
    if (ops.empty())
      os << "ret void";
    else
      os << "ret " << ops[0].type_text << " " << operand_ref(ops[0]);
  } else if (oc == "unreachable") {
    os << "unreachable";
  } else if (oc == "br") {
    if (ops.size() == 1) {
      os << "br label " << label_ref(ops[0].text);
    } else {
      os << "br " << ops[0].type_text << " " << operand_ref(ops[0]) << ", label "
         << label_ref(ops[1].text) << ", label " << label_ref(ops[2].text);
    }
  } else if (oc == "switch") {
    os << "switch " << ops[0].type_text << " " << operand_ref(ops[0])
       << ", label " << label_ref(ops[1].text) << " [";
    for (size_t i = 2; i + 1 < ops.size(); i += 2) {
      os << " " << ops[i].type_text << " " << operand_ref(ops[i]) << ", label "
         << label_ref(ops[i + 1].text);
    }
    os << " ]";
  } else if (oc == "phi") {
    os << "phi " << inst.result_type.value_or("");
    for (size_t i = 0; i + 1 < ops.size(); i += 2) {
      os << (i == 0 ? " " : ", ") << "[ " << operand_ref(ops[i]) << ", "
         << label_ref(ops[i + 1].text) << " ]";
    }
  } else if (oc == "call") {
    os << "call " << inst.result_type.value_or("void") << " " << ops[0].text
       << "(";
    for (size_t i = 1; i < ops.size(); ++i) {
      if (i > 1) os << ", ";
      os << ops[i].type_text << " " << operand_ref(ops[i]);
    }
    os << ")";
  } else if (oc == "load") {
    os << "load " << inst.result_type.value_or("") << ", " << ops[0].type_text
       << " " << operand_ref(ops[0]);
  } else if (oc == "store") {
    os << "store " << ops[0].type_text << " " << operand_ref(ops[0]) << ", "
       << ops[1].type_text << " " << operand_ref(ops[1]);
  } else if (oc == "alloca") {
    os << "alloca " << strip_pointer(inst.result_type.value_or(""));
    if (!ops.empty())
      os << ", " << ops[0].type_text << " " << operand_ref(ops[0]);
  } else if (oc == "getelementptr") {
    os << "getelementptr " << strip_pointer(inst.result_type.value_or(""));
    for (const auto& op : ops)
      os << ", " << op.type_text << " " << operand_ref(op);
  } else if (oc == "select") {
    os << "select";
    for (size_t i = 0; i < ops.size(); ++i)
      os << (i == 0 ? " " : ", ") << ops[i].type_text << " "
         << operand_ref(ops[i]);
  } else if (oc.rfind("icmp", 0) == 0 || oc.rfind("fcmp", 0) == 0) {
    os << oc << " " << ops[0].type_text << " " << operand_ref(ops[0]) << ", "
       << operand_ref(ops[1]);
  } else if (ops.size() == 1 && inst.result_type &&
             (oc == "trunc" || oc == "zext" || oc == "sext" ||
              oc == "fptrunc" || oc == "fpext" || oc == "fptoui" ||
              oc == "fptosi" || oc == "uitofp" || oc == "sitofp" ||
              oc == "ptrtoint" || oc == "inttoptr" || oc == "bitcast" ||
              oc == "addrspacecast")) {
    os << oc << " " << ops[0].type_text << " " << operand_ref(ops[0]) << " to "
       << *inst.result_type;
  } else {
    // binary arithmetic and anything with the uniform "op ty a, b" shape
    os << oc << " " << (ops.empty() ? inst.result_type.value_or("") : ops[0].type_text);
    for (size_t i = 0; i < ops.size(); ++i)
      os << (i == 0 ? " " : ", ") << operand_ref(ops[i]);
  }
  return os.str();
}

std::string print_module(const IRModule& module) {
  std::ostringstream os;
  for (const auto& t : module.named_types)
    os << t.name << " = type " << t.definition << "\n";
  if (!module.named_types.empty()) os << "\n";
  for (const auto& g : module.globals) {
    os << g.name << " = " << (g.is_constant ? "constant " : "global ")
       << g.type_text;
    if (!g.initializer.empty()) os << " " << g.initializer;
    os << "\n";
  }
  if (!module.globals.empty()) os << "\n";
  for (const auto& fn : module.functions) {
    if (!fn.is_definition) {
      os << "declare " << fn.return_type << " " << fn.name << "(";
      for (size_t i = 0; i < fn.params.size(); ++i) {
        if (i) os << ", ";
        os << fn.params[i].second;
      }
      os << ")\n\n";
      continue;
    }
    os << "define " << (fn.is_externally_visible ? "" : "internal ")
       << fn.return_type << " " << fn.name << "(";
    for (size_t i = 0; i < fn.params.size(); ++i) {
      if (i) os << ", ";
      os << fn.params[i].second;
      if (!fn.params[i].first.empty()) os << " " << fn.params[i].first;
    }
    os << ") {\n";
    for (const auto& bb : fn.blocks) {
      if (label_needs_quotes(bb.label))
        os << "\"" << bb.label << "\":\n";
      else
        os << bb.label << ":\n";
      for (const auto& inst : bb.instructions)
        os << "  " << print_instruction(inst) << "\n";
    }
    os << "}\n\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Validation

namespace {

const char* severity_name(Severity s) {
  return s == Severity::Error ? "error" : "warning";
}

void add(std::vector<Diagnostic>& out, DiagCode code, std::string subject,
         std::string message, int line) {
  out.push_back(Diagnostic{code, Severity::Error, std::move(subject),
                           std::move(message), line, 1});
}

}  // namespace

std::string Diagnostic::format(const std::string& path) const {
  std::ostringstream os;
  os << path << ":" << line << ":" << col << ": " << severity_name(severity)
     << ": " << message;
  return os.str();
}

std::vector<Diagnostic> validate(const IRModule& module) {
  std::vector<Diagnostic> out;
  std::set<std::string> fn_names;
  for (const auto& fn : module.functions) {
    if (!fn_names.insert(fn.name).second)
      add(out, DiagCode::DuplicateFunction, fn.name,
          "duplicate function " + fn.name, fn.line);
    if (!fn.is_definition) continue;

    if (fn.blocks.empty()) {
      add(out, DiagCode::EmptyDefinition, fn.name,
          "definition of " + fn.name + " has no blocks", fn.line);
      continue;
    }
    std::set<std::string> labels;
    for (const auto& bb : fn.blocks) {
      if (!labels.insert(bb.label).second)
        add(out, DiagCode::DuplicateBlockLabel, bb.label,
            "duplicate block label %" + bb.label + " in " + fn.name, bb.line);
    }
    std::set<std::string> results;
    for (const auto& bb : fn.blocks) {
      if (bb.instructions.empty()) {
        add(out, DiagCode::EmptyBlock, bb.label,
            "block %" + bb.label + " in " + fn.name + " is empty", bb.line);
        continue;
      }
      for (size_t i = 0; i < bb.instructions.size(); ++i) {
        const auto& inst = bb.instructions[i];
        bool last = i + 1 == bb.instructions.size();
        if (last && !inst.is_terminator())
          add(out, DiagCode::MissingTerminator, bb.label,
              "block %" + bb.label + " in " + fn.name +
                  " does not end with a terminator",
              inst.line);
        if (!last && inst.is_terminator())
          add(out, DiagCode::TerminatorNotLast, bb.label,
              "terminator before end of block %" + bb.label + " in " + fn.name,
              inst.line);
        if (inst.result && !results.insert(*inst.result).second)
          add(out, DiagCode::DuplicateResult, *inst.result,
              *inst.result + " defined more than once in " + fn.name,
              inst.line);
        bool may_have_labels =
            inst.is_terminator() || inst.opcode == "phi" || inst.lossy;
        for (const auto& op : inst.operands) {
          if (op.kind != OperandKind::Label) continue;
          if (!may_have_labels)
            add(out, DiagCode::LabelOperandMisplaced, op.text,
                "label operand %" + op.text + " outside terminator/phi",
                inst.line);
          if (!labels.count(op.text))
            add(out, DiagCode::UndefinedBlockLabel, op.text,
                "reference to undefined block label %" + op.text + " in " +
                    fn.name,
                inst.line);
        }
      }
    }
  }
  return out;
}

IRModule parse_ir(std::string_view source, const std::string& path) {
  IRModule m = parse_raw(source, path);
  auto diags = validate(m);
  std::string msg;
  int errors = 0;
  for (const auto& d : diags) {
    if (d.severity != Severity::Error) continue;
    if (errors) msg += "\n";
    msg += d.format(path.empty() ? "<input>" : path);
    ++errors;
  }
  if (errors) throw ValidationError(msg);
  return m;
}

// ---------------------------------------------------------------------------
// Structural equality (ignores raw text and source locations)

bool structurally_equal(const IRInstruction& a, const IRInstruction& b) {
  return a.opcode == b.opcode && a.result == b.result &&
         a.result_type == b.result_type && a.operands == b.operands &&
         a.lossy == b.lossy && a.block_label == b.block_label &&
         a.index_in_block == b.index_in_block;
}

bool structurally_equal(const IRModule& a, const IRModule& b) {
  if (a.functions.size() != b.functions.size()) return false;
  if (a.globals.size() != b.globals.size()) return false;
  if (a.named_types.size() != b.named_types.size()) return false;
  if (a.unresolved_callees != b.unresolved_callees) return false;
  for (size_t i = 0; i < a.named_types.size(); ++i) {
    if (a.named_types[i].name != b.named_types[i].name ||
        a.named_types[i].definition != b.named_types[i].definition)
      return false;
  }
  for (size_t i = 0; i < a.globals.size(); ++i) {
    const auto& x = a.globals[i];
    const auto& y = b.globals[i];
    if (x.name != y.name || x.type_text != y.type_text ||
        x.initializer != y.initializer || x.is_constant != y.is_constant)
      return false;
  }
  for (size_t i = 0; i < a.functions.size(); ++i) {
    const auto& f = a.functions[i];
    const auto& g = b.functions[i];
    if (f.name != g.name || f.is_definition != g.is_definition ||
        f.is_externally_visible != g.is_externally_visible ||
        f.params != g.params || f.return_type != g.return_type ||
        f.blocks.size() != g.blocks.size())
      return false;
    for (size_t j = 0; j < f.blocks.size(); ++j) {
      const auto& p = f.blocks[j];
      const auto& q = g.blocks[j];
      if (p.label != q.label || p.instructions.size() != q.instructions.size())
        return false;
      for (size_t k = 0; k < p.instructions.size(); ++k)
        if (!structurally_equal(p.instructions[k], q.instructions[k]))
          return false;
    }
  }
  return true;
}

}  // namespace fgml::ir
