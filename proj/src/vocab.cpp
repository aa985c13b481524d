#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "fgml/graph.hpp"
#include "fgml/vocab.hpp"

namespace fgml::vocab {

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '$' ||
         c == '.' || c == '_';
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
}

// Classifies a bare literal spelling.
std::string normalize_literal(const std::string& lit) {
  if (lit.empty()) return lit;
  if (lit == "true" || lit == "false") return "<INT>";
  static const std::set<std::string> keep = {"null", "undef", "zeroinitializer",
                                             "poison", "none"};
  if (keep.count(lit)) return lit;
  if (lit.front() == '"' || (lit.size() > 1 && lit[0] == 'c' && lit[1] == '"'))
    return "<STR>";
  std::string_view body = lit;
  if (body[0] == '-' || body[0] == '+') body.remove_prefix(1);
  if (body.empty() || !std::isdigit(static_cast<unsigned char>(body[0])))
    return lit;  // aggregate / constant expression: handled by caller
  if (all_digits(body)) return "<INT>";
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    // hex floats carry a period or a binary exponent; plain hex is integral
    if (body.find('.') != std::string_view::npos ||
        body.find('p') != std::string_view::npos ||
        body.find('P') != std::string_view::npos)
      return "<FLOAT>";
    return "<INT>";
  }
  return "<FLOAT>";
}

// Token-level scrub for free-form text (lossy instructions, aggregate
// initializers, constant expressions): identifiers to <%ID>, immediates to
// <INT>/<FLOAT>, strings to <STR>, metadata and attribute references dropped.
std::string scrub_text(const std::string& text) {
  std::string out;
  size_t i = 0;
  auto emit = [&](std::string_view piece) {
    if (!out.empty() && !piece.empty()) {
      char p = piece[0];
      char b = out.back();
      bool tight_prev = b == '(' || b == '[' || b == '{' || b == '<';
      bool tight_next = p == ',' || p == ')' || p == ']' || p == '}' ||
                        p == '>' || p == '*' || p == '(';
      if (!tight_prev && !tight_next) out += ' ';
    }
    out += piece;
  };
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '%' || c == '@') {
      ++i;
      if (i < text.size() && text[i] == '"') {
        ++i;
        while (i < text.size() && text[i] != '"') ++i;
        if (i < text.size()) ++i;
      } else {
        while (i < text.size() && is_ident_char(text[i])) ++i;
      }
      emit("<%ID>");
      continue;
    }
    if (c == '!' || c == '#') {
      ++i;
      while (i < text.size() && is_ident_char(text[i])) ++i;
      continue;
    }
    if (c == '"' || (c == 'c' && i + 1 < text.size() && text[i + 1] == '"')) {
      if (c == 'c') ++i;
      ++i;
      while (i < text.size() && text[i] != '"') {
        if (text[i] == '\\') ++i;
        ++i;
      }
      if (i < text.size()) ++i;
      emit("<STR>");
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        ((c == '-' || c == '+') && i + 1 < text.size() &&
         std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      size_t start = i++;
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) ||
              text[i] == '.' ||
              ((text[i] == '+' || text[i] == '-') &&
               (text[i - 1] == 'e' || text[i - 1] == 'E' ||
                text[i - 1] == 'p' || text[i - 1] == 'P'))))
        ++i;
      emit(normalize_literal(text.substr(start, i - start)));
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
        c == '.') {
      size_t start = i;
      while (i < text.size() && is_ident_char(text[i])) ++i;
      emit(std::string_view(text).substr(start, i - start));
      continue;
    }
    emit(std::string_view(&text[i], 1));
    ++i;
  }
  return out;
}

std::string expand_named(const std::string& name, const ir::IRModule& module,
                         std::vector<std::string>& path, int depth);

std::string expand_in_text(const std::string& type_text,
                           const ir::IRModule& module,
                           std::vector<std::string>& path, int depth) {
  std::string out;
  size_t i = 0;
  while (i < type_text.size()) {
    char c = type_text[i];
    if (c == '%') {
      size_t start = i++;
      if (i < type_text.size() && type_text[i] == '"') {
        ++i;
        while (i < type_text.size() && type_text[i] != '"') ++i;
        if (i < type_text.size()) ++i;
      } else {
        while (i < type_text.size() && is_ident_char(type_text[i])) ++i;
      }
      out += expand_named(type_text.substr(start, i - start), module, path,
                          depth);
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

std::string expand_named(const std::string& name, const ir::IRModule& module,
                         std::vector<std::string>& path, int depth) {
  if (std::find(path.begin(), path.end(), name) != path.end()) return "opaque";
  if (depth >= 2) return "opaque";
  const auto* nt = module.find_named_type(name);
  if (!nt) return "opaque";
  path.push_back(name);
  std::string body = expand_in_text(nt->definition, module, path, depth + 1);
  path.pop_back();
  return body;
}

std::string norm_operand(const ir::Operand& op, const ir::IRModule& module) {
  using ir::OperandKind;
  switch (op.kind) {
    case OperandKind::Variable:
    case OperandKind::FunctionRef:
    case OperandKind::Label:
      return "<%ID>";
    case OperandKind::Constant: {
      std::string lit = op.value_text();
      std::string n = normalize_literal(lit);
      if (n != lit) return n;
      if (!lit.empty() &&
          (lit[0] == '[' || lit[0] == '{' || lit[0] == '<' ||
           lit.find('%') != std::string::npos ||
           lit.find('@') != std::string::npos ||
           lit.rfind("getelementptr", 0) == 0 ||
           lit.rfind("bitcast", 0) == 0))
        return scrub_text(inline_named_types(lit, module));
      return n;
    }
  }
  return "<%ID>";
}

}  // namespace

std::string inline_named_types(const std::string& type_text,
                               const ir::IRModule& module) {
  std::vector<std::string> path;
  return expand_in_text(type_text, module, path, 0);
}

std::string normalize(const ir::IRInstruction& inst,
                      const ir::IRModule& module) {
  if (inst.lossy) return scrub_text(inst.raw_text);

  std::ostringstream os;
  if (inst.result) os << "<%ID> = ";
  const auto& ops = inst.operands;
  const std::string& oc = inst.opcode;
  auto ty = [&](const std::string& t) { return inline_named_types(t, module); };
  auto val = [&](const ir::Operand& op) { return norm_operand(op, module); };

  if (oc == "ret") {
    if (ops.empty())
      os << "ret void";
    else
      os << "ret " << ty(ops[0].type_text) << " " << val(ops[0]);
  } else if (oc == "unreachable") {
    os << "unreachable";
  } else if (oc == "br") {
    if (ops.size() == 1) {
      os << "br label <%ID>";
    } else {
      os << "br " << ty(ops[0].type_text) << " " << val(ops[0])
         << ", label <%ID>, label <%ID>";
    }
  } else if (oc == "switch") {
    os << "switch " << ty(ops[0].type_text) << " " << val(ops[0])
       << ", label <%ID> [";
    for (size_t i = 2; i + 1 < ops.size(); i += 2)
      os << " " << ty(ops[i].type_text) << " " << val(ops[i])
         << ", label <%ID>";
    os << " ]";
  } else if (oc == "phi") {
    os << "phi " << ty(inst.result_type.value_or(""));
    for (size_t i = 0; i + 1 < ops.size(); i += 2)
      os << (i == 0 ? " " : ", ") << "[ " << val(ops[i]) << ", <%ID> ]";
  } else if (oc == "call") {
    os << "call " << ty(inst.result_type.value_or("void")) << " <%ID>(";
    for (size_t i = 1; i < ops.size(); ++i) {
      if (i > 1) os << ", ";
      os << ty(ops[i].type_text) << " " << val(ops[i]);
    }
    os << ")";
  } else if (oc == "load") {
    os << "load " << ty(inst.result_type.value_or("")) << ", "
       << ty(ops[0].type_text) << " " << val(ops[0]);
  } else if (oc == "store") {
    os << "store " << ty(ops[0].type_text) << " " << val(ops[0]) << ", "
       << ty(ops[1].type_text) << " " << val(ops[1]);
  } else if (oc == "alloca") {
    std::string elem = inst.result_type.value_or("");
    if (!elem.empty() && elem.back() == '*') elem.pop_back();
    os << "alloca " << ty(elem);
    if (!ops.empty()) os << ", " << ty(ops[0].type_text) << " " << val(ops[0]);
  } else if (oc == "getelementptr") {
    std::string elem = inst.result_type.value_or("");
    if (!elem.empty() && elem.back() == '*') elem.pop_back();
    os << "getelementptr " << ty(elem);
    for (const auto& op : ops)
      os << ", " << ty(op.type_text) << " " << val(op);
  } else if (oc == "select") {
    os << "select";
    for (size_t i = 0; i < ops.size(); ++i)
      os << (i == 0 ? " " : ", ") << ty(ops[i].type_text) << " " << val(ops[i]);
  } else if (oc.rfind("icmp", 0) == 0 || oc.rfind("fcmp", 0) == 0) {
    os << oc << " " << ty(ops[0].type_text) << " " << val(ops[0]) << ", "
       << val(ops[1]);
  } else if (ops.size() == 1 && inst.result_type &&
             (oc == "trunc" || oc == "zext" || oc == "sext" ||
              oc == "fptrunc" || oc == "fpext" || oc == "fptoui" ||
              oc == "fptosi" || oc == "uitofp" || oc == "sitofp" ||
              oc == "ptrtoint" || oc == "inttoptr" || oc == "bitcast" ||
              oc == "addrspacecast")) {
    os << oc << " " << ty(ops[0].type_text) << " " << val(ops[0]) << " to "
       << ty(*inst.result_type);
  } else {
    os << oc << " "
       << (ops.empty() ? ty(inst.result_type.value_or(""))
                       : ty(ops[0].type_text));
    for (size_t i = 0; i < ops.size(); ++i)
      os << (i == 0 ? " " : ", ") << val(ops[i]);
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary build_vocab(const std::vector<graph::ProgramGraph>& graphs,
                       int min_count) {
  if (graphs.empty()) throw EmptyCorpus("no graphs to build a vocabulary from");

  std::unordered_map<std::string, int64_t> freq;
  int64_t id_count = 0, val_count = 0, ext_count = 0;
  for (const auto& g : graphs) {
    for (const auto& v : g.vertices) {
      switch (v.kind) {
        case graph::VertexKind::Instruction:
          ++freq[v.text];
          break;
        case graph::VertexKind::Variable:
          ++id_count;
          break;
        case graph::VertexKind::Constant:
          ++val_count;
          break;
        case graph::VertexKind::External:
          ++ext_count;
          break;
      }
    }
  }

  std::vector<std::pair<std::string, int64_t>> kept;
  int64_t unknown_count = 0;
  for (auto& [tok, n] : freq) {
    if (n >= min_count)
      kept.emplace_back(tok, n);
    else
      unknown_count += n;
  }
  // descending frequency, lexicographic tiebreak
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count = min_count;
  v.id_to_token = {"<UNKNOWN>", "<ID>", "<VAL>", "<external>"};
  v.counts = {unknown_count, id_count, val_count, ext_count};
  for (auto& [tok, n] : kept) {
    v.token_to_id.emplace(tok, v.size());
    v.id_to_token.push_back(tok);
    v.counts.push_back(n);
  }
  return v;
}

int32_t encode_vertex(const graph::Vertex& v, const Vocabulary& vocab) {
  switch (v.kind) {
    case graph::VertexKind::Instruction:
      return vocab.lookup(v.text);
    case graph::VertexKind::Variable:
      return Vocabulary::kId;
    case graph::VertexKind::Constant:
      return Vocabulary::kVal;
    case graph::VertexKind::External:
      return Vocabulary::kExternal;
  }
  return Vocabulary::kUnknown;
}

void save_vocabulary(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int32_t i = 0; i < vocab.size(); ++i)
    out << vocab.id_to_token[i] << "\t" << i << "\t" << vocab.counts[i] << "\n";
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error("malformed vocabulary line: " + line);
    std::string tok = line.substr(0, t1);
    int32_t id = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
    int64_t count = std::stoll(line.substr(t2 + 1));
    if (id != v.size()) throw std::runtime_error("vocabulary ids must be dense");
    v.id_to_token.push_back(tok);
    v.counts.push_back(count);
    if (id >= Vocabulary::kNumReserved) v.token_to_id.emplace(tok, id);
  }
  if (v.size() < Vocabulary::kNumReserved)
    throw std::runtime_error("vocabulary missing reserved tokens");
  return v;
}

}  // namespace fgml::vocab
