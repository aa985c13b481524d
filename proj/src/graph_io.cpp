#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "fgml/graph.hpp"

namespace fgml::graph {

namespace {

void json_escape(const std::string& s, std::string& out) {
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
}

// The content body shared by the serializer and the hash: everything except
// the path.
std::string json_body(const ProgramGraph& g) {
  std::string out;
  out.reserve(64 * g.vertices.size() + 48 * g.edges.size());
  out += "\"vertices\":[";
  for (size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    if (i) out += ",";
    out += "{\"id\":";
    out += std::to_string(v.id);
    out += ",\"kind\":\"";
    out += kind_name(v.kind);
    out += "\",\"text\":\"";
    json_escape(v.text, out);
    out += "\",\"function\":";
    if (v.function.empty()) {
      out += "null";
    } else {
      out += "\"";
      json_escape(v.function, out);
      out += "\"";
    }
    out += "}";
  }
  out += "],\"edges\":[";
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (i) out += ",";
    out += "{\"src\":";
    out += std::to_string(e.src);
    out += ",\"dst\":";
    out += std::to_string(e.dst);
    out += ",\"flow\":\"";
    out += flow_name(e.flow);
    out += "\",\"position\":";
    out += std::to_string(e.position);
    out += "}";
  }
  out += "]";
  return out;
}

VertexKind parse_kind(const std::string& s) {
  if (s == "instruction") return VertexKind::Instruction;
  if (s == "variable") return VertexKind::Variable;
  if (s == "constant") return VertexKind::Constant;
  if (s == "external") return VertexKind::External;
  throw std::runtime_error("unknown vertex kind: " + s);
}

Flow parse_flow(const std::string& s) {
  if (s == "control") return Flow::Control;
  if (s == "data") return Flow::Data;
  if (s == "call") return Flow::Call;
  throw std::runtime_error("unknown edge flow: " + s);
}

}  // namespace

uint64_t graph_hash(const ProgramGraph& g) { return fnv1a(json_body(g)); }

std::string to_jsonl(const ProgramGraph& g) {
  std::string out = "{\"path\":\"";
  json_escape(g.source_path, out);
  out += "\",";
  out += json_body(g);
  out += "}";
  return out;
}

ProgramGraph from_jsonl(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  ProgramGraph g;
  g.source_path = j.at("path").get<std::string>();
  for (const auto& jv : j.at("vertices")) {
    Vertex v;
    v.id = jv.at("id").get<int32_t>();
    v.kind = parse_kind(jv.at("kind").get<std::string>());
    v.text = jv.at("text").get<std::string>();
    const auto& fn = jv.at("function");
    v.function = fn.is_null() ? "" : fn.get<std::string>();
    g.vertices.push_back(std::move(v));
  }
  for (const auto& je : j.at("edges")) {
    Edge e;
    e.src = je.at("src").get<int32_t>();
    e.dst = je.at("dst").get<int32_t>();
    e.flow = parse_flow(je.at("flow").get<std::string>());
    e.position = je.at("position").get<int32_t>();
    g.edges.push_back(e);
  }

  // Rebuild the function table from the structure: the entry is the lowest
  // instruction id of a function, exits are instructions without outgoing
  // control edges, and dummy callee stand-ins are recognized by their text.
  std::vector<bool> has_control_succ(g.vertices.size(), false);
  for (const auto& e : g.edges)
    if (e.flow == Flow::Control) has_control_succ[e.src] = true;

  std::vector<std::string> order;
  std::map<std::string, FunctionInfo> info;
  for (const auto& v : g.vertices) {
    if (v.kind != VertexKind::Instruction) continue;
    auto [it, fresh] = info.try_emplace(v.function);
    if (fresh) order.push_back(v.function);
    if (it->second.entry < 0) {
      it->second.entry = v.id;
      it->second.is_definition = v.text != kDummyEntryText;
    }
    if (!has_control_succ[v.id]) it->second.exits.push_back(v.id);
  }
  for (auto& name : order)
    g.function_table.emplace_back(name, std::move(info[name]));
  return g;
}

std::vector<ProgramGraph> load_graphs_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<ProgramGraph> graphs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    graphs.push_back(from_jsonl(line));
  }
  return graphs;
}

std::string export_dot(const ProgramGraph& g) {
  std::ostringstream os;
  os << "digraph \"";
  std::string esc;
  json_escape(g.source_path, esc);
  os << esc << "\" {\n";
  for (const auto& v : g.vertices) {
    const char* shape = "box";
    if (v.kind == VertexKind::Variable) shape = "ellipse";
    if (v.kind == VertexKind::Constant) shape = "diamond";
    if (v.kind == VertexKind::External) shape = "house";
    std::string label;
    json_escape(v.text, label);
    os << "  v" << v.id << " [shape=" << shape << ", label=\"" << label
       << "\"];\n";
  }
  for (const auto& e : g.edges) {
    const char* style = "solid";
    if (e.flow == Flow::Data) style = "dashed";
    if (e.flow == Flow::Call) style = "dotted";
    os << "  v" << e.src << " -> v" << e.dst << " [style=" << style
       << ", flow=" << flow_name(e.flow);
    if (e.position > 0) os << ", label=\"" << e.position << "\"";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace fgml::graph
