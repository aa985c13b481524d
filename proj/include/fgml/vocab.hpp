#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fgml/common.hpp"
#include "fgml/ir.hpp"

namespace fgml::graph {
struct ProgramGraph;
struct Vertex;
}  // namespace fgml::graph

namespace fgml::vocab {

// Statement normalization: type definitions inlined, identifiers stripped to
// <%ID>, immediates abstracted to <INT>/<FLOAT>.
std::string normalize(const ir::IRInstruction& inst, const ir::IRModule& module);

// Named aggregate types are replaced by their structural definition. One
// nested level is expanded; deeper references and cycles become "opaque".
std::string inline_named_types(const std::string& type_text,
                               const ir::IRModule& module);

struct Vocabulary {
  static constexpr int32_t kUnknown = 0;
  static constexpr int32_t kId = 1;
  static constexpr int32_t kVal = 2;
  static constexpr int32_t kExternal = 3;
  static constexpr int32_t kNumReserved = 4;

  std::unordered_map<std::string, int32_t> token_to_id;  // non-reserved only
  std::vector<std::string> id_to_token;                  // dense, 0..size-1
  std::vector<int64_t> counts;
  int min_count = 1;

  int32_t size() const { return static_cast<int32_t>(id_to_token.size()); }

  int32_t lookup(const std::string& text) const {
    auto it = token_to_id.find(text);
    return it == token_to_id.end() ? kUnknown : it->second;
  }
};

// Frequency-ranked vocabulary over instruction-vertex texts. Throws
// EmptyCorpus when `graphs` is empty.
Vocabulary build_vocab(const std::vector<graph::ProgramGraph>& graphs,
                       int min_count);

int32_t encode_vertex(const graph::Vertex& v, const Vocabulary& vocab);

// token<TAB>id<TAB>count per line, reserved tokens first.
void save_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace fgml::vocab
