#pragma once

// Declarative behavior-tree payload exchanged between the scene analyzer and
// the pipeline. Grammar:
//
//   tree     := <prose> root-node <prose>
//   node     := ('root' | 'sequence') [':' name] '{' entry* '}'
//   entry    := node | leaf | key '=' value
//   leaf     := ('condition' | 'action') ':' key '=' value
//   value    := "string" | number
//
// '#' starts a line comment outside of strings. Only the first balanced root
// block in the input is read; text around it is ignored.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "codriver/error.hpp"
#include "codriver/labels.hpp"

namespace codriver::bt {

enum class NodeKind : std::uint8_t { root, sequence, condition, action };

/// Integers and reals are distinct so that `60` and `2.0` survive a round trip.
using Value = std::variant<std::string, std::int64_t, double>;

struct Node;

/// A `condition:key = value`, `action:key = value`, or bare `key = value` entry.
struct Leaf {
  enum class Kind : std::uint8_t { property, condition, action };
  Kind kind = Kind::property;
  std::string key;
  Value value;

  friend bool operator==(const Leaf&, const Leaf&) = default;
};

struct Node {
  NodeKind kind = NodeKind::root;
  std::string name;
  std::vector<std::variant<Node, Leaf>> entries;

  friend bool operator==(const Node&, const Node&) = default;
};

using Entry = std::variant<Node, Leaf>;

struct Tree {
  Node root;
  friend bool operator==(const Tree&, const Tree&) = default;
};

enum class Errc : std::uint8_t {
  no_root_block,
  unbalanced_braces,
  malformed_entry,
  duplicate_key,
  missing_field,
  out_of_range,
  bad_enum,
};

std::string_view to_string(Errc e);

class TreeError : public Error {
 public:
  TreeError(Errc code, const std::string& what) : Error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

Tree parse(std::string_view text);

/// Canonical form: two-space indentation, one entry per line, double-quoted
/// strings, shortest round-trip numbers (reals always carry a '.' or exponent).
std::string serialize(const Tree& tree);

std::string format_number(std::int64_t v);
std::string format_number(double v);

/// Environment labels and parameter levels carried by an instruction tree.
struct Instruction {
  SceneLabels labels;
  BehaviorDirective directive;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Reads the five `condition:` labels. Extra keys are ignored.
SceneLabels labels_from_tree(const Tree& tree);

/// Reads all five conditions and six actions.
/// Throws TreeError with missing_field, out_of_range or bad_enum.
Instruction directive_from_tree(const Tree& tree);

/// Builds the canonical two-sequence instruction tree.
Tree make_instruction_tree(const SceneLabels& labels, const BehaviorDirective& directive);

}  // namespace codriver::bt
