#include "codriver/behavior_tree.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <utility>

namespace codriver::bt {
namespace {

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Offset of the first `root [':' name] '{'`, or npos.
std::size_t find_root_block(std::string_view text) {
  for (std::size_t pos = text.find("root"); pos != std::string_view::npos;
       pos = text.find("root", pos + 1)) {
    if (pos > 0 && is_ident_char(text[pos - 1])) continue;
    std::size_t i = pos + 4;
    auto skip_ws = [&] {
      while (i < text.size() && is_space(text[i])) ++i;
    };
    skip_ws();
    if (i < text.size() && text[i] == ':') {
      ++i;
      skip_ws();
      if (i >= text.size() || !is_ident_start(text[i])) continue;
      while (i < text.size() && is_ident_char(text[i])) ++i;
      skip_ws();
    } else if (i < text.size() && is_ident_char(text[i])) {
      continue;
    }
    if (i < text.size() && text[i] == '{') return pos;
  }
  return std::string_view::npos;
}

enum class Tok { ident, string, integer, real, lbrace, rbrace, colon, equals, end };

struct Token {
  Tok type = Tok::end;
  std::string text;
  std::int64_t integer = 0;
  double real = 0.0;
  std::size_t offset = 0;
};

class Lexer {
 public:
  Lexer(std::string_view src, std::size_t start) : src_(src), pos_(start) {}

  Token next() {
    skip_trivia();
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    switch (c) {
      case '{': ++pos_; t.type = Tok::lbrace; return t;
      case '}': ++pos_; t.type = Tok::rbrace; return t;
      case ':': ++pos_; t.type = Tok::colon; return t;
      case '=': ++pos_; t.type = Tok::equals; return t;
      case '"': return lex_string(t);
      default: break;
    }
    if (is_ident_start(c)) {
      const std::size_t begin = pos_;
      while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
      t.type = Tok::ident;
      t.text = std::string(src_.substr(begin, pos_ - begin));
      return t;
    }
    if (c == '-' || c == '+' || (c >= '0' && c <= '9')) return lex_number(t);
    fail(Errc::malformed_entry, "unexpected character '" + std::string(1, c) + "'", pos_);
  }

  [[noreturn]] static void fail(Errc code, const std::string& msg, std::size_t offset) {
    throw TreeError(code, msg + " at offset " + std::to_string(offset));
  }

 private:
  void skip_trivia() {
    while (pos_ < src_.size()) {
      if (is_space(src_[pos_])) {
        ++pos_;
      } else if (src_[pos_] == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Token lex_string(Token& t) {
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= src_.size()) fail(Errc::malformed_entry, "unterminated string", t.offset);
      const char c = src_[pos_++];
      if (c == '"') break;
      if (c == '\n' || c == '\r') fail(Errc::malformed_entry, "newline in string", t.offset);
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= src_.size()) fail(Errc::malformed_entry, "unterminated string", t.offset);
      switch (src_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail(Errc::malformed_entry, "bad escape", pos_ - 1);
      }
    }
    t.type = Tok::string;
    t.text = std::move(out);
    return t;
  }

  Token lex_number(Token& t) {
    const std::size_t begin = pos_;
    if (src_[pos_] == '-' || src_[pos_] == '+') ++pos_;
    auto digits = [&] {
      const std::size_t d = pos_;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
      return pos_ - d;
    };
    if (digits() == 0) fail(Errc::malformed_entry, "bad number", begin);
    bool is_real = false;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      is_real = true;
      if (digits() == 0) fail(Errc::malformed_entry, "bad number", begin);
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      is_real = true;
      if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) ++pos_;
      if (digits() == 0) fail(Errc::malformed_entry, "bad number", begin);
    }
    if (pos_ < src_.size() && is_ident_char(src_[pos_])) {
      fail(Errc::malformed_entry, "bad number", begin);
    }
    std::string_view lit = src_.substr(begin, pos_ - begin);
    if (lit.front() == '+') lit.remove_prefix(1);
    const char* first = lit.data();
    const char* last = lit.data() + lit.size();
    if (is_real) {
      auto [p, ec] = std::from_chars(first, last, t.real);
      if (ec != std::errc{} || p != last || !std::isfinite(t.real)) {
        fail(Errc::malformed_entry, "number out of range", begin);
      }
      t.type = Tok::real;
    } else {
      auto [p, ec] = std::from_chars(first, last, t.integer);
      if (ec != std::errc{} || p != last) fail(Errc::malformed_entry, "integer overflow", begin);
      t.type = Tok::integer;
    }
    return t;
  }

  std::string_view src_;
  std::size_t pos_;
};

class Parser {
 public:
  Parser(std::string_view src, std::size_t start) : lex_(src, start) {}

  Tree parse_tree() {
    Token head = lex_.next();  // 'root', located by find_root_block
    Tree tree;
    tree.root = parse_node(NodeKind::root, head, lex_.next());
    return tree;
  }

 private:
  // `head` is the kind keyword; `after` is the token that followed it.
  Node parse_node(NodeKind kind, const Token& head, Token after) {
    Node node;
    node.kind = kind;
    if (after.type == Tok::colon) {
      Token name = lex_.next();
      if (name.type != Tok::ident) fail_at(name, "expected name");
      node.name = name.text;
      after = lex_.next();
    }
    if (after.type != Tok::lbrace) fail_at(after, "expected '{'");

    std::set<std::pair<Leaf::Kind, std::string>> keys;
    while (true) {
      Token e = lex_.next();
      if (e.type == Tok::rbrace) return node;
      if (e.type == Tok::end) Lexer::fail(Errc::unbalanced_braces, "unclosed '{'", head.offset);
      if (e.type != Tok::ident) fail_at(e, "expected entry");
      Entry entry = parse_entry(e);
      if (const auto* leaf = std::get_if<Leaf>(&entry)) {
        if (!keys.emplace(leaf->kind, leaf->key).second) {
          Lexer::fail(Errc::duplicate_key, "duplicate key '" + leaf->key + "'", e.offset);
        }
      }
      node.entries.push_back(std::move(entry));
    }
  }

  Entry parse_entry(const Token& first) {
    Token t = lex_.next();
    if (t.type == Tok::equals) return Leaf{Leaf::Kind::property, first.text, parse_value()};
    if (first.text == "sequence" && (t.type == Tok::lbrace || t.type == Tok::colon)) {
      return parse_node(NodeKind::sequence, first, std::move(t));
    }
    if ((first.text == "condition" || first.text == "action") && t.type == Tok::colon) {
      Token key = lex_.next();
      if (key.type != Tok::ident) fail_at(key, "expected key");
      Token eq = lex_.next();
      if (eq.type != Tok::equals) fail_at(eq, "expected '='");
      const auto kind = first.text == "condition" ? Leaf::Kind::condition : Leaf::Kind::action;
      return Leaf{kind, key.text, parse_value()};
    }
    if (t.type == Tok::end) fail_at(t, "unexpected end");
    Lexer::fail(Errc::malformed_entry, "malformed entry '" + first.text + "'", first.offset);
  }

  Value parse_value() {
    Token v = lex_.next();
    switch (v.type) {
      case Tok::string: return std::move(v.text);
      case Tok::integer: return v.integer;
      case Tok::real: return v.real;
      default: fail_at(v, "expected value");
    }
  }

  // Running out of input inside a block is a brace error, anything else malformed.
  [[noreturn]] static void fail_at(const Token& t, const std::string& msg) {
    Lexer::fail(t.type == Tok::end ? Errc::unbalanced_braces : Errc::malformed_entry, msg,
                t.offset);
  }

  Lexer lex_;
};

}  // namespace

std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::no_root_block: return "NoRootBlock";
    case Errc::unbalanced_braces: return "UnbalancedBraces";
    case Errc::malformed_entry: return "MalformedEntry";
    case Errc::duplicate_key: return "DuplicateKey";
    case Errc::missing_field: return "MissingField";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::bad_enum: return "BadEnum";
  }
  return "Unknown";
}

Tree parse(std::string_view text) {
  const std::size_t start = find_root_block(text);
  if (start == std::string_view::npos) {
    throw TreeError(Errc::no_root_block, "no 'root {' block found");
  }
  return Parser(text, start).parse_tree();
}

std::string format_number(std::int64_t v) { return std::to_string(v); }

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string out(buf, end);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string format_value(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return quote(x);
        } else {
          return format_number(x);
        }
      },
      v);
}

std::string_view kind_keyword(NodeKind k) {
  switch (k) {
    case NodeKind::root: return "root";
    case NodeKind::sequence: return "sequence";
    case NodeKind::condition: return "condition";
    case NodeKind::action: return "action";
  }
  return "";
}

void write_node(const Node& node, int depth, std::string& out) {
  const std::string indent(2 * depth, ' ');
  out += indent;
  out += kind_keyword(node.kind);
  if (!node.name.empty()) {
    out += ':';
    out += node.name;
  }
  out += " {\n";
  for (const Entry& e : node.entries) {
    if (const auto* child = std::get_if<Node>(&e)) {
      write_node(*child, depth + 1, out);
      continue;
    }
    const auto& leaf = std::get<Leaf>(e);
    out += indent;
    out += "  ";
    if (leaf.kind == Leaf::Kind::condition) out += "condition:";
    if (leaf.kind == Leaf::Kind::action) out += "action:";
    out += leaf.key;
    out += " = ";
    out += format_value(leaf.value);
    out += '\n';
  }
  out += indent;
  out += "}\n";
}

template <class Fn>
void for_each_leaf(const Node& node, Fn&& fn) {
  for (const Entry& e : node.entries) {
    if (const auto* child = std::get_if<Node>(&e)) {
      for_each_leaf(*child, fn);
    } else {
      fn(std::get<Leaf>(e));
    }
  }
}

// First leaf of the given kind and key, depth-first.
const Leaf* find_leaf(const Node& root, Leaf::Kind kind, std::string_view key) {
  const Leaf* found = nullptr;
  for_each_leaf(root, [&](const Leaf& leaf) {
    if (!found && leaf.kind == kind && leaf.key == key) found = &leaf;
  });
  return found;
}

[[noreturn]] void field_error(Errc code, std::string_view key, std::string_view what) {
  throw TreeError(code, std::string(key) + ": " + std::string(what));
}

double number_field(const Node& root, std::string_view key) {
  const Leaf* leaf = find_leaf(root, Leaf::Kind::action, key);
  if (!leaf) field_error(Errc::missing_field, key, "missing action");
  if (const auto* i = std::get_if<std::int64_t>(&leaf->value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&leaf->value)) return *d;
  field_error(Errc::out_of_range, key, "expected a number");
}

}  // namespace

std::string serialize(const Tree& tree) {
  std::string out;
  write_node(tree.root, 0, out);
  return out;
}

SceneLabels labels_from_tree(const Tree& tree) {
  SceneLabels labels;
  for (Category c : kCategories) {
    const std::string_view key = category_name(c);
    const Leaf* leaf = find_leaf(tree.root, Leaf::Kind::condition, key);
    if (!leaf) field_error(Errc::missing_field, key, "missing condition");
    const auto* s = std::get_if<std::string>(&leaf->value);
    if (!s) field_error(Errc::bad_enum, key, "expected a label string");
    auto idx = parse_label(c, *s);
    if (!idx) field_error(Errc::bad_enum, key, "unknown label '" + *s + "'");
    set_label_index(labels, c, *idx);
  }
  return labels;
}

Instruction directive_from_tree(const Tree& tree) {
  Instruction out;
  out.labels = labels_from_tree(tree);

  const Leaf* ct = find_leaf(tree.root, Leaf::Kind::action, "control_type");
  if (!ct) field_error(Errc::missing_field, "control_type", "missing action");
  const auto* s = std::get_if<std::string>(&ct->value);
  if (!s) field_error(Errc::bad_enum, "control_type", "expected a tier name");
  auto tier = parse_control_type(*s);
  if (!tier) field_error(Errc::bad_enum, "control_type", "unknown tier '" + *s + "'");

  BehaviorDirective& d = out.directive;
  d.control_type = *tier;
  d.max_speed = number_field(tree.root, "max_speed");
  d.max_brake = number_field(tree.root, "max_brake");
  d.max_throttle = number_field(tree.root, "max_throttle");
  d.max_acceleration = number_field(tree.root, "max_acceleration");
  d.max_steering_speed = number_field(tree.root, "max_steering_speed");
  if (auto bad = directive_violation(d)) field_error(Errc::out_of_range, *bad, "out of range");
  return out;
}

Tree make_instruction_tree(const SceneLabels& labels, const BehaviorDirective& d) {
  Node env{NodeKind::sequence, "environment_analysis", {}};
  for (Category c : kCategories) {
    env.entries.emplace_back(Leaf{Leaf::Kind::condition, std::string(category_name(c)),
                                  std::string(label_name(c, label_index(labels, c)))});
  }
  Node act{NodeKind::sequence, "driving_suggestion", {}};
  auto action = [&](std::string key, Value v) {
    act.entries.emplace_back(Leaf{Leaf::Kind::action, std::move(key), std::move(v)});
  };
  action("control_type", std::string(to_string(d.control_type)));
  // Whole km/h speeds are written as integers.
  if (d.max_speed == std::floor(d.max_speed) && std::abs(d.max_speed) < 1e15) {
    action("max_speed", static_cast<std::int64_t>(d.max_speed));
  } else {
    action("max_speed", d.max_speed);
  }
  action("max_brake", d.max_brake);
  action("max_throttle", d.max_throttle);
  action("max_acceleration", d.max_acceleration);
  action("max_steering_speed", d.max_steering_speed);

  Tree tree;
  tree.root.entries.emplace_back(std::move(env));
  tree.root.entries.emplace_back(std::move(act));
  return tree;
}

}  // namespace codriver::bt
