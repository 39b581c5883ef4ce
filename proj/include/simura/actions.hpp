#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "simura/errors.hpp"
#include "simura/text.hpp"

// The browser action DSL: a 16-kind call-expression grammar parsed by a
// hand-rolled recursive descent (model output is never evaluated as code)
// and rendered back to one canonical line. Repetition detection and traces
// both key on the canonical form, so defaults are elided and list-vs-scalar
// spellings collapse.

namespace simura {

struct NoopAction {
  double wait_ms = 1000;
  bool operator==(const NoopAction&) const = default;
};
struct SendMsgAction {
  std::string text;
  bool operator==(const SendMsgAction&) const = default;
};
struct ScrollAction {
  double delta_x = 0;
  double delta_y = 0;
  bool operator==(const ScrollAction&) const = default;
};
struct FillAction {
  std::string bid;
  std::string value;
  bool operator==(const FillAction&) const = default;
};
struct SelectOptionAction {
  std::string bid;
  std::vector<std::string> options;  // scalar input becomes a 1-element list
  bool operator==(const SelectOptionAction&) const = default;
};
struct ClickAction {
  std::string bid;
  std::string button = "left";
  std::vector<std::string> modifiers;  // sorted canonical order, unique
  bool operator==(const ClickAction&) const = default;
};
struct DblclickAction {
  std::string bid;
  std::string button = "left";
  std::vector<std::string> modifiers;
  bool operator==(const DblclickAction&) const = default;
};
struct HoverAction {
  std::string bid;
  bool operator==(const HoverAction&) const = default;
};
struct PressAction {
  std::string bid;
  std::string key_comb;
  bool operator==(const PressAction&) const = default;
};
struct FocusAction {
  std::string bid;
  bool operator==(const FocusAction&) const = default;
};
struct ClearAction {
  std::string bid;
  bool operator==(const ClearAction&) const = default;
};
struct DragAndDropAction {
  std::string from_bid;
  std::string to_bid;
  bool operator==(const DragAndDropAction&) const = default;
};
struct UploadFileAction {
  std::string bid;
  std::vector<std::string> files;
  bool operator==(const UploadFileAction&) const = default;
};
struct GoBackAction {
  bool operator==(const GoBackAction&) const = default;
};
struct GoForwardAction {
  bool operator==(const GoForwardAction&) const = default;
};
struct GotoAction {
  std::string url;
  bool operator==(const GotoAction&) const = default;
};

using ConcreteAction =
    std::variant<NoopAction, SendMsgAction, ScrollAction, FillAction, SelectOptionAction,
                 ClickAction, DblclickAction, HoverAction, PressAction, FocusAction, ClearAction,
                 DragAndDropAction, UploadFileAction, GoBackAction, GoForwardAction, GotoAction>;

inline const std::vector<std::string>& action_names() {
  static const std::vector<std::string> names = {
      "noop",  "send_msg_to_user", "scroll", "fill",          "select_option", "click",
      "dblclick", "hover",         "press",  "focus",         "clear",         "drag_and_drop",
      "upload_file", "go_back",    "go_forward", "goto"};
  return names;
}

inline std::string action_name(const ConcreteAction& a) {
  return action_names()[a.index()];
}

// Extracts the bid(s) an action targets, empty for bid-less kinds.
inline std::vector<std::string> action_bids(const ConcreteAction& a) {
  return std::visit(
      [](const auto& v) -> std::vector<std::string> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, FillAction> || std::is_same_v<T, SelectOptionAction> ||
                      std::is_same_v<T, ClickAction> || std::is_same_v<T, DblclickAction> ||
                      std::is_same_v<T, HoverAction> || std::is_same_v<T, PressAction> ||
                      std::is_same_v<T, FocusAction> || std::is_same_v<T, ClearAction> ||
                      std::is_same_v<T, UploadFileAction>) {
          return {v.bid};
        } else if constexpr (std::is_same_v<T, DragAndDropAction>) {
          return {v.from_bid, v.to_bid};
        } else {
          return {};
        }
      },
      a);
}

// --- parsing -----------------------------------------------------------------

namespace detail {

inline const std::array<std::string_view, 4>& modifier_ranks() {
  static const std::array<std::string_view, 4> order = {"Alt", "Control", "Meta", "Shift"};
  return order;
}

inline std::vector<std::string> canonicalize_modifiers(std::vector<std::string> mods) {
  for (const auto& m : mods) {
    const auto& order = modifier_ranks();
    if (std::find(order.begin(), order.end(), m) == order.end()) {
      fail(ErrorKind::TypeError, "invalid modifier '" + m + "'");
    }
  }
  std::sort(mods.begin(), mods.end());  // Alt < Control < Meta < Shift lexicographically
  mods.erase(std::unique(mods.begin(), mods.end()), mods.end());
  return mods;
}

inline void check_button(const std::string& button) {
  if (button != "left" && button != "middle" && button != "right") {
    fail(ErrorKind::TypeError, "invalid button '" + button + "'");
  }
}

struct ArgValue {
  enum Type { Str, Num, List } type = Str;
  std::string str;
  double num = 0;
  std::vector<std::string> list;

  const char* type_name() const {
    switch (type) {
      case Str: return "string";
      case Num: return "number";
      default: return "list";
    }
  }
};

// Recursive-descent over: call := ident '(' [arg (',' arg)*] ')'
//                          arg  := value | ident '=' value
//                          value:= string | number | '[' [string (',' string)*] ']'
class ActionParser {
 public:
  explicit ActionParser(std::string_view src) : src_(src) {}

  ConcreteAction parse() {
    skip_ws();
    std::string name = parse_identifier("action name");
    skip_ws();
    expect('(');
    parse_args();
    skip_ws();
    expect(')');
    skip_ws();
    if (pos_ != src_.size()) {
      // A second well-formed call start is the "one action at a time" violation;
      // anything else is plain junk.
      size_t save = pos_;
      bool second_call = false;
      if (is_ident_start(peek())) {
        parse_identifier("trailing");
        skip_ws();
        second_call = pos_ < src_.size() && src_[pos_] == '(';
      }
      pos_ = save;
      if (second_call) {
        fail(ErrorKind::MultipleActions, "more than one action in '" + std::string(src_) + "'");
      }
      fail(ErrorKind::SyntaxError, "trailing characters after call: '" +
                                       std::string(src_.substr(pos_)) + "'");
    }
    return bind(name);
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;
  std::vector<ArgValue> positional_;
  std::map<std::string, ArgValue> keyword_;

  static bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) {
      fail(ErrorKind::SyntaxError, std::string("expected '") + c + "' at offset " +
                                       std::to_string(pos_) + " in '" + std::string(src_) + "'");
    }
    ++pos_;
  }

  std::string parse_identifier(const char* what) {
    if (!is_ident_start(peek())) {
      fail(ErrorKind::SyntaxError, std::string("expected ") + what + " at offset " +
                                       std::to_string(pos_));
    }
    size_t start = pos_;
    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
    return std::string(src_.substr(start, pos_ - start));
  }

  void parse_args() {
    skip_ws();
    if (peek() == ')') return;
    while (true) {
      skip_ws();
      if (peek() == ')') return;  // tolerate a trailing comma
      parse_arg();
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      return;
    }
  }

  void parse_arg() {
    if (is_ident_start(peek())) {
      std::string name = parse_identifier("keyword argument name");
      skip_ws();
      expect('=');
      skip_ws();
      ArgValue v = parse_value();
      if (!keyword_.emplace(name, std::move(v)).second) {
        fail(ErrorKind::SyntaxError, "duplicate keyword argument '" + name + "'");
      }
      return;
    }
    if (!keyword_.empty()) {
      fail(ErrorKind::SyntaxError, "positional argument after keyword argument");
    }
    positional_.push_back(parse_value());
  }

  ArgValue parse_value() {
    char c = peek();
    if (c == '\'' || c == '"') {
      ArgValue v;
      v.type = ArgValue::Str;
      v.str = parse_string();
      return v;
    }
    if (c == '[') return parse_list();
    if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    fail(ErrorKind::SyntaxError, std::string("expected a value at offset ") +
                                     std::to_string(pos_) + " in '" + std::string(src_) + "'");
  }

  std::string parse_string() {
    char quote = src_[pos_++];
    std::string out;
    while (pos_ < src_.size()) {
      char c = src_[pos_++];
      if (c == quote) return out;
      if (c == '\\') {
        if (pos_ >= src_.size()) break;
        char e = src_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '\\': out.push_back('\\'); break;
          case '\'': out.push_back('\''); break;
          case '"': out.push_back('"'); break;
          default: out.push_back(e); break;
        }
        continue;
      }
      out.push_back(c);
    }
    fail(ErrorKind::SyntaxError, "unterminated string literal");
  }

  ArgValue parse_number() {
    size_t start = pos_;
    if (peek() == '-' || peek() == '+') ++pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
            src_[pos_] == 'e' || src_[pos_] == 'E' ||
            ((src_[pos_] == '-' || src_[pos_] == '+') &&
             (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    std::string_view token = src_.substr(start, pos_ - start);
    ArgValue v;
    v.type = ArgValue::Num;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v.num);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      fail(ErrorKind::SyntaxError, "bad numeric literal '" + std::string(token) + "'");
    }
    return v;
  }

  ArgValue parse_list() {
    expect('[');
    ArgValue v;
    v.type = ArgValue::List;
    skip_ws();
    while (peek() != ']') {
      char c = peek();
      if (c != '\'' && c != '"') {
        fail(ErrorKind::SyntaxError, "lists may contain only string literals");
      }
      v.list.push_back(parse_string());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
      }
    }
    expect(']');
    return v;
  }

  // --- binding ---------------------------------------------------------------

  const ArgValue& positional(size_t i) const { return positional_[i]; }

  void require_arity(const std::string& name, size_t min, size_t max) const {
    if (positional_.size() < min || positional_.size() > max) {
      fail(ErrorKind::ArityError, name + "() takes " + std::to_string(min) +
                                      (min == max ? "" : ".." + std::to_string(max)) +
                                      " positional arguments, got " +
                                      std::to_string(positional_.size()));
    }
  }

  void forbid_keywords(const std::string& name) const {
    if (!keyword_.empty()) {
      fail(ErrorKind::TypeError,
           name + "() got an unexpected keyword argument '" + keyword_.begin()->first + "'");
    }
  }

  void allow_keywords(const std::string& name, std::initializer_list<const char*> allowed) const {
    for (const auto& [k, v] : keyword_) {
      bool ok = false;
      for (const char* a : allowed) {
        if (k == a) ok = true;
      }
      if (!ok) {
        fail(ErrorKind::TypeError, name + "() got an unexpected keyword argument '" + k + "'");
      }
    }
  }

  std::string as_str(const ArgValue& v, const std::string& name, const char* param) const {
    if (v.type != ArgValue::Str) {
      fail(ErrorKind::TypeError, name + "() argument '" + param + "' must be a string, got " +
                                     v.type_name());
    }
    return v.str;
  }

  double as_num(const ArgValue& v, const std::string& name, const char* param) const {
    if (v.type != ArgValue::Num) {
      fail(ErrorKind::TypeError, name + "() argument '" + param + "' must be a number, got " +
                                     v.type_name());
    }
    return v.num;
  }

  std::vector<std::string> as_str_or_list(const ArgValue& v, const std::string& name,
                                          const char* param) const {
    if (v.type == ArgValue::Str) return {v.str};
    if (v.type == ArgValue::List) return v.list;
    fail(ErrorKind::TypeError,
         name + "() argument '" + param + "' must be a string or list of strings");
  }

  const ArgValue* find_keyword(const char* k) const {
    auto it = keyword_.find(k);
    return it == keyword_.end() ? nullptr : &it->second;
  }

  ConcreteAction bind(const std::string& name) {
    if (name == "noop") {
      allow_keywords(name, {"wait_ms"});
      require_arity(name, 0, 1);
      NoopAction a;
      if (positional_.size() == 1) a.wait_ms = as_num(positional(0), name, "wait_ms");
      if (const ArgValue* kw = find_keyword("wait_ms")) {
        if (positional_.size() == 1) {
          fail(ErrorKind::TypeError, "noop() got multiple values for argument 'wait_ms'");
        }
        a.wait_ms = as_num(*kw, name, "wait_ms");
      }
      return a;
    }
    if (name == "send_msg_to_user") {
      forbid_keywords(name);
      require_arity(name, 1, 1);
      return SendMsgAction{as_str(positional(0), name, "text")};
    }
    if (name == "scroll") {
      forbid_keywords(name);
      require_arity(name, 2, 2);
      return ScrollAction{as_num(positional(0), name, "delta_x"),
                          as_num(positional(1), name, "delta_y")};
    }
    if (name == "fill") {
      forbid_keywords(name);
      require_arity(name, 2, 2);
      return FillAction{as_str(positional(0), name, "bid"), as_str(positional(1), name, "value")};
    }
    if (name == "select_option") {
      forbid_keywords(name);
      require_arity(name, 2, 2);
      return SelectOptionAction{as_str(positional(0), name, "bid"),
                                as_str_or_list(positional(1), name, "options")};
    }
    if (name == "click" || name == "dblclick") {
      allow_keywords(name, {"button", "modifiers"});
      require_arity(name, 1, 3);
      std::string bid = as_str(positional(0), name, "bid");
      std::string button = "left";
      std::vector<std::string> modifiers;
      if (positional_.size() >= 2) button = as_str(positional(1), name, "button");
      if (positional_.size() >= 3) {
        if (positional(2).type != ArgValue::List) {
          fail(ErrorKind::TypeError, name + "() argument 'modifiers' must be a list");
        }
        modifiers = positional(2).list;
      }
      if (const ArgValue* kw = find_keyword("button")) {
        if (positional_.size() >= 2) {
          fail(ErrorKind::TypeError, name + "() got multiple values for argument 'button'");
        }
        button = as_str(*kw, name, "button");
      }
      if (const ArgValue* kw = find_keyword("modifiers")) {
        if (positional_.size() >= 3) {
          fail(ErrorKind::TypeError, name + "() got multiple values for argument 'modifiers'");
        }
        if (kw->type != ArgValue::List) {
          fail(ErrorKind::TypeError, name + "() argument 'modifiers' must be a list");
        }
        modifiers = kw->list;
      }
      check_button(button);
      modifiers = canonicalize_modifiers(std::move(modifiers));
      if (name == "click") return ClickAction{std::move(bid), std::move(button), std::move(modifiers)};
      return DblclickAction{std::move(bid), std::move(button), std::move(modifiers)};
    }
    if (name == "hover") {
      forbid_keywords(name);
      require_arity(name, 1, 1);
      return HoverAction{as_str(positional(0), name, "bid")};
    }
    if (name == "press") {
      forbid_keywords(name);
      require_arity(name, 2, 2);
      return PressAction{as_str(positional(0), name, "bid"),
                         as_str(positional(1), name, "key_comb")};
    }
    if (name == "focus") {
      forbid_keywords(name);
      require_arity(name, 1, 1);
      return FocusAction{as_str(positional(0), name, "bid")};
    }
    if (name == "clear") {
      forbid_keywords(name);
      require_arity(name, 1, 1);
      return ClearAction{as_str(positional(0), name, "bid")};
    }
    if (name == "drag_and_drop") {
      forbid_keywords(name);
      require_arity(name, 2, 2);
      return DragAndDropAction{as_str(positional(0), name, "from_bid"),
                               as_str(positional(1), name, "to_bid")};
    }
    if (name == "upload_file") {
      forbid_keywords(name);
      require_arity(name, 2, 2);
      return UploadFileAction{as_str(positional(0), name, "bid"),
                              as_str_or_list(positional(1), name, "file")};
    }
    if (name == "go_back") {
      forbid_keywords(name);
      require_arity(name, 0, 0);
      return GoBackAction{};
    }
    if (name == "go_forward") {
      forbid_keywords(name);
      require_arity(name, 0, 0);
      return GoForwardAction{};
    }
    if (name == "goto") {
      forbid_keywords(name);
      require_arity(name, 1, 1);
      return GotoAction{as_str(positional(0), name, "url")};
    }
    fail(ErrorKind::UnknownAction, "unknown action '" + name + "'");
  }
};

inline std::string quote_py(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

inline std::string render_str_or_list(const std::vector<std::string>& items) {
  if (items.size() == 1) return quote_py(items[0]);
  std::string out = "[";
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += quote_py(items[i]);
  }
  out += "]";
  return out;
}

}  // namespace detail

inline ConcreteAction parse_action(std::string_view text) {
  std::string trimmed{trim(text)};
  if (trimmed.empty()) fail(ErrorKind::SyntaxError, "empty action text");
  return detail::ActionParser(trimmed).parse();
}

// Deterministic single-line form: single quotes, defaults elided, modifiers
// in canonical order, single-element lists written as bare strings.
inline std::string render_action(const ConcreteAction& a) {
  using detail::quote_py;
  using detail::render_str_or_list;
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, NoopAction>) {
          return v.wait_ms == 1000 ? "noop()" : "noop(" + format_number(v.wait_ms) + ")";
        } else if constexpr (std::is_same_v<T, SendMsgAction>) {
          return "send_msg_to_user(" + quote_py(v.text) + ")";
        } else if constexpr (std::is_same_v<T, ScrollAction>) {
          return "scroll(" + format_number(v.delta_x) + ", " + format_number(v.delta_y) + ")";
        } else if constexpr (std::is_same_v<T, FillAction>) {
          return "fill(" + quote_py(v.bid) + ", " + quote_py(v.value) + ")";
        } else if constexpr (std::is_same_v<T, SelectOptionAction>) {
          return "select_option(" + quote_py(v.bid) + ", " + render_str_or_list(v.options) + ")";
        } else if constexpr (std::is_same_v<T, ClickAction> ||
                             std::is_same_v<T, DblclickAction>) {
          std::string out =
              (std::is_same_v<T, ClickAction> ? "click(" : "dblclick(") + quote_py(v.bid);
          if (v.button != "left") out += ", button=" + quote_py(v.button);
          if (!v.modifiers.empty()) {
            out += ", modifiers=[";
            for (size_t i = 0; i < v.modifiers.size(); ++i) {
              if (i) out += ", ";
              out += quote_py(v.modifiers[i]);
            }
            out += "]";
          }
          return out + ")";
        } else if constexpr (std::is_same_v<T, HoverAction>) {
          return "hover(" + quote_py(v.bid) + ")";
        } else if constexpr (std::is_same_v<T, PressAction>) {
          return "press(" + quote_py(v.bid) + ", " + quote_py(v.key_comb) + ")";
        } else if constexpr (std::is_same_v<T, FocusAction>) {
          return "focus(" + quote_py(v.bid) + ")";
        } else if constexpr (std::is_same_v<T, ClearAction>) {
          return "clear(" + quote_py(v.bid) + ")";
        } else if constexpr (std::is_same_v<T, DragAndDropAction>) {
          return "drag_and_drop(" + quote_py(v.from_bid) + ", " + quote_py(v.to_bid) + ")";
        } else if constexpr (std::is_same_v<T, UploadFileAction>) {
          return "upload_file(" + quote_py(v.bid) + ", " + render_str_or_list(v.files) + ")";
        } else if constexpr (std::is_same_v<T, GoBackAction>) {
          return "go_back()";
        } else if constexpr (std::is_same_v<T, GoForwardAction>) {
          return "go_forward()";
        } else {
          return "goto(" + quote_py(v.url) + ")";
        }
      },
      a);
}

// --- JSON --------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ConcreteAction& a) {
  j = nlohmann::json{{"kind", action_name(a)}, {"call", render_action(a)}};
}

inline void from_json(const nlohmann::json& j, ConcreteAction& a) {
  a = parse_action(j.at("call").get<std::string>());
  if (j.at("kind").get<std::string>() != action_name(a)) {
    fail(ErrorKind::TypeError, "action kind does not match call expression");
  }
}

}  // namespace simura
