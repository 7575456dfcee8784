#pragma once

#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vqahead/errors.hpp"
#include "vqahead/hashing.hpp"

namespace vqahead {

// Ordered first-match-wins regular-expression rules mapping a normalized
// answer string to an answer type. The table is configuration data; the
// defaults below cover the seven standard types with "other" as fallback.
class TypeRuleTable {
 public:
  struct Rule {
    std::string pattern;
    std::string type;
    std::regex re;
  };

  static TypeRuleTable defaults() {
    TypeRuleTable t;
    t.types_ = {"other", "number", "yes", "no", "color", "unsuitable", "unanswerable"};
    t.add_rule("^unanswerable$", "unanswerable");
    t.add_rule("^unsuitable( image)?$", "unsuitable");
    t.add_rule("^yes$", "yes");
    t.add_rule("^no$", "no");
    t.add_rule("^[0-9]+([.,][0-9]+)?$", "number");
    t.add_rule("^(zero|one|two|three|four|five|six|seven|eight|nine|ten)$", "number");
    t.add_rule(
        "^(black|white|red|green|blue|yellow|orange|purple|pink|brown|gray|grey|gold|silver|"
        "beige|tan)$",
        "color");
    return t;
  }

  static const TypeRuleTable& default_instance() {
    static const TypeRuleTable t = defaults();
    return t;
  }

  // {"types": [...], "rules": [{"pattern": "...", "type": "..."}]}
  static TypeRuleTable from_json(const nlohmann::json& j) {
    TypeRuleTable t;
    if (!j.is_object() || !j.contains("types") || !j["types"].is_array())
      throw validation_error("type rule table needs a 'types' array");
    for (const auto& name : j["types"]) {
      if (!name.is_string()) throw validation_error("type names must be strings");
      t.types_.push_back(name.get<std::string>());
    }
    if (t.type_index("other") < 0)
      throw validation_error("type rule table must include the fallback type 'other'");
    if (!j.contains("rules") || !j["rules"].is_array())
      throw validation_error("type rule table needs a 'rules' array");
    for (const auto& r : j["rules"]) {
      if (!r.is_object() || !r.contains("pattern") || !r.contains("type"))
        throw validation_error("each rule needs 'pattern' and 'type'");
      t.add_rule(r["pattern"].get<std::string>(), r["type"].get<std::string>());
    }
    return t;
  }

  nlohmann::json to_json() const {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : rules_) rules.push_back({{"pattern", r.pattern}, {"type", r.type}});
    return {{"types", types_}, {"rules", rules}};
  }

  const std::vector<std::string>& type_names() const { return types_; }

  int type_index(std::string_view name) const {
    for (std::size_t i = 0; i < types_.size(); ++i)
      if (types_[i] == name) return static_cast<int>(i);
    return -1;
  }

  // Type index of a normalized answer; first matching rule wins,
  // "other" otherwise. Total and deterministic.
  int assign(const std::string& normalized_answer) const {
    for (const auto& rule : rules_)
      if (std::regex_match(normalized_answer, rule.re)) return type_index(rule.type);
    return type_index("other");
  }

  const std::string& assign_name(const std::string& normalized_answer) const {
    return types_[static_cast<std::size_t>(assign(normalized_answer))];
  }

  std::string hash() const {
    Fnv1a64 h;
    for (const auto& t : types_) h.update(t).update_sep();
    h.update("\x1f");
    for (const auto& r : rules_) h.update(r.pattern).update_sep().update(r.type).update_sep();
    return h.hex();
  }

 private:
  void add_rule(std::string pattern, std::string type) {
    if (type_index(type) < 0)
      throw validation_error("rule type '" + type + "' is not in the type list");
    Rule r;
    r.pattern = std::move(pattern);
    r.type = std::move(type);
    try {
      r.re = std::regex(r.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw validation_error("bad rule pattern '" + r.pattern + "': " + e.what());
    }
    rules_.push_back(std::move(r));
  }

  std::vector<std::string> types_;
  std::vector<Rule> rules_;
};

// Convenience wrapper returning the type name under the default table.
inline std::string assign_answer_type(const std::string& normalized_answer,
                                      const TypeRuleTable& table = TypeRuleTable::default_instance()) {
  return table.assign_name(normalized_answer);
}

}  // namespace vqahead
