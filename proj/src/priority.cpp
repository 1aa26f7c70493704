#include "aquaclust/priority.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aquaclust/csv.hpp"
#include "aquaclust/errors.hpp"

namespace aquaclust {

std::vector<ClusterProfile> profile_clusters(const Dataset& d,
                                             const ClusterResult& result) {
    if (result.labels.size() != d.records.size())
        throw InputError("profile_clusters: labels do not cover the records");

    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < result.labels.size(); ++i)
        members[result.labels[i]].push_back(i);

    std::vector<ClusterProfile> profiles;
    for (const auto& [cluster, rows] : members) {
        ClusterProfile p;
        p.cluster_id = cluster;
        p.size = rows.size();

        for (std::size_t a = 0; a < d.schema.attributes.size(); ++a) {
            const Attribute& attr = d.schema.attributes[a];
            if (attr.kind == AttributeKind::Numeric) {
                double sum = 0.0;
                for (std::size_t r : rows) sum += d.records[r].num(a);
                p.numeric_means[attr.name] = sum / static_cast<double>(rows.size());
            } else {
                CategoricalSummary s;
                std::map<std::string, std::size_t> counts;
                for (std::size_t r : rows) ++counts[d.records[r].cat(a)];
                std::size_t best = 0;
                for (const auto& [tok, c] : counts) {
                    s.frequencies[tok] =
                        static_cast<double>(c) / static_cast<double>(rows.size());
                    if (c > best) {  // ascending map keeps the lexicographic tie-break
                        best = c;
                        s.modal = tok;
                    }
                }
                s.modal_frequency = s.frequencies[s.modal];
                p.categorical[attr.name] = std::move(s);
            }
        }

        // Attributes dropped as subset constants still describe every member.
        for (const ConstantAttribute& c : d.constants) {
            if (c.kind == AttributeKind::Numeric) {
                double v = 0.0;
                auto [ptr, ec] =
                    std::from_chars(c.value.data(), c.value.data() + c.value.size(), v);
                if (ec == std::errc{} && ptr == c.value.data() + c.value.size())
                    p.numeric_means[c.name] = v;
            } else {
                p.categorical[c.name] = {c.value, 1.0, {{c.value, 1.0}}};
            }
        }
        profiles.push_back(std::move(p));
    }
    return profiles;
}

Predicate Predicate::all(std::vector<Predicate> ps) {
    Predicate p;
    p.kind = Kind::All;
    p.children = std::move(ps);
    return p;
}
Predicate Predicate::any(std::vector<Predicate> ps) {
    Predicate p;
    p.kind = Kind::Any;
    p.children = std::move(ps);
    return p;
}
Predicate Predicate::eq(std::string attr, std::string value) {
    Predicate p;
    p.attr = std::move(attr);
    p.op = Op::Eq;
    p.value = std::move(value);
    return p;
}
Predicate Predicate::ne(std::string attr, std::string value) {
    Predicate p = eq(std::move(attr), std::move(value));
    p.op = Op::Ne;
    return p;
}
Predicate Predicate::freq_gt(std::string attr, std::string value, double threshold) {
    Predicate p = eq(std::move(attr), std::move(value));
    p.op = Op::FreqGt;
    p.number = threshold;
    return p;
}
Predicate Predicate::mean_lt(std::string attr, double number) {
    Predicate p;
    p.attr = std::move(attr);
    p.op = Op::MeanLt;
    p.number = number;
    return p;
}
Predicate Predicate::mean_gt(std::string attr, double number) {
    Predicate p = mean_lt(std::move(attr), number);
    p.op = Op::MeanGt;
    return p;
}

namespace {

bool eval_leaf(const Predicate& p, const ClusterProfile& profile,
               std::vector<std::string>* basis) {
    const bool wants_categorical =
        p.op == Predicate::Op::Eq || p.op == Predicate::Op::Ne ||
        p.op == Predicate::Op::FreqGt;

    if (wants_categorical) {
        auto it = profile.categorical.find(p.attr);
        if (it == profile.categorical.end()) {
            if (profile.numeric_means.count(p.attr))
                throw ConfigError("priority rule applies a categorical test to numeric attribute '" +
                                  p.attr + "'");
            throw ConfigError("priority rule references unknown attribute '" + p.attr + "'");
        }
        const CategoricalSummary& s = it->second;
        bool hit = false;
        std::ostringstream fact;
        switch (p.op) {
            case Predicate::Op::Eq:
                hit = s.modal == p.value;
                fact << p.attr << " = " << s.modal << " (frequency "
                     << csv::format_double(s.modal_frequency) << ")";
                break;
            case Predicate::Op::Ne:
                hit = s.modal != p.value;
                fact << p.attr << " = " << s.modal << " (not " << p.value << ")";
                break;
            default: {  // FreqGt
                auto f = s.frequencies.find(p.value);
                double freq = f == s.frequencies.end() ? 0.0 : f->second;
                hit = freq > p.number;
                fact << p.attr << " has " << p.value << " frequency "
                     << csv::format_double(freq) << " > "
                     << csv::format_double(p.number);
                break;
            }
        }
        if (hit && basis) basis->push_back(fact.str());
        return hit;
    }

    auto it = profile.numeric_means.find(p.attr);
    if (it == profile.numeric_means.end()) {
        if (profile.categorical.count(p.attr))
            throw ConfigError("priority rule applies a numeric test to categorical attribute '" +
                              p.attr + "'");
        throw ConfigError("priority rule references unknown attribute '" + p.attr + "'");
    }
    double mean = it->second;
    bool hit = p.op == Predicate::Op::MeanLt ? mean < p.number : mean > p.number;
    if (hit && basis) {
        std::ostringstream fact;
        fact << p.attr << " mean " << csv::format_double(mean)
             << (p.op == Predicate::Op::MeanLt ? " < " : " > ")
             << csv::format_double(p.number);
        basis->push_back(fact.str());
    }
    return hit;
}

}  // namespace

bool eval_predicate(const Predicate& p, const ClusterProfile& profile,
                    std::vector<std::string>* basis) {
    switch (p.kind) {
        case Predicate::Kind::Leaf:
            return eval_leaf(p, profile, basis);
        case Predicate::Kind::All: {
            std::vector<std::string> facts;
            for (const Predicate& c : p.children)
                if (!eval_predicate(c, profile, basis ? &facts : nullptr)) return false;
            if (basis) basis->insert(basis->end(), facts.begin(), facts.end());
            return true;
        }
        case Predicate::Kind::Any: {
            // Children are all evaluated so misconfigured leaves surface even
            // after an earlier child already matched.
            bool hit = false;
            std::vector<std::string> first_facts;
            for (const Predicate& c : p.children) {
                std::vector<std::string> facts;
                bool v = eval_predicate(c, profile, basis ? &facts : nullptr);
                if (v && !hit) {
                    hit = true;
                    first_facts = std::move(facts);
                }
            }
            if (hit && basis)
                basis->insert(basis->end(), first_facts.begin(), first_facts.end());
            return hit;
        }
    }
    return false;
}

namespace {

using nlohmann::json;

Predicate predicate_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("priority rules: predicate must be an object");
    if (j.contains("all") || j.contains("any")) {
        bool is_all = j.contains("all");
        const json& arr = j.at(is_all ? "all" : "any");
        if (!arr.is_array())
            throw ConfigError("priority rules: combinator body must be an array");
        std::vector<Predicate> children;
        for (const json& c : arr) children.push_back(predicate_from_json(c));
        return is_all ? Predicate::all(std::move(children))
                      : Predicate::any(std::move(children));
    }

    if (!j.contains("attr") || !j.contains("op"))
        throw ConfigError("priority rules: leaf predicate needs attr and op");
    std::string attr = j.at("attr").get<std::string>();
    std::string op = j.at("op").get<std::string>();

    if (op == "eq" || op == "ne") {
        if (!j.contains("value") || !j.at("value").is_string())
            throw ConfigError("priority rules: op '" + op + "' needs a string value");
        std::string value = j.at("value").get<std::string>();
        return op == "eq" ? Predicate::eq(std::move(attr), std::move(value))
                          : Predicate::ne(std::move(attr), std::move(value));
    }
    if (op == "freq_gt") {
        if (!j.contains("value") || !j.at("value").is_string())
            throw ConfigError("priority rules: op 'freq_gt' needs a string value");
        if (!j.contains("threshold") || !j.at("threshold").is_number())
            throw ConfigError("priority rules: op 'freq_gt' needs a numeric threshold");
        return Predicate::freq_gt(std::move(attr), j.at("value").get<std::string>(),
                                  j.at("threshold").get<double>());
    }
    if (op == "mean_lt" || op == "mean_gt") {
        if (!j.contains("value") || !j.at("value").is_number())
            throw ConfigError("priority rules: op '" + op + "' needs a numeric value");
        double v = j.at("value").get<double>();
        return op == "mean_lt" ? Predicate::mean_lt(std::move(attr), v)
                               : Predicate::mean_gt(std::move(attr), v);
    }
    throw ConfigError("priority rules: unknown op '" + op + "'");
}

json predicate_to_json(const Predicate& p) {
    json j;
    switch (p.kind) {
        case Predicate::Kind::All:
        case Predicate::Kind::Any: {
            json arr = json::array();
            for (const Predicate& c : p.children) arr.push_back(predicate_to_json(c));
            j[p.kind == Predicate::Kind::All ? "all" : "any"] = std::move(arr);
            break;
        }
        case Predicate::Kind::Leaf:
            j["attr"] = p.attr;
            switch (p.op) {
                case Predicate::Op::Eq:
                    j["op"] = "eq";
                    j["value"] = p.value;
                    break;
                case Predicate::Op::Ne:
                    j["op"] = "ne";
                    j["value"] = p.value;
                    break;
                case Predicate::Op::FreqGt:
                    j["op"] = "freq_gt";
                    j["value"] = p.value;
                    j["threshold"] = p.number;
                    break;
                case Predicate::Op::MeanLt:
                    j["op"] = "mean_lt";
                    j["value"] = p.number;
                    break;
                case Predicate::Op::MeanGt:
                    j["op"] = "mean_gt";
                    j["value"] = p.number;
                    break;
            }
            break;
    }
    return j;
}

}  // namespace

PriorityRuleSet parse_priority_rules(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("priority rules: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("rules") || !j.at("rules").is_array())
        throw ConfigError("priority rules: top level must be an object with a 'rules' array");

    PriorityRuleSet set;
    for (const json& r : j.at("rules")) {
        if (!r.is_object() || !r.contains("priority") || !r.contains("predicate"))
            throw ConfigError("priority rules: each rule needs priority and predicate");
        PriorityRule rule;
        if (!r.at("priority").is_number_integer())
            throw ConfigError("priority rules: priority must be an integer");
        rule.level = r.at("priority").get<int>();
        if (rule.level < 1 || rule.level > 5)
            throw ConfigError("priority rules: priority must be between 1 and 5");
        if (r.contains("description"))
            rule.description = r.at("description").get<std::string>();
        rule.predicate = predicate_from_json(r.at("predicate"));
        set.rules.push_back(std::move(rule));
    }

    for (int level = 1; level <= 5; ++level) {
        std::size_t n = std::count_if(set.rules.begin(), set.rules.end(),
                                      [&](const PriorityRule& r) { return r.level == level; });
        if (n != 1)
            throw ConfigError("priority rules: level " + std::to_string(level) +
                              " must be defined exactly once");
    }
    std::sort(set.rules.begin(), set.rules.end(),
              [](const PriorityRule& a, const PriorityRule& b) { return a.level < b.level; });

    if (!j.contains("default_priority") || !j.at("default_priority").is_number_integer())
        throw ConfigError("priority rules: missing integer default_priority");
    set.default_level = j.at("default_priority").get<int>();
    if (set.default_level < 1 || set.default_level > 5)
        throw ConfigError("priority rules: default_priority must be between 1 and 5");
    if (j.contains("default_description"))
        set.default_description = j.at("default_description").get<std::string>();
    return set;
}

PriorityRuleSet load_priority_rules(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open rules file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_priority_rules(buf.str());
}

std::string rules_to_json(const PriorityRuleSet& rules) {
    json j;
    j["default_priority"] = rules.default_level;
    j["default_description"] = rules.default_description;
    json arr = json::array();
    for (const PriorityRule& r : rules.rules) {
        json jr;
        jr["priority"] = r.level;
        jr["description"] = r.description;
        jr["predicate"] = predicate_to_json(r.predicate);
        arr.push_back(std::move(jr));
    }
    j["rules"] = std::move(arr);
    return j.dump(2) + "\n";
}

const std::string& default_priority_rules_json() {
    static const std::string text = R"json({
  "default_priority": 2,
  "default_description": "Water and wastewater conditions match no explicit level; access needs further investigation",
  "rules": [
    {
      "priority": 1,
      "description": "No wastewater service and a water health hazard may be present, or drinking water is hauled in",
      "predicate": {
        "any": [
          {
            "all": [
              {"attr": "Served by Public Sewer", "op": "eq", "value": "N"},
              {
                "any": [
                  {"attr": "Water Health Hazard", "op": "eq", "value": "Y"},
                  {"attr": "Water Health Hazard", "op": "freq_gt", "value": "Y", "threshold": 0.0}
                ]
              }
            ]
          },
          {"attr": "Water Hauled", "op": "eq", "value": "Y"}
        ]
      }
    },
    {
      "priority": 2,
      "description": "No public water service and no health hazard, or no wastewater service with inadequate service and no health hazard",
      "predicate": {
        "any": [
          {
            "all": [
              {"attr": "Public Water Service", "op": "eq", "value": "N"},
              {"attr": "Water Health Hazard", "op": "eq", "value": "N"}
            ]
          },
          {
            "all": [
              {"attr": "Served by Public Sewer", "op": "eq", "value": "N"},
              {"attr": "Service Adequacy", "op": "ne", "value": "Y"},
              {"attr": "Water Health Hazard", "op": "eq", "value": "N"}
            ]
          }
        ]
      }
    },
    {
      "priority": 3,
      "description": "Service gap with construction financing underway; no attribute records financing status, so this level cannot fire from profile data and is kept only so every level is defined",
      "predicate": {"any": []}
    },
    {
      "priority": 4,
      "description": "Public water service with adequate standalone wastewater disposal, or both public water and public sewer service",
      "predicate": {
        "any": [
          {
            "all": [
              {"attr": "Public Water Service", "op": "eq", "value": "Y"},
              {"attr": "Served by Public Sewer", "op": "eq", "value": "N"},
              {"attr": "Service Adequacy", "op": "eq", "value": "Y"}
            ]
          },
          {
            "all": [
              {"attr": "Public Water Service", "op": "eq", "value": "Y"},
              {"attr": "Served by Public Sewer", "op": "eq", "value": "Y"}
            ]
          }
        ]
      }
    },
    {
      "priority": 5,
      "description": "No inhabitants",
      "predicate": {"attr": "Estimated Population", "op": "mean_lt", "value": 0.5}
    }
  ]
}
)json";
    return text;
}

PriorityRuleSet default_priority_rules() {
    return parse_priority_rules(default_priority_rules_json());
}

namespace {

void validate_leaf_vocabulary(const Predicate& p, const ClusterProfile& profile) {
    if (p.kind != Predicate::Kind::Leaf) {
        for (const Predicate& c : p.children) validate_leaf_vocabulary(c, profile);
        return;
    }
    const bool wants_categorical =
        p.op == Predicate::Op::Eq || p.op == Predicate::Op::Ne ||
        p.op == Predicate::Op::FreqGt;
    bool have_cat = profile.categorical.count(p.attr) > 0;
    bool have_num = profile.numeric_means.count(p.attr) > 0;
    if (!have_cat && !have_num)
        throw ConfigError("priority rule references unknown attribute '" + p.attr + "'");
    if (wants_categorical && !have_cat)
        throw ConfigError("priority rule applies a categorical test to numeric attribute '" +
                          p.attr + "'");
    if (!wants_categorical && !have_num)
        throw ConfigError("priority rule applies a numeric test to categorical attribute '" +
                          p.attr + "'");
}

}  // namespace

std::vector<PriorityDecision> assign_priorities(
    const std::vector<ClusterProfile>& profiles, const PriorityRuleSet& rules) {
    for (const ClusterProfile& p : profiles)
        for (const PriorityRule& rule : rules.rules)
            validate_leaf_vocabulary(rule.predicate, p);

    std::vector<PriorityDecision> out;
    out.reserve(profiles.size());
    for (const ClusterProfile& p : profiles) {
        PriorityDecision d;
        d.cluster_id = p.cluster_id;
        bool assigned = false;
        for (const PriorityRule& rule : rules.rules) {
            std::vector<std::string> basis;
            if (eval_predicate(rule.predicate, p, &basis)) {
                d.level = rule.level;
                d.rule_text = rule.description;
                d.basis = std::move(basis);
                assigned = true;
                break;
            }
        }
        if (!assigned) {
            d.level = rules.default_level;
            d.rule_text = rules.default_description;
            d.matched_default = true;
        }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace aquaclust
