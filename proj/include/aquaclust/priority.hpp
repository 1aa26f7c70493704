#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "aquaclust/affinity.hpp"
#include "aquaclust/dataset.hpp"

namespace aquaclust {

struct CategoricalSummary {
    std::string modal;               // lexicographically smallest on ties
    double modal_frequency = 0.0;
    std::map<std::string, double> frequencies;
};

struct ClusterProfile {
    std::size_t cluster_id = 0;  // exemplar index used as the cluster label
    std::size_t size = 0;
    std::map<std::string, CategoricalSummary> categorical;
    std::map<std::string, double> numeric_means;
};

// One profile per non-empty cluster, ordered by cluster id. Attributes that
// were dropped as subset constants are restored with frequency 1.
std::vector<ClusterProfile> profile_clusters(const Dataset& d,
                                             const ClusterResult& result);

// Predicate grammar over a profile: leaves compare one attribute, inner
// nodes combine children with all-of / any-of. An empty all() is true and
// an empty any() is false.
struct Predicate {
    enum class Kind { All, Any, Leaf };
    enum class Op { Eq, Ne, FreqGt, MeanLt, MeanGt };

    Kind kind = Kind::Leaf;
    std::vector<Predicate> children;

    std::string attr;
    Op op = Op::Eq;
    std::string value;        // category token (eq / ne / freq_gt)
    double number = 0.0;      // threshold (freq_gt) or comparand (mean_*)

    static Predicate all(std::vector<Predicate> ps);
    static Predicate any(std::vector<Predicate> ps);
    static Predicate eq(std::string attr, std::string value);
    static Predicate ne(std::string attr, std::string value);
    static Predicate freq_gt(std::string attr, std::string value, double threshold);
    static Predicate mean_lt(std::string attr, double number);
    static Predicate mean_gt(std::string attr, double number);
};

// Evaluates against a profile. Fired leaf facts are appended to `basis` when
// the predicate holds. A leaf naming an attribute the profile lacks, or
// applying a categorical op to a numeric attribute (or vice versa), is a
// ConfigError.
bool eval_predicate(const Predicate& p, const ClusterProfile& profile,
                    std::vector<std::string>* basis = nullptr);

struct PriorityRule {
    int level = 0;  // 1 (most urgent) .. 5
    std::string description;
    Predicate predicate;
};

struct PriorityRuleSet {
    std::vector<PriorityRule> rules;  // sorted by level ascending
    int default_level = 2;
    std::string default_description;
};

// JSON: {"rules": [{"priority": n, "description": s, "predicate": P}...],
//        "default_priority": n, "default_description": s}
// where P is {"attr", "op", "value", "threshold"} or {"all": [P...]} or
// {"any": [P...]}. Levels 1..5 must each appear exactly once.
PriorityRuleSet parse_priority_rules(const std::string& json_text);
PriorityRuleSet load_priority_rules(const std::string& path);
std::string rules_to_json(const PriorityRuleSet& rules);

// The shipped encoding of the expert ranking table.
PriorityRuleSet default_priority_rules();
const std::string& default_priority_rules_json();

struct PriorityDecision {
    std::size_t cluster_id = 0;
    int level = 0;
    std::string rule_text;           // matched description (or the default's)
    std::vector<std::string> basis;  // profile facts that fired
    bool matched_default = false;
};

// First matching rule in ascending level order wins; profiles matching no
// rule take the default level.
std::vector<PriorityDecision> assign_priorities(
    const std::vector<ClusterProfile>& profiles, const PriorityRuleSet& rules);

}  // namespace aquaclust
