#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aquaclust/dataset.hpp"

namespace aquaclust {

// One column of the numeric design matrix fed to the tree. Categorical
// attributes appear as 0/1 dummy columns, one per category.
struct FeatureColumn {
    std::string name;       // attribute name, or "<attr>_<category>" for dummies
    std::string attribute;  // owning schema attribute
    bool is_dummy = false;
    std::string category;   // dummy columns only
};

struct FeatureTable {
    std::vector<FeatureColumn> columns;
    std::size_t rows = 0;
    std::vector<double> data;  // row-major, rows x columns

    double at(std::size_t r, std::size_t c) const {
        return data[r * columns.size() + c];
    }
};

// Expands a filtered dataset into a FeatureTable. Attributes named in `front`
// are emitted first (in the given order), the rest follow in schema order.
FeatureTable build_features(const Dataset& d,
                            const std::vector<std::string>& front = {});

// 1 - sum_c p_c^2 over the labels.
double gini(const std::vector<std::size_t>& labels);

struct SplitCandidate {
    std::size_t column = 0;
    double threshold = 0.0;  // left branch: value <= threshold
    double gain = 0.0;       // parent impurity minus weighted child impurity
};

// Best threshold split over the given rows, or nullopt when nothing reduces
// impurity. Ties resolve to the earliest column, then the lowest threshold.
std::optional<SplitCandidate> best_split(const FeatureTable& t,
                                         const std::vector<std::size_t>& labels,
                                         const std::vector<std::size_t>& rows,
                                         std::size_t min_samples_leaf = 1);
std::optional<SplitCandidate> best_split(const FeatureTable& t,
                                         const std::vector<std::size_t>& labels);

struct TreeParams {
    std::size_t max_depth = 12;
    std::size_t min_samples_leaf = 1;
    double min_impurity_decrease = 0.0;
};

struct TreeNode {
    bool is_leaf = true;
    std::size_t sample_count = 0;
    std::size_t depth = 0;

    // internal nodes
    std::size_t column = 0;
    double threshold = 0.0;
    double gain = 0.0;
    std::unique_ptr<TreeNode> left, right;

    // leaves
    std::size_t predicted_cluster = 0;
    std::map<std::size_t, std::size_t> class_histogram;
};

struct DecisionTree {
    std::vector<FeatureColumn> columns;
    std::unique_ptr<TreeNode> root;
    TreeParams params;
};

DecisionTree build_tree(const FeatureTable& t, const std::vector<std::size_t>& labels,
                        const TreeParams& params = {});

std::size_t predict(const DecisionTree& tree, const FeatureTable& t, std::size_t row);
std::vector<std::size_t> predict_all(const DecisionTree& tree, const FeatureTable& t);
double training_accuracy(const DecisionTree& tree, const FeatureTable& t,
                         const std::vector<std::size_t>& labels);

enum class Comparator { LessEq, Greater, Eq, Ne };

struct RuleCondition {
    std::string attribute;
    Comparator op = Comparator::LessEq;
    double threshold = 0.0;  // numeric comparators
    std::string category;    // Eq / Ne
};

struct DecisionRule {
    std::vector<RuleCondition> conditions;
    std::size_t predicted_cluster = 0;
    std::size_t support = 0;   // training records reaching the leaf
    double coverage = 0.0;     // in-cluster records here / cluster total
};

// One rule per leaf, root-to-leaf conditions with redundant bounds on the
// same attribute merged, sorted by support descending.
std::vector<DecisionRule> extract_rules(const DecisionTree& tree, const FeatureTable& t,
                                        const std::vector<std::size_t>& labels);

std::string rule_to_text(const DecisionRule& rule);

struct AttributeImportance {
    std::string attribute;
    double importance = 0.0;
    std::size_t best_depth = 0;
};

// Sample-weighted impurity decrease per attribute, normalized to sum to 1.
// Attributes never split on are absent. Ties order by shallower best depth.
std::vector<AttributeImportance> rank_attributes(const DecisionTree& tree);

std::string tree_to_text(const DecisionTree& tree);

}  // namespace aquaclust
