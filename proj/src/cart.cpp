#include "aquaclust/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aquaclust/csv.hpp"
#include "aquaclust/errors.hpp"

namespace aquaclust {

FeatureTable build_features(const Dataset& d, const std::vector<std::string>& front) {
    if (d.stage != Stage::Filtered)
        throw ParameterError("build_features: dataset must be filtered first");

    std::vector<std::size_t> order;
    for (const std::string& name : front) {
        auto idx = d.schema.index_of(name);
        if (!idx) throw SchemaError("missing column: " + name);
        order.push_back(*idx);
    }
    for (std::size_t a = 0; a < d.schema.attributes.size(); ++a)
        if (std::find(order.begin(), order.end(), a) == order.end())
            order.push_back(a);

    FeatureTable t;
    for (std::size_t a : order) {
        const Attribute& attr = d.schema.attributes[a];
        if (attr.kind == AttributeKind::Numeric) {
            t.columns.push_back({attr.name, attr.name, false, ""});
        } else {
            for (const std::string& cat : attr.categories)
                t.columns.push_back({attr.name + "_" + cat, attr.name, true, cat});
        }
    }

    t.rows = d.records.size();
    t.data.assign(t.rows * t.columns.size(), 0.0);
    for (std::size_t r = 0; r < t.rows; ++r) {
        const ColoniaRecord& rec = d.records[r];
        std::size_t c = 0;
        for (std::size_t a : order) {
            const Attribute& attr = d.schema.attributes[a];
            if (attr.kind == AttributeKind::Numeric) {
                t.data[r * t.columns.size() + c] = rec.num(a);
                ++c;
            } else {
                const std::string& tok = rec.cat(a);
                for (const std::string& cat : attr.categories) {
                    if (cat == tok) t.data[r * t.columns.size() + c] = 1.0;
                    ++c;
                }
            }
        }
    }
    return t;
}

double gini(const std::vector<std::size_t>& labels) {
    if (labels.empty()) throw InputError("gini: empty label set");
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t l : labels) ++counts[l];
    double n = static_cast<double>(labels.size());
    double sum = 0.0;
    for (const auto& [l, c] : counts) {
        double p = static_cast<double>(c) / n;
        sum += p * p;
    }
    return 1.0 - sum;
}

namespace {

double gini_of_counts(const std::map<std::size_t, std::size_t>& counts, std::size_t n) {
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (const auto& [l, c] : counts) {
        double p = static_cast<double>(c) / static_cast<double>(n);
        sum += p * p;
    }
    return 1.0 - sum;
}

}  // namespace

std::optional<SplitCandidate> best_split(const FeatureTable& t,
                                         const std::vector<std::size_t>& labels,
                                         const std::vector<std::size_t>& rows,
                                         std::size_t min_samples_leaf) {
    if (rows.size() < 2) return std::nullopt;

    std::map<std::size_t, std::size_t> parent_counts;
    for (std::size_t r : rows) ++parent_counts[labels[r]];
    if (parent_counts.size() < 2) return std::nullopt;
    const double parent_gini = gini_of_counts(parent_counts, rows.size());
    const double n = static_cast<double>(rows.size());

    std::optional<SplitCandidate> best;
    std::vector<std::pair<double, std::size_t>> sorted;  // (value, label)
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        sorted.clear();
        for (std::size_t r : rows) sorted.emplace_back(t.at(r, c), labels[r]);
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (sorted.front().first == sorted.back().first) continue;

        std::map<std::size_t, std::size_t> left_counts;
        std::size_t left_n = 0;
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
            ++left_counts[sorted[i].second];
            ++left_n;
            if (sorted[i].first == sorted[i + 1].first) continue;
            std::size_t right_n = sorted.size() - left_n;
            if (left_n < min_samples_leaf || right_n < min_samples_leaf) continue;

            std::map<std::size_t, std::size_t> right_counts = parent_counts;
            for (const auto& [l, cnt] : left_counts) {
                right_counts[l] -= cnt;
                if (right_counts[l] == 0) right_counts.erase(l);
            }
            double child =
                (static_cast<double>(left_n) / n) * gini_of_counts(left_counts, left_n) +
                (static_cast<double>(right_n) / n) * gini_of_counts(right_counts, right_n);
            double gain = parent_gini - child;
            if (gain <= 0.0) continue;
            if (!best || gain > best->gain) {
                double threshold = (sorted[i].first + sorted[i + 1].first) / 2.0;
                best = SplitCandidate{c, threshold, gain};
            }
        }
    }
    return best;
}

std::optional<SplitCandidate> best_split(const FeatureTable& t,
                                         const std::vector<std::size_t>& labels) {
    std::vector<std::size_t> rows(t.rows);
    std::iota(rows.begin(), rows.end(), 0);
    return best_split(t, labels, rows, 1);
}

namespace {

std::unique_ptr<TreeNode> make_leaf(const std::vector<std::size_t>& labels,
                                    const std::vector<std::size_t>& rows,
                                    std::size_t depth) {
    auto node = std::make_unique<TreeNode>();
    node->is_leaf = true;
    node->depth = depth;
    node->sample_count = rows.size();
    for (std::size_t r : rows) ++node->class_histogram[labels[r]];
    std::size_t best_label = 0, best_count = 0;
    for (const auto& [l, c] : node->class_histogram)
        if (c > best_count) {  // map iterates ascending, so ties keep the lowest id
            best_count = c;
            best_label = l;
        }
    node->predicted_cluster = best_label;
    return node;
}

std::unique_ptr<TreeNode> grow(const FeatureTable& t,
                               const std::vector<std::size_t>& labels,
                               const std::vector<std::size_t>& rows,
                               std::size_t depth, const TreeParams& params) {
    if (depth >= params.max_depth || rows.size() < 2)
        return make_leaf(labels, rows, depth);

    auto split = best_split(t, labels, rows, params.min_samples_leaf);
    if (!split || split->gain < params.min_impurity_decrease)
        return make_leaf(labels, rows, depth);

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows)
        (t.at(r, split->column) <= split->threshold ? left_rows : right_rows)
            .push_back(r);

    auto node = std::make_unique<TreeNode>();
    node->is_leaf = false;
    node->depth = depth;
    node->sample_count = rows.size();
    node->column = split->column;
    node->threshold = split->threshold;
    node->gain = split->gain;
    node->left = grow(t, labels, left_rows, depth + 1, params);
    node->right = grow(t, labels, right_rows, depth + 1, params);
    return node;
}

}  // namespace

DecisionTree build_tree(const FeatureTable& t, const std::vector<std::size_t>& labels,
                        const TreeParams& params) {
    if (t.rows == 0) throw InputError("build_tree: empty feature table");
    if (labels.size() != t.rows)
        throw InputError("build_tree: labels length does not match feature table");
    if (params.min_samples_leaf < 1)
        throw ParameterError("build_tree: min_samples_leaf must be >= 1");
    if (params.min_impurity_decrease < 0.0)
        throw ParameterError("build_tree: min_impurity_decrease must be >= 0");

    std::vector<std::size_t> rows(t.rows);
    std::iota(rows.begin(), rows.end(), 0);
    DecisionTree tree;
    tree.columns = t.columns;
    tree.params = params;
    tree.root = grow(t, labels, rows, 0, params);
    return tree;
}

std::size_t predict(const DecisionTree& tree, const FeatureTable& t, std::size_t row) {
    const TreeNode* node = tree.root.get();
    while (!node->is_leaf)
        node = t.at(row, node->column) <= node->threshold ? node->left.get()
                                                          : node->right.get();
    return node->predicted_cluster;
}

std::vector<std::size_t> predict_all(const DecisionTree& tree, const FeatureTable& t) {
    std::vector<std::size_t> out(t.rows);
    for (std::size_t r = 0; r < t.rows; ++r) out[r] = predict(tree, t, r);
    return out;
}

double training_accuracy(const DecisionTree& tree, const FeatureTable& t,
                         const std::vector<std::size_t>& labels) {
    if (t.rows == 0) throw InputError("training_accuracy: empty feature table");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < t.rows; ++r)
        if (predict(tree, t, r) == labels[r]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(t.rows);
}

namespace {

struct PathStep {
    std::size_t column;
    bool went_right;
    double threshold;
};

std::vector<RuleCondition> merge_path(const std::vector<FeatureColumn>& columns,
                                      const std::vector<PathStep>& path) {
    // Per attribute: tightest numeric bounds; an equality on a category
    // subsumes that attribute's inequalities.
    struct Merged {
        bool has_lower = false, has_upper = false;
        double lower = 0.0, upper = 0.0;
        bool has_eq = false;
        std::string eq_category;
        std::vector<std::string> ne_categories;
    };
    std::vector<std::string> attr_order;
    std::map<std::string, Merged> merged;

    for (const PathStep& step : path) {
        const FeatureColumn& col = columns[step.column];
        if (!merged.count(col.attribute)) attr_order.push_back(col.attribute);
        Merged& m = merged[col.attribute];
        if (col.is_dummy) {
            if (step.went_right) {
                m.has_eq = true;
                m.eq_category = col.category;
            } else if (std::find(m.ne_categories.begin(), m.ne_categories.end(),
                                 col.category) == m.ne_categories.end()) {
                m.ne_categories.push_back(col.category);
            }
        } else {
            if (step.went_right) {
                if (!m.has_lower || step.threshold > m.lower) {
                    m.has_lower = true;
                    m.lower = step.threshold;
                }
            } else {
                if (!m.has_upper || step.threshold < m.upper) {
                    m.has_upper = true;
                    m.upper = step.threshold;
                }
            }
        }
    }

    std::vector<RuleCondition> out;
    for (const std::string& attr : attr_order) {
        const Merged& m = merged[attr];
        if (m.has_eq) {
            out.push_back({attr, Comparator::Eq, 0.0, m.eq_category});
            continue;
        }
        for (const std::string& cat : m.ne_categories)
            out.push_back({attr, Comparator::Ne, 0.0, cat});
        if (m.has_lower) out.push_back({attr, Comparator::Greater, m.lower, ""});
        if (m.has_upper) out.push_back({attr, Comparator::LessEq, m.upper, ""});
    }
    return out;
}

void collect_rules(const DecisionTree& tree, const TreeNode* node,
                   std::vector<PathStep>& path,
                   std::vector<std::pair<const TreeNode*, std::vector<RuleCondition>>>& out) {
    if (node->is_leaf) {
        out.emplace_back(node, merge_path(tree.columns, path));
        return;
    }
    path.push_back({node->column, false, node->threshold});
    collect_rules(tree, node->left.get(), path, out);
    path.back().went_right = true;
    collect_rules(tree, node->right.get(), path, out);
    path.pop_back();
}

const TreeNode* route(const DecisionTree& tree, const FeatureTable& t, std::size_t row) {
    const TreeNode* node = tree.root.get();
    while (!node->is_leaf)
        node = t.at(row, node->column) <= node->threshold ? node->left.get()
                                                          : node->right.get();
    return node;
}

}  // namespace

std::vector<DecisionRule> extract_rules(const DecisionTree& tree, const FeatureTable& t,
                                        const std::vector<std::size_t>& labels) {
    if (labels.size() != t.rows)
        throw InputError("extract_rules: labels length does not match feature table");

    std::vector<std::pair<const TreeNode*, std::vector<RuleCondition>>> leaves;
    std::vector<PathStep> path;
    collect_rules(tree, tree.root.get(), path, leaves);

    std::map<const TreeNode*, std::size_t> leaf_index;
    for (std::size_t i = 0; i < leaves.size(); ++i) leaf_index[leaves[i].first] = i;

    std::map<std::size_t, std::size_t> cluster_totals;
    for (std::size_t l : labels) ++cluster_totals[l];

    std::vector<std::size_t> support(leaves.size(), 0);
    std::vector<std::size_t> in_class(leaves.size(), 0);
    for (std::size_t r = 0; r < t.rows; ++r) {
        std::size_t li = leaf_index.at(route(tree, t, r));
        ++support[li];
        if (labels[r] == leaves[li].first->predicted_cluster) ++in_class[li];
    }

    std::vector<DecisionRule> rules;
    rules.reserve(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        DecisionRule rule;
        rule.conditions = leaves[i].second;
        rule.predicted_cluster = leaves[i].first->predicted_cluster;
        rule.support = support[i];
        std::size_t total = cluster_totals.count(rule.predicted_cluster)
                                ? cluster_totals[rule.predicted_cluster]
                                : 0;
        rule.coverage =
            total ? static_cast<double>(in_class[i]) / static_cast<double>(total) : 0.0;
        rules.push_back(std::move(rule));
    }
    std::stable_sort(rules.begin(), rules.end(),
                     [](const DecisionRule& a, const DecisionRule& b) {
                         return a.support > b.support;
                     });
    return rules;
}

std::string rule_to_text(const DecisionRule& rule) {
    std::ostringstream os;
    os << "IF ";
    if (rule.conditions.empty()) {
        os << "TRUE";
    } else {
        for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
            if (i) os << " AND ";
            const RuleCondition& c = rule.conditions[i];
            switch (c.op) {
                case Comparator::Eq:
                    os << c.attribute << " = " << c.category;
                    break;
                case Comparator::Ne:
                    os << c.attribute << " != " << c.category;
                    break;
                case Comparator::LessEq:
                    os << c.attribute << " <= " << csv::format_double(c.threshold);
                    break;
                case Comparator::Greater:
                    os << c.attribute << " > " << csv::format_double(c.threshold);
                    break;
            }
        }
    }
    os << " THEN cluster " << rule.predicted_cluster << " (support " << rule.support
       << ", coverage " << csv::format_double(std::round(rule.coverage * 1000.0) / 10.0)
       << "%)";
    return os.str();
}

std::vector<AttributeImportance> rank_attributes(const DecisionTree& tree) {
    struct Acc {
        double weighted_gain = 0.0;
        std::size_t best_depth = 0;
        bool seen = false;
    };
    std::vector<std::string> order;
    std::map<std::string, Acc> acc;

    std::vector<const TreeNode*> stack{tree.root.get()};
    while (!stack.empty()) {
        const TreeNode* node = stack.back();
        stack.pop_back();
        if (node->is_leaf) continue;
        const std::string& attr = tree.columns[node->column].attribute;
        Acc& a = acc[attr];
        if (!a.seen) {
            a.seen = true;
            a.best_depth = node->depth;
            order.push_back(attr);
        } else if (node->depth < a.best_depth) {
            a.best_depth = node->depth;
        }
        a.weighted_gain += static_cast<double>(node->sample_count) * node->gain;
        stack.push_back(node->right.get());
        stack.push_back(node->left.get());
    }

    double total = 0.0;
    for (const std::string& attr : order) total += acc[attr].weighted_gain;

    std::vector<AttributeImportance> out;
    for (const std::string& attr : order)
        out.push_back({attr, total > 0.0 ? acc[attr].weighted_gain / total : 0.0,
                       acc[attr].best_depth});
    std::stable_sort(out.begin(), out.end(),
                     [](const AttributeImportance& a, const AttributeImportance& b) {
                         if (a.importance != b.importance)
                             return a.importance > b.importance;
                         return a.best_depth < b.best_depth;
                     });
    return out;
}

namespace {

void render(const DecisionTree& tree, const TreeNode* node, std::size_t indent,
            std::ostringstream& os) {
    std::string pad(indent * 2, ' ');
    if (node->is_leaf) {
        os << pad << "leaf: cluster " << node->predicted_cluster << " (n="
           << node->sample_count << ")\n";
        return;
    }
    const FeatureColumn& col = tree.columns[node->column];
    if (col.is_dummy) {
        os << pad << col.attribute << " != " << col.category << ":\n";
        render(tree, node->left.get(), indent + 1, os);
        os << pad << col.attribute << " = " << col.category << ":\n";
        render(tree, node->right.get(), indent + 1, os);
    } else {
        os << pad << col.attribute << " <= " << csv::format_double(node->threshold)
           << ":\n";
        render(tree, node->left.get(), indent + 1, os);
        os << pad << col.attribute << " > " << csv::format_double(node->threshold)
           << ":\n";
        render(tree, node->right.get(), indent + 1, os);
    }
}

}  // namespace

std::string tree_to_text(const DecisionTree& tree) {
    std::ostringstream os;
    render(tree, tree.root.get(), 0, os);
    return os.str();
}

}  // namespace aquaclust
