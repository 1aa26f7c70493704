#include "aquaclust/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "aquaclust/csv.hpp"
#include "aquaclust/errors.hpp"
#include "aquaclust/gower.hpp"

namespace aquaclust {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

AttributeKind kind_from_string(const std::string& s) {
    if (s == "numeric") return AttributeKind::Numeric;
    if (s == "categorical") return AttributeKind::Categorical;
    throw ConfigError("config: attribute kind must be 'numeric' or 'categorical', got '" +
                      s + "'");
}

std::string kind_to_string(AttributeKind k) {
    return k == AttributeKind::Numeric ? "numeric" : "categorical";
}

const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "input",          "output_dir",      "partition_attribute",
        "count_attributes", "denominator_attribute", "theta",
        "gamma",          "gamma_grid",      "max_iter",
        "stable_window",  "max_depth",       "min_samples_leaf",
        "min_impurity_decrease", "rules_file", "per_subset_trees",
        "trace_iterations", "mean_silhouette", "workers",
        "schema"};
    return keys;
}

}  // namespace

PipelineConfig config_from_json(const std::string& json_text,
                                const PipelineConfig& base) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");

    for (const auto& [key, value] : j.items())
        if (!known_config_keys().count(key))
            throw ConfigError("config: unknown key '" + key + "'");

    PipelineConfig c = base;
    try {
        if (j.contains("input")) c.input_path = j.at("input").get<std::string>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("partition_attribute"))
            c.partition_attribute = j.at("partition_attribute").get<std::string>();
        if (j.contains("count_attributes"))
            c.count_attributes = j.at("count_attributes").get<std::vector<std::string>>();
        if (j.contains("denominator_attribute"))
            c.denominator_attribute = j.at("denominator_attribute").get<std::string>();
        if (j.contains("theta")) c.theta = j.at("theta").get<double>();
        if (j.contains("gamma")) c.fixed_gamma = j.at("gamma").get<double>();
        if (j.contains("gamma_grid"))
            c.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
        if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<std::size_t>();
        if (j.contains("stable_window"))
            c.stable_window = j.at("stable_window").get<std::size_t>();
        if (j.contains("max_depth"))
            c.tree.max_depth = j.at("max_depth").get<std::size_t>();
        if (j.contains("min_samples_leaf"))
            c.tree.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
        if (j.contains("min_impurity_decrease"))
            c.tree.min_impurity_decrease = j.at("min_impurity_decrease").get<double>();
        if (j.contains("rules_file")) c.rules_path = j.at("rules_file").get<std::string>();
        if (j.contains("per_subset_trees"))
            c.per_subset_trees = j.at("per_subset_trees").get<bool>();
        if (j.contains("trace_iterations"))
            c.trace_iterations = j.at("trace_iterations").get<bool>();
        if (j.contains("mean_silhouette"))
            c.mean_silhouette = j.at("mean_silhouette").get<bool>();
        if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
        if (j.contains("schema")) {
            c.schema.clear();
            for (const json& s : j.at("schema")) {
                AttributeSpec spec;
                spec.name = s.at("name").get<std::string>();
                spec.kind = kind_from_string(s.at("kind").get<std::string>());
                if (s.contains("categories"))
                    spec.categories = s.at("categories").get<std::vector<std::string>>();
                c.schema.push_back(std::move(spec));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

PipelineConfig load_config(const std::string& path, const PipelineConfig& base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str(), base);
}

namespace {

// The echo leaves out output_dir and workers: both steer execution, not
// results, and artifacts must stay byte-identical across worker counts and
// destination directories.
json config_json(const PipelineConfig& c) {
    json j;
    j["input"] = c.input_path;
    j["partition_attribute"] = c.partition_attribute;
    j["count_attributes"] = c.count_attributes;
    j["denominator_attribute"] = c.denominator_attribute;
    j["theta"] = c.theta;
    if (c.fixed_gamma) j["gamma"] = *c.fixed_gamma;
    j["gamma_grid"] = c.gamma_grid;
    j["max_iter"] = c.max_iter;
    j["stable_window"] = c.stable_window;
    j["max_depth"] = c.tree.max_depth;
    j["min_samples_leaf"] = c.tree.min_samples_leaf;
    j["min_impurity_decrease"] = c.tree.min_impurity_decrease;
    j["rules_file"] = c.rules_path;
    j["per_subset_trees"] = c.per_subset_trees;
    j["trace_iterations"] = c.trace_iterations;
    j["mean_silhouette"] = c.mean_silhouette;
    if (!c.schema.empty()) {
        json arr = json::array();
        for (const AttributeSpec& s : c.schema) {
            json js;
            js["name"] = s.name;
            js["kind"] = kind_to_string(s.kind);
            if (!s.categories.empty()) js["categories"] = s.categories;
            arr.push_back(std::move(js));
        }
        j["schema"] = std::move(arr);
    }
    return j;
}

}  // namespace

std::string config_to_json(const PipelineConfig& config) {
    return config_json(config).dump(2) + "\n";
}

void validate_config(const PipelineConfig& config) {
    if (config.input_path.empty()) throw ConfigError("no input file given");
    if (!fs::exists(config.input_path))
        throw InputError("input file does not exist: " + config.input_path);
    if (config.theta >= 0.0)
        throw ParameterError("theta must be negative");
    if (config.fixed_gamma && !(*config.fixed_gamma >= 0.5 && *config.fixed_gamma < 1.0))
        throw ParameterError("damping factor must be in [0.5, 1)");
    if (!config.fixed_gamma) {
        if (config.gamma_grid.empty())
            throw ParameterError("gamma grid must not be empty");
        for (double g : config.gamma_grid)
            if (!(g >= 0.5 && g < 1.0))
                throw ParameterError("damping factor must be in [0.5, 1)");
    }
    if (config.max_iter < 1) throw ParameterError("max_iter must be >= 1");
    if (config.stable_window < 1) throw ParameterError("stable_window must be >= 1");
    if (config.tree.min_samples_leaf < 1)
        throw ParameterError("min_samples_leaf must be >= 1");
    if (config.tree.min_impurity_decrease < 0.0)
        throw ParameterError("min_impurity_decrease must be >= 0");
    if (config.workers < 1) throw ParameterError("workers must be >= 1");
    if (!config.count_attributes.empty() && config.denominator_attribute.empty())
        throw ConfigError("count attributes need a denominator attribute");
    std::set<std::string> seen;
    for (const AttributeSpec& s : config.schema) {
        if (s.name.empty()) throw ConfigError("schema attribute with empty name");
        if (!seen.insert(s.name).second)
            throw ConfigError("duplicate schema attribute: " + s.name);
    }
    if (!config.rules_path.empty()) load_priority_rules(config.rules_path);
}

StateTable tabulate_by_state(const std::vector<std::size_t>& labels, const Dataset& d) {
    if (labels.size() != d.records.size())
        throw InputError("tabulate_by_state: labels do not cover the records");

    std::set<std::string> state_set;
    for (const ColoniaRecord& r : d.records)
        state_set.insert(r.state.empty() ? "(none)" : r.state);

    StateTable t;
    t.states.assign(state_set.begin(), state_set.end());
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < t.states.size(); ++i) col[t.states[i]] = i;

    std::map<std::size_t, StateTable::Row> rows;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        StateTable::Row& row = rows[labels[i]];
        if (row.counts.empty()) {
            row.cluster = labels[i];
            row.counts.assign(t.states.size(), 0);
        }
        const std::string& st =
            d.records[i].state.empty() ? "(none)" : d.records[i].state;
        ++row.counts[col[st]];
        ++row.total;
    }

    for (auto& [cluster, row] : rows) t.rows.push_back(std::move(row));
    std::stable_sort(t.rows.begin(), t.rows.end(),
                     [](const StateTable::Row& a, const StateTable::Row& b) {
                         if (a.total != b.total) return a.total > b.total;
                         return a.cluster < b.cluster;
                     });

    t.column_totals.assign(t.states.size(), 0);
    for (const StateTable::Row& row : t.rows) {
        for (std::size_t i = 0; i < row.counts.size(); ++i)
            t.column_totals[i] += row.counts[i];
        t.grand_total += row.total;
    }
    return t;
}

StateTable tabulate_by_state(const ClusterResult& result, const Dataset& d) {
    return tabulate_by_state(result.labels, d);
}

namespace {

std::string resolve_output_dir(const PipelineConfig& config) {
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv("AQUACLUST_OUTPUT_DIR"); env && *env)
        return env;
    return "out";
}

class StageTimer {
  public:
    explicit StageTimer(RunReport& report) : report_(report) {}

    template <typename F>
    auto run(const char* name, F&& f) -> decltype(f()) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                record(name, t0);
            } else {
                auto result = f();
                record(name, t0);
                return result;
            }
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
    }

  private:
    void record(const char* name, std::chrono::steady_clock::time_point t0) {
        double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        report_.timings.emplace_back(name, secs);
    }

    RunReport& report_;
};

SchemaPolicy policy_from(const PipelineConfig& config) {
    if (config.schema.empty()) return SchemaPolicy::infer();
    return SchemaPolicy::explicit_schema(config.schema);
}

// Dense global cluster ids: exemplar order within the subset, offset across
// subsets.
void finish_subset(SubsetReport& sr, const PriorityRuleSet& rules) {
    const ClusterResult& r = sr.clustering;
    std::map<std::size_t, std::size_t> global_of;  // exemplar index -> global id
    for (std::size_t k = 0; k < r.exemplars.size(); ++k)
        global_of[r.exemplars[k]] = sr.cluster_offset + k;

    sr.global_labels.resize(r.labels.size());
    for (std::size_t i = 0; i < r.labels.size(); ++i)
        sr.global_labels[i] = global_of.at(r.labels[i]);

    sr.exemplar_ids.clear();
    for (std::size_t k : r.exemplars) sr.exemplar_ids.push_back(sr.data.records[k].id);

    sr.by_state = tabulate_by_state(sr.global_labels, sr.data);

    sr.profiles = profile_clusters(sr.data, r);
    for (ClusterProfile& p : sr.profiles) p.cluster_id = global_of.at(p.cluster_id);
    sr.priorities = assign_priorities(sr.profiles, rules);
}

TreeReport explain_labels(const std::string& tag, const Dataset& d,
                          const std::vector<std::size_t>& labels,
                          const std::vector<std::string>& front,
                          const TreeParams& params) {
    FeatureTable ft = build_features(d, front);
    DecisionTree tree = build_tree(ft, labels, params);
    TreeReport tr;
    tr.subset = tag;
    tr.accuracy = training_accuracy(tree, ft, labels);
    if (!tree.root->is_leaf)
        tr.root_attribute = tree.columns[tree.root->column].attribute;
    tr.rules = extract_rules(tree, ft, labels);
    tr.importance = rank_attributes(tree);
    tr.tree_text = tree_to_text(tree);
    return tr;
}

void write_quarantine(const RunReport& report, const std::string& out_dir,
                      const StageError& err) {
    try {
        fs::path dir = fs::path(out_dir) / "quarantine";
        fs::create_directories(dir);
        std::ofstream msg(dir / "error.txt", std::ios::binary | std::ios::trunc);
        msg << err.what() << "\n";
        std::ofstream partial(dir / "report.json", std::ios::binary | std::ios::trunc);
        partial << report_to_json(report);
    } catch (...) {
        // Quarantine is best effort; the stage error is what matters.
    }
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& config) {
    validate_config(config);

    RunReport report;
    report.config = config;
    report.config.output_dir = resolve_output_dir(config);
    const std::string out_dir = report.config.output_dir;

    StageTimer timer(report);
    try {
        PriorityRuleSet rules = config.rules_path.empty()
                                    ? default_priority_rules()
                                    : load_priority_rules(config.rules_path);

        Dataset raw = timer.run("load", [&] {
            return load_dataset(config.input_path, policy_from(config));
        });
        report.input_records = raw.size() + raw.removed.size();

        Dataset filtered = timer.run("normalize", [&] {
            if (config.count_attributes.empty()) {
                Dataset d = raw;
                d.stage = Stage::Filtered;
                return d;
            }
            return normalize_and_filter(raw, config.count_attributes,
                                        config.denominator_attribute);
        });
        report.kept_records = filtered.size();
        report.removed = filtered.removed;

        std::map<std::string, Dataset> subsets;
        if (config.partition_attribute.empty()) {
            subsets.emplace("all", filtered);
        } else {
            subsets = timer.run("partition", [&] {
                return partition_by(filtered, config.partition_attribute);
            });
        }

        ApOptions base_opts;
        base_opts.max_iter = config.max_iter;
        base_opts.stable_window = config.stable_window;

        std::size_t offset = 0;
        for (auto& [token, subset] : subsets) {
            SubsetReport sr;
            sr.subset = token;
            sr.data = std::move(subset);
            sr.cluster_offset = offset;

            if (sr.data.size() == 1) {
                sr.clustering.exemplars = {0};
                sr.clustering.labels = {0};
                sr.clustering.converged = true;
                sr.best_gamma = config.fixed_gamma.value_or(0.0);
                report.warnings.push_back("subset '" + token +
                                          "' has a single record; clustering is trivial");
            } else {
                const std::string stage_name = config.fixed_gamma ? "cluster" : "sweep";
                auto [D, S] = timer.run("gower", [&] {
                    EncodedMatrix enc = encode_categorical(sr.data);
                    DissimilarityMatrix dm = gower_matrix(sr.data, enc);
                    SimilarityMatrix sm = to_similarity(dm, config.theta);
                    return std::make_pair(std::move(dm), std::move(sm));
                });
                timer.run(stage_name.c_str(), [&] {
                    if (config.fixed_gamma) {
                        ApOptions opts = base_opts;
                        opts.gamma = *config.fixed_gamma;
                        sr.clustering = run_ap(
                            S, opts, config.trace_iterations ? &sr.trace : nullptr);
                        sr.best_gamma = opts.gamma;
                        sr.silhouette = silhouette_global(D, sr.clustering.labels);
                        sr.sweep = {{opts.gamma, sr.silhouette,
                                     sr.clustering.cluster_count(),
                                     sr.clustering.converged}};
                    } else {
                        SweepResult sweep = damping_sweep(S, D, config.gamma_grid,
                                                          base_opts, config.workers);
                        sr.sweep = sweep.entries;
                        sr.best_gamma = sweep.best_gamma();
                        sr.silhouette = sweep.entries[sweep.best_index].silhouette;
                        sr.clustering = std::move(sweep.best_clustering);
                        if (config.trace_iterations) {
                            ApOptions opts = base_opts;
                            opts.gamma = sr.best_gamma;
                            run_ap(S, opts, &sr.trace);
                        }
                    }
                    if (config.mean_silhouette)
                        sr.mean_silhouette = silhouette_mean(D, sr.clustering.labels);
                });
            }

            timer.run("priorities", [&] { finish_subset(sr, rules); });
            for (const PriorityDecision& d : sr.priorities)
                if (d.matched_default)
                    report.warnings.push_back(
                        "cluster " + std::to_string(d.cluster_id) + " in subset '" +
                        token + "' matched no explicit priority rule; assigned default level " +
                        std::to_string(d.level));

            offset += sr.clustering.cluster_count();
            report.subsets.push_back(std::move(sr));
        }

        if (report.kept_records > 0) {
            timer.run("explain", [&] {
                if (config.per_subset_trees) {
                    for (const SubsetReport& sr : report.subsets)
                        report.trees.push_back(explain_labels(
                            sr.subset, sr.data, sr.global_labels, {}, config.tree));
                    return;
                }
                // Union tree over the pre-partition records; labels follow
                // each record into its subset, partition attribute first so
                // the root can reproduce the subset split.
                std::vector<std::size_t> union_labels(filtered.size());
                std::map<std::string, std::pair<const SubsetReport*, std::size_t>> cursor;
                for (const SubsetReport& sr : report.subsets)
                    cursor[sr.subset] = {&sr, 0};
                std::optional<std::size_t> part_idx;
                if (!config.partition_attribute.empty())
                    part_idx = filtered.schema.index_of(config.partition_attribute);
                for (std::size_t i = 0; i < filtered.size(); ++i) {
                    const std::string token =
                        part_idx ? filtered.records[i].cat(*part_idx)
                                 : std::string("all");
                    auto& [sr, next] = cursor.at(token);
                    union_labels[i] = sr->global_labels[next++];
                }
                std::vector<std::string> front;
                if (!config.partition_attribute.empty())
                    front.push_back(config.partition_attribute);
                report.trees.push_back(
                    explain_labels("union", filtered, union_labels, front, config.tree));
            });
        }

        for (const SubsetReport& sr : report.subsets)
            for (const ColoniaRecord& rec : sr.data.records)
                if (rec.location) ++report.records_with_coordinates;
        report.geojson_written = report.records_with_coordinates > 0;
        if (!report.geojson_written)
            report.warnings.push_back(
                "no record carries coordinates; assignments.geojson omitted");

        timer.run("write", [&] { write_report(report, out_dir); });
    } catch (const StageError& e) {
        write_quarantine(report, out_dir, e);
        throw;
    }
    return report;
}

namespace {

json profile_json(const ClusterProfile& p) {
    json j;
    j["cluster"] = p.cluster_id;
    j["size"] = p.size;
    json cat = json::object();
    for (const auto& [attr, s] : p.categorical) {
        json js;
        js["modal"] = s.modal;
        js["frequency"] = s.modal_frequency;
        js["frequencies"] = s.frequencies;
        cat[attr] = std::move(js);
    }
    j["categorical"] = std::move(cat);
    j["numeric_means"] = p.numeric_means;
    return j;
}

json state_table_json(const StateTable& t) {
    json j;
    j["states"] = t.states;
    json rows = json::array();
    for (const StateTable::Row& row : t.rows) {
        json jr;
        jr["cluster"] = row.cluster;
        jr["total"] = row.total;
        jr["counts"] = row.counts;
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    j["column_totals"] = t.column_totals;
    j["total"] = t.grand_total;
    return j;
}

std::string comparator_text(Comparator op) {
    switch (op) {
        case Comparator::LessEq: return "<=";
        case Comparator::Greater: return ">";
        case Comparator::Eq: return "=";
        case Comparator::Ne: return "!=";
    }
    return "?";
}

json rule_json(const DecisionRule& r) {
    json j;
    j["cluster"] = r.predicted_cluster;
    j["support"] = r.support;
    j["coverage"] = r.coverage;
    json conds = json::array();
    for (const RuleCondition& c : r.conditions) {
        json jc;
        jc["attribute"] = c.attribute;
        jc["op"] = comparator_text(c.op);
        if (c.op == Comparator::Eq || c.op == Comparator::Ne)
            jc["value"] = c.category;
        else
            jc["threshold"] = c.threshold;
        conds.push_back(std::move(jc));
    }
    j["conditions"] = std::move(conds);
    return j;
}

json subset_json(const SubsetReport& sr) {
    json j;
    j["subset"] = sr.subset;
    j["kept"] = sr.data.size();
    j["cluster_offset"] = sr.cluster_offset;
    j["clusters"] = sr.clustering.cluster_count();
    j["best_gamma"] = sr.best_gamma;
    j["silhouette"] = sr.silhouette;
    if (sr.mean_silhouette) j["mean_silhouette"] = *sr.mean_silhouette;
    j["iterations"] = sr.clustering.iterations_run;
    j["converged"] = sr.clustering.converged;
    j["net_similarity"] = sr.clustering.net_similarity;

    json sweep = json::array();
    for (const SweepEntry& e : sr.sweep) {
        json je;
        je["gamma"] = e.gamma;
        je["silhouette"] = e.silhouette;
        je["clusters"] = e.cluster_count;
        je["converged"] = e.converged;
        sweep.push_back(std::move(je));
    }
    j["sweep"] = std::move(sweep);

    json constants = json::array();
    for (const ConstantAttribute& c : sr.data.constants) {
        json jc;
        jc["name"] = c.name;
        jc["kind"] = kind_to_string(c.kind);
        jc["value"] = c.value;
        constants.push_back(std::move(jc));
    }
    j["constants"] = std::move(constants);

    json exemplars = json::array();
    for (std::size_t k = 0; k < sr.exemplar_ids.size(); ++k) {
        json je;
        je["cluster"] = sr.cluster_offset + k;
        je["record_id"] = sr.exemplar_ids[k];
        exemplars.push_back(std::move(je));
    }
    j["exemplars"] = std::move(exemplars);

    j["by_state"] = state_table_json(sr.by_state);

    json profiles = json::array();
    for (const ClusterProfile& p : sr.profiles) profiles.push_back(profile_json(p));
    j["profiles"] = std::move(profiles);

    json priorities = json::array();
    for (const PriorityDecision& d : sr.priorities) {
        json jd;
        jd["cluster"] = d.cluster_id;
        jd["priority"] = d.level;
        jd["rule"] = d.rule_text;
        jd["basis"] = d.basis;
        jd["default_used"] = d.matched_default;
        priorities.push_back(std::move(jd));
    }
    j["priorities"] = std::move(priorities);
    return j;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
    json j;
    j["config"] = config_json(report.config);
    j["input_records"] = report.input_records;
    j["kept_records"] = report.kept_records;
    j["removed_count"] = report.removed.size();

    json removed = json::array();
    for (const RemovedRecord& r : report.removed) {
        json jr;
        jr["record_id"] = r.id;
        jr["source_row"] = r.source_row;
        jr["reason"] = r.reason;
        removed.push_back(std::move(jr));
    }
    j["removed"] = std::move(removed);

    json subsets = json::array();
    for (const SubsetReport& sr : report.subsets) subsets.push_back(subset_json(sr));
    j["subsets"] = std::move(subsets);

    json trees = json::array();
    for (const TreeReport& tr : report.trees) {
        json jt;
        jt["subset"] = tr.subset;
        jt["accuracy"] = tr.accuracy;
        jt["root_attribute"] = tr.root_attribute;
        json rules = json::array();
        for (const DecisionRule& r : tr.rules) rules.push_back(rule_json(r));
        jt["rules"] = std::move(rules);
        json importance = json::array();
        for (const AttributeImportance& ai : tr.importance) {
            json ja;
            ja["attribute"] = ai.attribute;
            ja["importance"] = ai.importance;
            ja["best_depth"] = ai.best_depth;
            importance.push_back(std::move(ja));
        }
        jt["importance"] = std::move(importance);
        trees.push_back(std::move(jt));
    }
    j["trees"] = std::move(trees);

    j["records_with_coordinates"] = report.records_with_coordinates;
    j["geojson_written"] = report.geojson_written;
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << content;
    if (!out) throw IoError("cannot write file: " + path.string());
}

std::string assignments_csv(const RunReport& report) {
    std::ostringstream os;
    os << "record_id,subset,cluster,exemplar_id\n";
    for (const SubsetReport& sr : report.subsets)
        for (std::size_t i = 0; i < sr.data.records.size(); ++i) {
            std::size_t global = sr.global_labels[i];
            os << csv::format_row({sr.data.records[i].id, sr.subset,
                                   std::to_string(global),
                                   sr.exemplar_ids[global - sr.cluster_offset]});
        }
    return os.str();
}

std::string clusters_by_state_csv(const RunReport& report) {
    std::set<std::string> all_states;
    for (const SubsetReport& sr : report.subsets)
        all_states.insert(sr.by_state.states.begin(), sr.by_state.states.end());
    std::vector<std::string> states(all_states.begin(), all_states.end());

    std::vector<std::string> header = {"subset", "cluster"};
    header.insert(header.end(), states.begin(), states.end());
    header.push_back("total");

    std::ostringstream os;
    os << csv::format_row(header);
    for (const SubsetReport& sr : report.subsets) {
        std::map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < sr.by_state.states.size(); ++i)
            col[sr.by_state.states[i]] = i;
        for (const StateTable::Row& row : sr.by_state.rows) {
            std::vector<std::string> cells = {sr.subset, std::to_string(row.cluster)};
            for (const std::string& st : states) {
                auto it = col.find(st);
                cells.push_back(std::to_string(
                    it == col.end() ? 0 : row.counts[it->second]));
            }
            cells.push_back(std::to_string(row.total));
            os << csv::format_row(cells);
        }
        std::vector<std::string> totals = {sr.subset, "total"};
        for (const std::string& st : states) {
            auto it = col.find(st);
            totals.push_back(std::to_string(
                it == col.end() ? 0 : sr.by_state.column_totals[it->second]));
        }
        totals.push_back(std::to_string(sr.by_state.grand_total));
        os << csv::format_row(totals);
    }
    return os.str();
}

std::string sweep_csv(const RunReport& report) {
    std::ostringstream os;
    os << "subset,gamma,silhouette,clusters,converged\n";
    for (const SubsetReport& sr : report.subsets)
        for (const SweepEntry& e : sr.sweep)
            os << csv::format_row({sr.subset, csv::format_double(e.gamma),
                                   csv::format_double(e.silhouette),
                                   std::to_string(e.cluster_count),
                                   e.converged ? "true" : "false"});
    return os.str();
}

std::string trace_csv(const RunReport& report) {
    std::ostringstream os;
    os << "subset,iteration,exemplar_count,net_similarity\n";
    for (const SubsetReport& sr : report.subsets)
        for (const IterationTracePoint& p : sr.trace)
            os << csv::format_row({sr.subset, std::to_string(p.iteration),
                                   std::to_string(p.exemplar_count),
                                   csv::format_double(p.net_similarity)});
    return os.str();
}

std::string priorities_csv(const RunReport& report) {
    std::ostringstream os;
    os << "subset,cluster,priority,rule,basis\n";
    for (const SubsetReport& sr : report.subsets)
        for (const PriorityDecision& d : sr.priorities) {
            std::string basis;
            for (std::size_t i = 0; i < d.basis.size(); ++i) {
                if (i) basis += "; ";
                basis += d.basis[i];
            }
            os << csv::format_row({sr.subset, std::to_string(d.cluster_id),
                                   std::to_string(d.level), d.rule_text, basis});
        }
    return os.str();
}

std::string removed_csv(const RunReport& report) {
    std::ostringstream os;
    os << "record_id,source_row,reason\n";
    for (const RemovedRecord& r : report.removed)
        os << csv::format_row({r.id, std::to_string(r.source_row), r.reason});
    return os.str();
}

std::string geojson_text(const RunReport& report) {
    json features = json::array();
    for (const SubsetReport& sr : report.subsets)
        for (std::size_t i = 0; i < sr.data.records.size(); ++i) {
            const ColoniaRecord& rec = sr.data.records[i];
            if (!rec.location) continue;
            json f;
            f["type"] = "Feature";
            f["geometry"] = {{"type", "Point"},
                             {"coordinates", {rec.location->longitude,
                                              rec.location->latitude}}};
            f["properties"] = {{"record_id", rec.id},
                               {"name", rec.name},
                               {"state", rec.state},
                               {"county", rec.county},
                               {"subset", sr.subset},
                               {"cluster", sr.global_labels[i]}};
            features.push_back(std::move(f));
        }
    json root;
    root["type"] = "FeatureCollection";
    root["features"] = std::move(features);
    return root.dump(2) + "\n";
}

}  // namespace

std::string render_rules_text(const std::vector<TreeReport>& trees) {
    std::ostringstream os;
    for (const TreeReport& tr : trees) {
        os << "# " << tr.subset << " (training accuracy "
           << csv::format_double(tr.accuracy) << ")\n";
        for (const DecisionRule& r : tr.rules) os << rule_to_text(r) << "\n";
    }
    return os.str();
}

std::string render_rules_json(const std::vector<TreeReport>& trees) {
    json arr = json::array();
    for (const TreeReport& tr : trees) {
        json jt;
        jt["subset"] = tr.subset;
        jt["accuracy"] = tr.accuracy;
        json rules = json::array();
        for (const DecisionRule& r : tr.rules) rules.push_back(rule_json(r));
        jt["rules"] = std::move(rules);
        arr.push_back(std::move(jt));
    }
    return arr.dump(2) + "\n";
}

std::string render_importance_csv(const std::vector<TreeReport>& trees) {
    std::ostringstream os;
    os << "subset,attribute,importance,best_depth\n";
    for (const TreeReport& tr : trees)
        for (const AttributeImportance& ai : tr.importance)
            os << csv::format_row({tr.subset, ai.attribute,
                                   csv::format_double(ai.importance),
                                   std::to_string(ai.best_depth)});
    return os.str();
}

std::string render_tree_text(const std::vector<TreeReport>& trees) {
    std::ostringstream os;
    for (const TreeReport& tr : trees) os << "# " << tr.subset << "\n" << tr.tree_text;
    return os.str();
}

std::map<std::string, std::vector<ClusterProfile>> profiles_from_report_json(
    const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("report: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("subsets"))
        throw InputError("report: missing 'subsets' section");

    std::map<std::string, std::vector<ClusterProfile>> out;
    try {
        for (const json& js : j.at("subsets")) {
            std::vector<ClusterProfile> profiles;
            for (const json& jp : js.at("profiles")) {
                ClusterProfile p;
                p.cluster_id = jp.at("cluster").get<std::size_t>();
                p.size = jp.at("size").get<std::size_t>();
                for (const auto& [attr, jc] : jp.at("categorical").items()) {
                    CategoricalSummary s;
                    s.modal = jc.at("modal").get<std::string>();
                    s.modal_frequency = jc.at("frequency").get<double>();
                    s.frequencies =
                        jc.at("frequencies").get<std::map<std::string, double>>();
                    p.categorical[attr] = std::move(s);
                }
                p.numeric_means =
                    jp.at("numeric_means").get<std::map<std::string, double>>();
                profiles.push_back(std::move(p));
            }
            out[js.at("subset").get<std::string>()] = std::move(profiles);
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("report: unexpected shape: ") + e.what());
    }
    return out;
}

void write_report(const RunReport& report, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    fs::path dir(out_dir);
    write_file(dir / "assignments.csv", assignments_csv(report));
    write_file(dir / "clusters_by_state.csv", clusters_by_state_csv(report));
    write_file(dir / "sweep.csv", sweep_csv(report));
    write_file(dir / "rules.txt", render_rules_text(report.trees));
    write_file(dir / "rules.json", render_rules_json(report.trees));
    write_file(dir / "importance.csv", render_importance_csv(report.trees));
    write_file(dir / "priorities.csv", priorities_csv(report));
    write_file(dir / "report.json", report_to_json(report));
    write_file(dir / "tree.txt", render_tree_text(report.trees));
    write_file(dir / "removed.csv", removed_csv(report));
    if (report.config.trace_iterations)
        write_file(dir / "trace.csv", trace_csv(report));
    if (report.geojson_written)
        write_file(dir / "assignments.geojson", geojson_text(report));
}

}  // namespace aquaclust
