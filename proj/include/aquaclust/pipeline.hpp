#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aquaclust/affinity.hpp"
#include "aquaclust/cart.hpp"
#include "aquaclust/dataset.hpp"
#include "aquaclust/evaluate.hpp"
#include "aquaclust/priority.hpp"

namespace aquaclust {

struct PipelineConfig {
    std::string input_path;
    std::string output_dir;  // empty -> $AQUACLUST_OUTPUT_DIR, else "out"
    std::string partition_attribute = "Public Water Service";  // empty -> no split
    std::vector<std::string> count_attributes = {
        "People without Water", "People without Wastewater", "People with Water",
        "People with Wastewater"};
    std::string denominator_attribute = "Estimated Population";
    double theta = -1.0;
    std::optional<double> fixed_gamma;  // set -> single run, no sweep
    std::vector<double> gamma_grid = default_gamma_grid();
    std::size_t max_iter = 1000;
    std::size_t stable_window = 15;
    TreeParams tree;
    std::string rules_path;  // empty -> shipped defaults
    bool per_subset_trees = false;
    bool trace_iterations = false;
    bool mean_silhouette = false;
    std::size_t workers = 1;
    std::vector<AttributeSpec> schema;  // empty -> infer kinds from the data
};

// Flag values win over JSON fields; JSON wins over built-in defaults.
PipelineConfig config_from_json(const std::string& json_text,
                                const PipelineConfig& base = {});
PipelineConfig load_config(const std::string& path, const PipelineConfig& base = {});
std::string config_to_json(const PipelineConfig& config);

// Checks parameters, input existence, and the rules file before any
// computation. Throws untagged errors (the CLI maps them to usage failures).
void validate_config(const PipelineConfig& config);

struct StateTable {
    std::vector<std::string> states;  // ascending
    struct Row {
        std::size_t cluster = 0;
        std::size_t total = 0;
        std::vector<std::size_t> counts;  // aligned with states
    };
    std::vector<Row> rows;  // by total descending, then cluster ascending
    std::vector<std::size_t> column_totals;
    std::size_t grand_total = 0;
};

StateTable tabulate_by_state(const std::vector<std::size_t>& labels, const Dataset& d);
StateTable tabulate_by_state(const ClusterResult& result, const Dataset& d);

struct SubsetReport {
    std::string subset;  // partition token, or "all"
    Dataset data;        // the filtered subset fed to this stage
    std::size_t cluster_offset = 0;
    std::vector<SweepEntry> sweep;
    double best_gamma = 0.0;
    double silhouette = 0.0;
    std::optional<double> mean_silhouette;
    ClusterResult clustering;                 // labels are exemplar indices
    std::vector<std::size_t> global_labels;   // dense ids across subsets
    std::vector<std::string> exemplar_ids;    // record id per global cluster
    std::vector<IterationTracePoint> trace;   // best run, when requested
    StateTable by_state;
    std::vector<ClusterProfile> profiles;     // cluster_id holds the global id
    std::vector<PriorityDecision> priorities;
};

struct TreeReport {
    std::string subset;  // "union" or a partition token
    double accuracy = 0.0;
    std::string root_attribute;
    std::vector<DecisionRule> rules;
    std::vector<AttributeImportance> importance;
    std::string tree_text;
};

struct RunReport {
    PipelineConfig config;
    std::size_t input_records = 0;
    std::size_t kept_records = 0;
    std::vector<RemovedRecord> removed;
    std::vector<SubsetReport> subsets;
    std::vector<TreeReport> trees;
    std::size_t records_with_coordinates = 0;
    bool geojson_written = false;
    std::vector<std::string> warnings;
    // Wall-clock stage timings; diagnostic only, never serialized so
    // repeated runs stay byte-identical.
    std::vector<std::pair<std::string, double>> timings;
};

// Serialization used for report.json (timings excluded).
std::string report_to_json(const RunReport& report);

// Renderers shared by write_report and the explain subcommand.
std::string render_rules_text(const std::vector<TreeReport>& trees);
std::string render_rules_json(const std::vector<TreeReport>& trees);
std::string render_importance_csv(const std::vector<TreeReport>& trees);
std::string render_tree_text(const std::vector<TreeReport>& trees);

// Parses the "subsets[].profiles" section of a serialized report, keyed by
// subset token, for the prioritize subcommand.
std::map<std::string, std::vector<ClusterProfile>> profiles_from_report_json(
    const std::string& json_text);

/// Runs load -> normalize/filter -> partition -> per-subset (Gower,
/// similarity, sweep or fixed-gamma run, silhouette, profiles, priorities)
/// -> decision tree -> artifact writing. Stage failures are rethrown as
/// StageError after partial results are saved under <output_dir>/quarantine.
RunReport run_pipeline(const PipelineConfig& config);

/// Writes assignments.csv, clusters_by_state.csv, sweep.csv, rules.txt,
/// rules.json, importance.csv, priorities.csv, report.json, tree.txt,
/// removed.csv and, when coordinates exist, assignments.geojson.
void write_report(const RunReport& report, const std::string& out_dir);

}  // namespace aquaclust
