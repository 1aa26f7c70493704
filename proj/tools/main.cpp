#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "aquaclust/cart.hpp"
#include "aquaclust/csv.hpp"
#include "aquaclust/dataset.hpp"
#include "aquaclust/errors.hpp"
#include "aquaclust/pipeline.hpp"
#include "aquaclust/priority.hpp"

namespace fs = std::filesystem;
using namespace aquaclust;

namespace {

struct CommonFlags {
    std::string input, config_path, output, partition, denominator, rules;
    std::vector<std::string> counts;
    std::vector<double> grid;
    double theta = -1.0;
    double gamma = 0.6;
    double min_impurity_decrease = 0.0;
    std::size_t max_iter = 1000, stable_window = 15, max_depth = 12,
                min_samples_leaf = 1, workers = 1;
    bool per_subset = false, trace = false, mean_sil = false, no_partition = false;

    CLI::Option *o_input = nullptr, *o_config = nullptr, *o_output = nullptr,
                *o_partition = nullptr, *o_counts = nullptr, *o_denominator = nullptr,
                *o_theta = nullptr, *o_gamma = nullptr, *o_grid = nullptr,
                *o_max_iter = nullptr, *o_stable = nullptr, *o_max_depth = nullptr,
                *o_msl = nullptr, *o_mid = nullptr, *o_rules = nullptr,
                *o_workers = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_gamma, bool with_grid) {
    f.o_input = cmd->add_option("-i,--input", f.input, "Input CSV file");
    f.o_config = cmd->add_option("-c,--config", f.config_path,
                                 "JSON config file; flags override its fields");
    f.o_output = cmd->add_option(
        "-o,--output", f.output,
        "Output directory (default: $AQUACLUST_OUTPUT_DIR, else ./out)");
    f.o_partition = cmd->add_option("--partition-attribute", f.partition,
                                    "Categorical attribute that splits the data into subsets");
    cmd->add_flag("--no-partition", f.no_partition,
                  "Treat all records as a single subset");
    f.o_counts = cmd->add_option("--count-attribute", f.counts,
                                 "Count attribute normalized by the denominator (repeatable)");
    f.o_denominator = cmd->add_option("--denominator", f.denominator,
                                      "Denominator attribute for count normalization");
    f.o_theta = cmd->add_option("--theta", f.theta,
                                "Distance-to-similarity scale, must be negative");
    if (with_gamma)
        f.o_gamma = cmd->add_option("--gamma", f.gamma,
                                    "Fixed damping factor in [0.5, 1)");
    if (with_grid)
        f.o_grid = cmd->add_option("--gamma-grid", f.grid,
                                   "Comma-separated damping factors to sweep")
                       ->delimiter(',');
    f.o_max_iter =
        cmd->add_option("--max-iter", f.max_iter, "Message-passing iteration cap");
    f.o_stable = cmd->add_option(
        "--stable-window", f.stable_window,
        "Iterations the exemplar set must stay unchanged to converge");
    f.o_max_depth = cmd->add_option("--max-depth", f.max_depth,
                                    "Explanation tree depth cap");
    f.o_msl = cmd->add_option("--min-samples-leaf", f.min_samples_leaf,
                              "Minimum records per tree leaf");
    f.o_mid = cmd->add_option("--min-impurity-decrease", f.min_impurity_decrease,
                              "Minimum impurity decrease to keep a split");
    f.o_rules = cmd->add_option("--rules", f.rules,
                                "Priority rules JSON file (default: built-in)");
    cmd->add_flag("--per-subset-trees", f.per_subset,
                  "Fit one explanation tree per subset instead of the union tree");
    cmd->add_flag("--trace", f.trace,
                  "Write a per-iteration trace.csv for the selected run");
    cmd->add_flag("--mean-silhouette", f.mean_sil,
                  "Also report the per-point mean silhouette");
    f.o_workers =
        cmd->add_option("--workers", f.workers, "Concurrent damping-factor runs");
}

PipelineConfig build_config(const CommonFlags& f, PipelineConfig base) {
    PipelineConfig c = std::move(base);
    if (f.o_config->count()) c = load_config(f.config_path, c);
    if (f.o_input->count()) c.input_path = f.input;
    if (f.o_output->count()) c.output_dir = f.output;
    if (f.o_partition->count()) c.partition_attribute = f.partition;
    if (f.no_partition) c.partition_attribute.clear();
    if (f.o_counts->count()) c.count_attributes = f.counts;
    if (f.o_denominator->count()) c.denominator_attribute = f.denominator;
    if (f.o_theta->count()) c.theta = f.theta;
    if (f.o_gamma && f.o_gamma->count()) c.fixed_gamma = f.gamma;
    if (f.o_grid && f.o_grid->count()) c.gamma_grid = f.grid;
    if (f.o_max_iter->count()) c.max_iter = f.max_iter;
    if (f.o_stable->count()) c.stable_window = f.stable_window;
    if (f.o_max_depth->count()) c.tree.max_depth = f.max_depth;
    if (f.o_msl->count()) c.tree.min_samples_leaf = f.min_samples_leaf;
    if (f.o_mid->count()) c.tree.min_impurity_decrease = f.min_impurity_decrease;
    if (f.o_rules->count()) c.rules_path = f.rules;
    if (f.per_subset) c.per_subset_trees = true;
    if (f.trace) c.trace_iterations = true;
    if (f.mean_sil) c.mean_silhouette = true;
    if (f.o_workers->count()) c.workers = f.workers;
    return c;
}

std::string default_out_dir() {
    if (const char* env = std::getenv("AQUACLUST_OUTPUT_DIR"); env && *env) return env;
    return "out";
}

int run_pipeline_cmd(const PipelineConfig& config) {
    RunReport report = run_pipeline(config);
    std::cout << "input records: " << report.input_records << " (kept "
              << report.kept_records << ", removed " << report.removed.size()
              << ")\n";
    for (const SubsetReport& sr : report.subsets)
        std::cout << "subset '" << sr.subset << "': " << sr.data.size()
                  << " records, " << sr.clustering.cluster_count()
                  << " clusters, gamma " << csv::format_double(sr.best_gamma)
                  << ", silhouette " << csv::format_double(sr.silhouette)
                  << (sr.clustering.converged ? "" : " (not converged)") << "\n";
    for (const TreeReport& tr : report.trees)
        std::cout << "tree '" << tr.subset << "': training accuracy "
                  << csv::format_double(tr.accuracy) << ", " << tr.rules.size()
                  << " rules\n";
    std::cout << "artifacts: " << report.config.output_dir << "\n";
    for (const auto& [stage, secs] : report.timings)
        std::cerr << "[" << stage << "] " << csv::format_double(secs) << "s\n";
    return 0;
}

struct ExplainFlags {
    std::string input, label_column, output;
    std::size_t max_depth = 12, min_samples_leaf = 1;
    double min_impurity_decrease = 0.0;
};

std::size_t label_from_value(const Value& v, std::size_t row,
                             const std::string& column) {
    if (std::holds_alternative<double>(v)) {
        double d = std::get<double>(v);
        if (d >= 0.0 && d == static_cast<double>(static_cast<std::size_t>(d)))
            return static_cast<std::size_t>(d);
    } else {
        const std::string& tok = std::get<std::string>(v);
        std::size_t out = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
        if (ec == std::errc{} && ptr == tok.data() + tok.size()) return out;
    }
    throw ParseError("row " + std::to_string(row) +
                     ": label column '" + column +
                     "' must hold non-negative integers");
}

int run_explain(const ExplainFlags& f) {
    if (!fs::exists(f.input))
        throw InputError("input file does not exist: " + f.input);
    const std::string out_dir = f.output.empty() ? default_out_dir() : f.output;

    std::vector<TreeReport> trees;
    try {
        Dataset d = load_dataset(f.input);
        auto idx = d.schema.index_of_loose(f.label_column);
        if (!idx) throw SchemaError("missing column: " + f.label_column);

        std::vector<std::size_t> labels;
        labels.reserve(d.records.size());
        for (std::size_t r = 0; r < d.records.size(); ++r)
            labels.push_back(
                label_from_value(d.records[r].values[*idx], r + 1, f.label_column));

        d.schema.attributes.erase(d.schema.attributes.begin() +
                                  static_cast<std::ptrdiff_t>(*idx));
        for (ColoniaRecord& rec : d.records)
            rec.values.erase(rec.values.begin() + static_cast<std::ptrdiff_t>(*idx));
        d.stage = Stage::Filtered;
        if (d.records.empty()) throw InputError("no records to explain");

        FeatureTable ft = build_features(d);
        TreeParams params{f.max_depth, f.min_samples_leaf, f.min_impurity_decrease};
        DecisionTree tree = build_tree(ft, labels, params);
        TreeReport tr;
        tr.subset = "labels";
        tr.accuracy = training_accuracy(tree, ft, labels);
        if (!tree.root->is_leaf)
            tr.root_attribute = tree.columns[tree.root->column].attribute;
        tr.rules = extract_rules(tree, ft, labels);
        tr.importance = rank_attributes(tree);
        tr.tree_text = tree_to_text(tree);
        trees.push_back(std::move(tr));
    } catch (const Error& e) {
        throw StageError("explain", e.what());
    }

    fs::create_directories(out_dir);
    auto write = [&](const char* name, const std::string& content) {
        std::ofstream out(fs::path(out_dir) / name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(std::string("cannot write file: ") + name);
        out << content;
    };
    write("rules.txt", render_rules_text(trees));
    write("rules.json", render_rules_json(trees));
    write("importance.csv", render_importance_csv(trees));
    write("tree.txt", render_tree_text(trees));

    std::cout << "training accuracy: " << csv::format_double(trees[0].accuracy)
              << "\n"
              << trees[0].rules.size() << " rules -> " << out_dir << "\n";
    return 0;
}

struct PrioritizeFlags {
    std::string report, rules, output;
};

int run_prioritize(const PrioritizeFlags& f) {
    if (!fs::exists(f.report))
        throw InputError("report file does not exist: " + f.report);
    const std::string out_dir = f.output.empty() ? default_out_dir() : f.output;
    PriorityRuleSet rules =
        f.rules.empty() ? default_priority_rules() : load_priority_rules(f.rules);

    std::ostringstream csv_out;
    csv_out << "subset,cluster,priority,rule,basis\n";
    try {
        std::ifstream in(f.report, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        auto by_subset = profiles_from_report_json(buf.str());
        for (const auto& [subset, profiles] : by_subset) {
            for (const PriorityDecision& d : assign_priorities(profiles, rules)) {
                std::string basis;
                for (std::size_t i = 0; i < d.basis.size(); ++i) {
                    if (i) basis += "; ";
                    basis += d.basis[i];
                }
                csv_out << csv::format_row({subset, std::to_string(d.cluster_id),
                                            std::to_string(d.level), d.rule_text,
                                            basis})
                        << "\n";
                std::cout << subset << "/" << d.cluster_id << " -> priority "
                          << d.level << " (" << d.rule_text << ")\n";
            }
        }
    } catch (const Error& e) {
        throw StageError("prioritize", e.what());
    }

    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "priorities.csv",
                      std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: priorities.csv");
    out << csv_out.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Clusters mixed-type community water records with exemplar-based "
        "message passing, explains the clusters with a decision tree, and "
        "maps them to priority levels"};
    app.require_subcommand(1);

    CommonFlags pipe_flags, cluster_flags, sweep_flags;
    CLI::App* pipe =
        app.add_subcommand("pipeline", "Run the full workflow and write all artifacts");
    add_common(pipe, pipe_flags, true, true);
    CLI::App* cluster = app.add_subcommand(
        "cluster", "Cluster one dataset at a fixed damping factor");
    add_common(cluster, cluster_flags, true, false);
    CLI::App* sweep = app.add_subcommand(
        "sweep", "Sweep damping factors and keep the best clustering");
    add_common(sweep, sweep_flags, false, true);

    ExplainFlags explain_flags;
    CLI::App* explain = app.add_subcommand(
        "explain", "Fit a decision tree to existing labels and extract rules");
    explain->add_option("-i,--input", explain_flags.input, "Input CSV file")
        ->required();
    explain
        ->add_option("--label-column", explain_flags.label_column,
                     "Column holding the cluster labels")
        ->required();
    explain->add_option("-o,--output", explain_flags.output, "Output directory");
    explain->add_option("--max-depth", explain_flags.max_depth, "Tree depth cap");
    explain->add_option("--min-samples-leaf", explain_flags.min_samples_leaf,
                        "Minimum records per leaf");
    explain->add_option("--min-impurity-decrease",
                        explain_flags.min_impurity_decrease,
                        "Minimum impurity decrease to keep a split");

    PrioritizeFlags prioritize_flags;
    CLI::App* prioritize = app.add_subcommand(
        "prioritize", "Apply priority rules to the cluster profiles of a report");
    prioritize
        ->add_option("-r,--report", prioritize_flags.report,
                     "report.json from an earlier run")
        ->required();
    prioritize->add_option("--rules", prioritize_flags.rules,
                           "Priority rules JSON file (default: built-in)");
    prioritize->add_option("-o,--output", prioritize_flags.output,
                           "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (pipe->parsed()) return run_pipeline_cmd(build_config(pipe_flags, {}));
        if (cluster->parsed()) {
            PipelineConfig base;
            base.partition_attribute.clear();
            PipelineConfig c = build_config(cluster_flags, std::move(base));
            if (!c.fixed_gamma) c.fixed_gamma = 0.6;
            return run_pipeline_cmd(c);
        }
        if (sweep->parsed()) {
            PipelineConfig base;
            base.partition_attribute.clear();
            PipelineConfig c = build_config(sweep_flags, std::move(base));
            c.fixed_gamma.reset();
            return run_pipeline_cmd(c);
        }
        if (explain->parsed()) return run_explain(explain_flags);
        if (prioritize->parsed()) return run_prioritize(prioritize_flags);
    } catch (const StageError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
