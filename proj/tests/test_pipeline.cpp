#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aquaclust/errors.hpp"
#include "aquaclust/pipeline.hpp"
#include "fixtures.hpp"

using namespace aquaclust;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kArtifacts = {
    "assignments.csv", "clusters_by_state.csv", "sweep.csv",
    "rules.txt",       "rules.json",            "importance.csv",
    "priorities.csv",  "report.json",           "tree.txt",
    "removed.csv"};

PipelineConfig planted_config(const fixtures::TempDir& tmp, bool noise = true,
                              bool coords = true) {
    auto fx = fixtures::make_planted(noise, coords);
    fixtures::write_text(tmp / "input.csv", fx.csv_text);
    PipelineConfig cfg;
    cfg.input_path = (tmp / "input.csv").string();
    cfg.output_dir = (tmp / "out").string();
    return cfg;
}

}  // namespace

TEST_CASE("config JSON layers over defaults and rejects unknown keys") {
    PipelineConfig cfg = config_from_json(R"({
        "input": "data.csv",
        "theta": -2.5,
        "gamma": 0.7,
        "max_depth": 3,
        "count_attributes": ["A", "B"],
        "per_subset_trees": true,
        "workers": 4
    })");
    CHECK(cfg.input_path == "data.csv");
    CHECK(cfg.theta == -2.5);
    REQUIRE(cfg.fixed_gamma.has_value());
    CHECK(*cfg.fixed_gamma == 0.7);
    CHECK(cfg.tree.max_depth == 3);
    CHECK(cfg.count_attributes == std::vector<std::string>{"A", "B"});
    CHECK(cfg.per_subset_trees);
    CHECK(cfg.workers == 4);
    CHECK(cfg.partition_attribute == "Public Water Service");  // default retained

    CHECK_THROWS_AS(config_from_json(R"({"inptu": "x"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json("[1]"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{nope"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"theta": "deep"})"), ConfigError);
}

TEST_CASE("the config echo omits execution-only knobs") {
    PipelineConfig cfg;
    cfg.input_path = "in.csv";
    cfg.output_dir = "/somewhere/else";
    cfg.workers = 8;
    std::string echoed = config_to_json(cfg);
    auto j = nlohmann::json::parse(echoed);
    CHECK(j.contains("input"));
    CHECK(j.contains("gamma_grid"));
    CHECK_FALSE(j.contains("output_dir"));
    CHECK_FALSE(j.contains("workers"));

    PipelineConfig round = config_from_json(echoed);
    CHECK(round.input_path == cfg.input_path);
    CHECK(round.gamma_grid == cfg.gamma_grid);
    CHECK(round.theta == cfg.theta);
}

TEST_CASE("config validation catches bad parameters upfront") {
    fixtures::TempDir tmp("validate");
    PipelineConfig cfg = planted_config(tmp);
    CHECK_NOTHROW(validate_config(cfg));

    PipelineConfig no_input = cfg;
    no_input.input_path.clear();
    CHECK_THROWS_AS(validate_config(no_input), ConfigError);

    PipelineConfig missing = cfg;
    missing.input_path = (tmp / "absent.csv").string();
    CHECK_THROWS_AS(validate_config(missing), InputError);

    PipelineConfig bad_theta = cfg;
    bad_theta.theta = 0.5;
    CHECK_THROWS_AS(validate_config(bad_theta), ParameterError);

    PipelineConfig bad_gamma = cfg;
    bad_gamma.fixed_gamma = 0.2;
    CHECK_THROWS_AS(validate_config(bad_gamma), ParameterError);

    PipelineConfig bad_grid = cfg;
    bad_grid.gamma_grid = {0.5, 1.5};
    CHECK_THROWS_AS(validate_config(bad_grid), ParameterError);

    PipelineConfig no_workers = cfg;
    no_workers.workers = 0;
    CHECK_THROWS_AS(validate_config(no_workers), ParameterError);

    PipelineConfig bad_rules = cfg;
    fixtures::write_text(tmp / "rules.json", "{}");
    bad_rules.rules_path = (tmp / "rules.json").string();
    CHECK_THROWS_AS(validate_config(bad_rules), ConfigError);
}

TEST_CASE("state tabulation sorts rows by share and states alphabetically") {
    Dataset d = load_dataset_text(
        "State,Pop\n"
        "TX,1\nTX,2\nNM,3\nAZ,4\n,5\n");
    d.stage = Stage::Filtered;
    StateTable t = tabulate_by_state({7, 7, 7, 2, 2}, d);
    CHECK(t.states == std::vector<std::string>{"(none)", "AZ", "NM", "TX"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].cluster == 7);  // 3 members beat 2
    CHECK(t.rows[0].total == 3);
    CHECK(t.rows[0].counts == std::vector<std::size_t>{0, 0, 1, 2});
    CHECK(t.rows[1].cluster == 2);
    CHECK(t.rows[1].counts == std::vector<std::size_t>{1, 1, 0, 0});
    CHECK(t.column_totals == std::vector<std::size_t>{1, 1, 1, 2});
    CHECK(t.grand_total == 5);
    CHECK_THROWS_AS(tabulate_by_state({1, 2}, d), InputError);
}

TEST_CASE("pipeline recovers the planted structure end to end") {
    fixtures::TempDir tmp("planted");
    PipelineConfig cfg = planted_config(tmp);
    RunReport report = run_pipeline(cfg);

    CHECK(report.input_records == 43);
    CHECK(report.kept_records == 40);
    REQUIRE(report.removed.size() == 3);
    CHECK(report.removed[0].id == "X1");
    CHECK(report.removed[0].source_row == 41);
    CHECK(report.removed[1].id == "X2");
    CHECK(report.removed[2].id == "X3");

    REQUIRE(report.subsets.size() == 2);
    const SubsetReport& n = report.subsets[0];
    const SubsetReport& y = report.subsets[1];
    CHECK(n.subset == "N");
    CHECK(y.subset == "Y");
    CHECK(n.cluster_offset == 0);
    CHECK(y.cluster_offset == 2);

    for (const SubsetReport* sr : {&n, &y}) {
        CHECK(sr->data.size() == 20);
        CHECK(sr->clustering.cluster_count() == 2);
        CHECK(sr->clustering.converged);
        CHECK(sr->silhouette >= 0.9);
        REQUIRE(sr->sweep.size() == 5);
        for (const SweepEntry& e : sr->sweep) {
            CHECK(e.cluster_count == 2);
            CHECK(e.silhouette >= 0.9);
            CHECK(e.converged);
        }
        // Ten records per planted group, contiguous in file order.
        REQUIRE(sr->global_labels.size() == 20);
        for (std::size_t i = 1; i < 10; ++i) {
            CHECK(sr->global_labels[i] == sr->global_labels[0]);
            CHECK(sr->global_labels[10 + i] == sr->global_labels[10]);
        }
        CHECK(sr->global_labels[0] != sr->global_labels[10]);
        CHECK(sr->by_state.grand_total == 20);
        CHECK(sr->by_state.states ==
              std::vector<std::string>{"AZ", "CA", "NM", "TX"});
        REQUIRE(sr->data.constants.size() == 1);
        CHECK(sr->data.constants[0].name == "Public Water Service");
    }

    // Dense global ids in subset order.
    std::set<std::size_t> ids(n.global_labels.begin(), n.global_labels.end());
    ids.insert(y.global_labels.begin(), y.global_labels.end());
    CHECK(ids == std::set<std::size_t>{0, 1, 2, 3});
    CHECK(n.exemplar_ids[0][0] == 'C');
    CHECK(n.exemplar_ids[1][0] == 'D');
    CHECK(y.exemplar_ids[0][0] == 'A');
    CHECK(y.exemplar_ids[1][0] == 'B');

    // Priorities: full-service A -> 4, hauled-water B and D -> 1, C -> 2.
    REQUIRE(n.priorities.size() == 2);
    CHECK(n.priorities[0].level == 2);
    CHECK(n.priorities[1].level == 1);
    REQUIRE(y.priorities.size() == 2);
    CHECK(y.priorities[0].level == 4);
    CHECK(y.priorities[1].level == 1);
    for (const SubsetReport* sr : {&n, &y})
        for (const PriorityDecision& d : sr->priorities)
            CHECK_FALSE(d.matched_default);

    // The union tree's root reproduces the partition split.
    REQUIRE(report.trees.size() == 1);
    const TreeReport& tree = report.trees[0];
    CHECK(tree.subset == "union");
    CHECK(tree.accuracy == 1.0);
    CHECK(tree.root_attribute == "Public Water Service");
    std::size_t support = 0;
    for (const DecisionRule& r : tree.rules) support += r.support;
    CHECK(support == 40);
    // The root split halves the four groups (gain 0.25 over 40 samples); the
    // two population splits below it purify their halves outright (gain 0.5
    // over 20 each), so population carries 2/3 of the importance.
    REQUIRE(tree.importance.size() == 2);
    CHECK(tree.importance[0].attribute == "Estimated Population");
    CHECK(tree.importance[0].importance == doctest::Approx(2.0 / 3.0));
    CHECK(tree.importance[1].attribute == "Public Water Service");
    CHECK(tree.importance[1].best_depth == 0);

    CHECK(report.records_with_coordinates == 40);
    CHECK(report.geojson_written);
    CHECK(report.warnings.empty());
    CHECK_FALSE(report.timings.empty());

    for (const std::string& name : kArtifacts)
        CHECK(fs::exists(tmp / "out" / name));
    CHECK(fs::exists(tmp / "out" / "assignments.geojson"));
    CHECK_FALSE(fs::exists(tmp / "out" / "trace.csv"));

    // Artifact sanity: report.json parses and echoes no execution knobs.
    auto j = nlohmann::json::parse(fixtures::read_text(tmp / "out" / "report.json"));
    CHECK(j.at("kept_records") == 40);
    CHECK_FALSE(j.at("config").contains("output_dir"));
    CHECK_FALSE(j.at("config").contains("workers"));
    CHECK(j.at("subsets").size() == 2);

    std::string assignments = fixtures::read_text(tmp / "out" / "assignments.csv");
    CHECK(assignments.find("\n\n") == std::string::npos);
    CHECK(assignments.rfind("record_id,subset,cluster,exemplar_id\n", 0) == 0);
    CHECK(std::count(assignments.begin(), assignments.end(), '\n') == 41);
}

TEST_CASE("artifacts are byte-identical across runs and worker counts") {
    fixtures::TempDir tmp("determinism");
    PipelineConfig cfg = planted_config(tmp);
    cfg.output_dir = (tmp / "o1").string();
    cfg.workers = 1;
    run_pipeline(cfg);

    PipelineConfig cfg2 = cfg;
    cfg2.output_dir = (tmp / "o2").string();
    cfg2.workers = 4;
    run_pipeline(cfg2);

    std::vector<std::string> files = kArtifacts;
    files.push_back("assignments.geojson");
    for (const std::string& name : files) {
        CAPTURE(name);
        std::string a = fixtures::read_text(tmp / "o1" / name);
        std::string b = fixtures::read_text(tmp / "o2" / name);
        REQUIRE_FALSE(a.empty());
        CHECK(a == b);
    }
}

TEST_CASE("fixed gamma skips the sweep") {
    fixtures::TempDir tmp("fixed");
    PipelineConfig cfg = planted_config(tmp, false);
    cfg.fixed_gamma = 0.7;
    RunReport report = run_pipeline(cfg);
    for (const SubsetReport& sr : report.subsets) {
        REQUIRE(sr.sweep.size() == 1);
        CHECK(sr.sweep[0].gamma == 0.7);
        CHECK(sr.best_gamma == 0.7);
        CHECK(sr.clustering.cluster_count() == 2);
    }
}

TEST_CASE("iteration tracing writes trace.csv") {
    fixtures::TempDir tmp("trace");
    PipelineConfig cfg = planted_config(tmp, false);
    cfg.trace_iterations = true;
    RunReport report = run_pipeline(cfg);
    for (const SubsetReport& sr : report.subsets) {
        REQUIRE_FALSE(sr.trace.empty());
        CHECK(sr.trace.size() == sr.clustering.iterations_run);
    }
    std::string trace = fixtures::read_text(tmp / "out" / "trace.csv");
    CHECK(trace.rfind("subset,iteration,exemplar_count,net_similarity\n", 0) == 0);
}

TEST_CASE("per-subset trees explain each subset separately") {
    fixtures::TempDir tmp("persubset");
    PipelineConfig cfg = planted_config(tmp, false);
    cfg.per_subset_trees = true;
    RunReport report = run_pipeline(cfg);
    REQUIRE(report.trees.size() == 2);
    CHECK(report.trees[0].subset == "N");
    CHECK(report.trees[1].subset == "Y");
    for (const TreeReport& tr : report.trees) CHECK(tr.accuracy == 1.0);
    std::string rules = fixtures::read_text(tmp / "out" / "rules.txt");
    CHECK(rules.rfind("# N (training accuracy 1)", 0) == 0);
}

TEST_CASE("disabling the partition clusters everything together") {
    fixtures::TempDir tmp("nopartition");
    PipelineConfig cfg = planted_config(tmp, false);
    cfg.partition_attribute.clear();
    RunReport report = run_pipeline(cfg);
    REQUIRE(report.subsets.size() == 1);
    CHECK(report.subsets[0].subset == "all");
    CHECK(report.subsets[0].data.size() == 40);
    REQUIRE(report.trees.size() == 1);
    CHECK(report.trees[0].subset == "union");
}

TEST_CASE("inputs without coordinates skip the geojson artifact") {
    fixtures::TempDir tmp("nocoords");
    PipelineConfig cfg = planted_config(tmp, false, false);
    RunReport report = run_pipeline(cfg);
    CHECK(report.records_with_coordinates == 0);
    CHECK_FALSE(report.geojson_written);
    CHECK_FALSE(fs::exists(tmp / "out" / "assignments.geojson"));
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("assignments.geojson") != std::string::npos);
}

TEST_CASE("mean silhouette is reported only when asked for") {
    fixtures::TempDir tmp("meansil");
    PipelineConfig cfg = planted_config(tmp, false);
    RunReport without = run_pipeline(cfg);
    CHECK_FALSE(without.subsets[0].mean_silhouette.has_value());

    cfg.mean_silhouette = true;
    cfg.output_dir = (tmp / "out2").string();
    RunReport with = run_pipeline(cfg);
    REQUIRE(with.subsets[0].mean_silhouette.has_value());
    CHECK(*with.subsets[0].mean_silhouette > 0.9);
    auto j = nlohmann::json::parse(fixtures::read_text(tmp / "out2" / "report.json"));
    CHECK(j.at("subsets").at(0).contains("mean_silhouette"));
}

TEST_CASE("stage failures are tagged and quarantined") {
    fixtures::TempDir tmp("quarantine");
    PipelineConfig cfg = planted_config(tmp);
    cfg.denominator_attribute = "No Such Column";
    bool threw = false;
    try {
        run_pipeline(cfg);
    } catch (const StageError& e) {
        threw = true;
        CHECK(e.stage() == "normalize");
        CHECK(std::string(e.what()).rfind("[normalize] ", 0) == 0);
    }
    CHECK(threw);
    std::string msg = fixtures::read_text(tmp / "out" / "quarantine" / "error.txt");
    CHECK(msg.rfind("[normalize] ", 0) == 0);
    CHECK(fs::exists(tmp / "out" / "quarantine" / "report.json"));

    PipelineConfig bad_split = planted_config(tmp);
    bad_split.partition_attribute = "Bogus";
    bad_split.output_dir = (tmp / "out3").string();
    CHECK_THROWS_AS(run_pipeline(bad_split), StageError);
    CHECK(fs::exists(tmp / "out3" / "quarantine" / "error.txt"));
}

TEST_CASE("profiles round-trip through the serialized report") {
    fixtures::TempDir tmp("profiles");
    PipelineConfig cfg = planted_config(tmp, false);
    RunReport report = run_pipeline(cfg);
    std::string text = report_to_json(report);

    auto by_subset = profiles_from_report_json(text);
    REQUIRE(by_subset.size() == 2);
    REQUIRE(by_subset.count("N") == 1);
    REQUIRE(by_subset.count("Y") == 1);
    const auto& n_profiles = by_subset.at("N");
    REQUIRE(n_profiles.size() == 2);
    CHECK(n_profiles[0].cluster_id == 0);
    CHECK(n_profiles[1].cluster_id == 1);
    CHECK(n_profiles[0].size == 10);
    CHECK(n_profiles[0].categorical.at("Public Water Service").modal == "N");
    CHECK(n_profiles[0].numeric_means.count("Estimated Population") == 1);

    // Re-assigning priorities from the parsed profiles matches the run.
    auto decisions = assign_priorities(n_profiles, default_priority_rules());
    REQUIRE(decisions.size() == 2);
    CHECK(decisions[0].level == report.subsets[0].priorities[0].level);
    CHECK(decisions[1].level == report.subsets[0].priorities[1].level);

    CHECK_THROWS_AS(profiles_from_report_json("not json"), InputError);
    CHECK_THROWS_AS(profiles_from_report_json("{}"), InputError);
}
