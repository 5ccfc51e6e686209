#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mti/classifier.hpp"
#include "mti/database.hpp"
#include "mti/flow.hpp"
#include "mti/llm.hpp"
#include "mti/prompt.hpp"
#include "mti/retrieval.hpp"

namespace mti {

struct SplitSpec {
    double db_fraction = 0.8;
    std::vector<std::uint64_t> seeds{11, 23, 37, 41, 53};

    void validate() const;
};

struct Split {
    std::vector<FlowRecord> db_part;
    std::vector<FlowRecord> test_part;
    std::vector<std::string> warnings;
};

/// Shuffles each (class, coarse protocol) group with a seed-derived generator and sends
/// round(db_fraction * n) of it, clamped to [1, n - 1], to the database side. Singleton
/// groups go to the database side with a warning. Output keeps input order.
Split stratified_split(const std::vector<FlowRecord>& flows, const SplitSpec& spec, std::uint64_t seed);

/// One scored sample. An empty `predicted` marks a failed classification scored as wrong.
struct Prediction {
    std::string truth;
    std::string predicted;
};

struct ClassMetrics {
    double pre = 0.0;
    double rcl = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    bool openset = false;
    std::size_t samples = 0;
    double macro_pre = 0.0;
    double macro_rcl = 0.0;
    double macro_f1 = 0.0;
    // Open-set only.
    double pre_k = 0.0;
    double rcl_k = 0.0;
    double pre_n = 0.0;
    double rcl_n = 0.0;
    double aks = 0.0;
    double aus = 0.0;
    double na = 0.0;

    std::map<std::string, ClassMetrics> per_class;
    /// Row = truth, column = prediction, both over `labels`.
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> confusion;
};

/// One-vs-rest metrics per known class, macro-averaged without weights.
MetricsReport evaluate_known(const std::vector<Prediction>& results, const std::vector<std::string>& label_set);

/// Known-class metrics plus novel-as-positive precision/recall and
/// NA = (known-sample accuracy + novel-sample accuracy) / 2.
MetricsReport evaluate_openset(const std::vector<Prediction>& results, const std::vector<std::string>& label_set);

/// Arithmetic mean of every scalar and per-class metric; confusion counts are summed.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

enum class EvalMode { known, openset };

struct ExperimentConfig {
    EvalMode mode = EvalMode::known;
    Ablation ablation = Ablation::full;
    SplitSpec split;
    NormConfig norm;
    BuildOptions build;
    ClassifyOptions classify;
    BackendConfig backend;
    PromptTemplate tmpl = default_template();
    /// Classes held out of the database and scored as "novel" in open-set mode.
    std::set<std::string> novel_labels;
    bool errors_as_wrong = false;
    std::size_t jobs = 1;
    bool keep_results = true;
};

struct SeedRun {
    std::uint64_t seed = 0;
    MetricsReport report;
    std::size_t excluded = 0;
    std::vector<std::string> warnings;
    std::vector<ClassifyResult> results;
};

struct ExperimentReport {
    EvalMode mode = EvalMode::known;
    Ablation ablation = Ablation::full;
    std::vector<SeedRun> runs;
    MetricsReport mean;
};

/// Split, build, classify and score once per seed.
ExperimentReport run_experiment(const std::vector<FlowRecord>& dataset, const ExperimentConfig& cfg);

struct SweepPoint {
    std::size_t k = 0;
    double alpha = 0.0;
    ExperimentReport report;
};

std::vector<SweepPoint> sweep(const std::vector<FlowRecord>& dataset, const ExperimentConfig& cfg,
                              const std::vector<std::size_t>& ks, const std::vector<double>& alphas);

std::string format_report(const ExperimentReport& report);
std::string format_sweep(const std::vector<SweepPoint>& points);
std::string report_json(const ExperimentReport& report);

struct SyntheticSpec {
    std::size_t known_classes = 3;
    std::size_t novel_classes = 0;
    std::size_t flows_per_class = 100;
    /// 0 makes classes statistically identical; larger values push them apart.
    double separation = 4.0;
    std::uint64_t seed = 1;
    /// Fraction of flows generated without payload bytes.
    double missing_payload_rate = 0.0;

    void validate() const;
};

struct SyntheticDataset {
    std::vector<FlowRecord> flows;
    std::vector<std::string> known_labels;
    std::vector<std::string> novel_labels;
};

SyntheticDataset generate_synthetic_openset(const SyntheticSpec& spec);

/// Parses "synthetic:known=3,novel=2,flows=100,sep=4,seed=1,missing=0.1".
SyntheticSpec parse_synthetic_spec(std::string_view text);

} // namespace mti
