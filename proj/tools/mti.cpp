// Command-line entry point: build-db | db-stats | query | classify | eval.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mti/classifier.hpp"
#include "mti/config.hpp"
#include "mti/database.hpp"
#include "mti/error.hpp"
#include "mti/eval.hpp"
#include "mti/flow.hpp"
#include "mti/llm.hpp"
#include "mti/prompt.hpp"
#include "mti/retrieval.hpp"

#ifndef MTI_BUILD_ID
#define MTI_BUILD_ID "mti (unversioned)"
#endif

namespace {

using namespace mti;
using nlohmann::json;

enum ExitCode { kOk = 0, kValidation = 1, kBackend = 2, kInternal = 3 };

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> randomize_seed;
    bool no_randomize = false;
    std::optional<std::size_t> k;
    std::optional<double> alpha;
};

void add_config_flag(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "Engine configuration file (key = value)");
}

void add_randomize_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--randomize-seed", f.randomize_seed, "Seed for strong-feature randomization (default 0)");
    cmd->add_flag("--no-randomize", f.no_randomize, "Leave strong-feature bytes untouched");
}

void add_retrieval_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--k", f.k, "Per-view neighbour cap");
    cmd->add_option("--alpha", f.alpha, "Pruning tolerance");
}

RandomizationPolicy policy_of(const CommonFlags& f) {
    if (f.no_randomize) return RandomizationPolicy::none();
    return RandomizationPolicy::all(f.randomize_seed.value_or(0));
}

EngineConfig engine_config(const CommonFlags& f, bool remote_env) {
    EngineConfig base;
    if (remote_env) {
        // Endpoint settings come from the environment; the backend kind stays mock unless chosen.
        base.backend = BackendConfig::remote_from_env();
        base.backend.kind = BackendKind::mock_majority;
    }
    EngineConfig cfg = f.config_path.empty() ? base : load_engine_config(f.config_path, base);
    if (f.k) cfg.retrieval.k = *f.k;
    if (f.alpha) cfg.retrieval.alpha = *f.alpha;
    cfg.retrieval.validate();
    return cfg;
}

std::vector<FlowRecord> read_flow_argument(const std::string& arg, const RandomizationPolicy& policy) {
    if (arg.find_first_not_of(" \t") != std::string::npos && arg[arg.find_first_not_of(" \t")] == '{')
        return parse_dataset(arg, policy);
    return load_dataset(arg, policy);
}

PromptTemplate template_of(const std::string& flag_path, const EngineConfig& cfg) {
    const std::string& path = flag_path.empty() ? cfg.template_path : flag_path;
    return path.empty() ? default_template() : load_template(path);
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

// ---------------------------------------------------------------- build-db

struct BuildDbArgs {
    CommonFlags common;
    std::string input;
    std::string out;
    bool exclude_self = false;
};

int cmd_build_db(const BuildDbArgs& a) {
    const EngineConfig cfg = engine_config(a.common, false);
    const auto flows = load_dataset(a.input, policy_of(a.common));
    const TrafficDatabase db = build_database(flows, cfg.norm, {a.exclude_self});
    for (const auto& key : degenerate_groups(db))
        warn(fmt::format("singleton group (class {}, {} protocol {}, view {}): threshold is 0", key.class_label,
                         to_string(key.level), key.protocol, to_string(key.view)));
    save_snapshot(db, a.out);
    std::cerr << fmt::format("built database: {} entries, {} classes, {} stats groups -> {}\n", db.entries().size(),
                             db.label_set().size(), db.stats().size(), a.out);
    return kOk;
}

// ---------------------------------------------------------------- db-stats

int cmd_db_stats(const std::string& path) {
    const TrafficDatabase db = load_snapshot(path);
    const auto& n = db.norm_config();
    std::cout << fmt::format("entries: {}\n", db.entries().size());
    std::cout << fmt::format("norm: L_pay={} L_len={} L_time={} W_seg={} (K_f={})\n", n.l_pay, n.l_len, n.l_time,
                             n.w_seg, n.k_f());
    std::cout << fmt::format("pairs: {}\n", db.options().stats_exclude_self ? "exclude self" : "include self");
    std::string labels;
    for (const auto& l : db.label_set()) labels += (labels.empty() ? "" : ", ") + l;
    std::cout << "label_set: {" << labels << "}\n\n";
    std::cout << fmt::format("{:<20} {:<7} {:<16} {:<8} {:>6} {:>12} {:>12}\n", "class", "level", "protocol", "view",
                             "count", "mean", "std");
    for (const auto& [key, s] : db.stats())
        std::cout << fmt::format("{:<20} {:<7} {:<16} {:<8} {:>6} {:>12.6f} {:>12.6f}\n", key.class_label,
                                 to_string(key.level), key.protocol, to_string(key.view), s.sample_count, s.mean_dist,
                                 s.std_dist);
    return kOk;
}

// ---------------------------------------------------------------- query

struct QueryArgs {
    CommonFlags common;
    std::string db;
    std::string flow;
    bool json_out = false;
};

int cmd_query(const QueryArgs& a) {
    const TrafficDatabase db = load_snapshot(a.db);
    EngineConfig cfg = engine_config(a.common, false);
    if (auto w = adopt_snapshot_norm(cfg, db)) warn(*w);
    const auto flows = read_flow_argument(a.flow, policy_of(a.common));

    json all = json::array();
    for (const auto& flow : flows) {
        const auto views = normalize_flow(flow, db.norm_config());
        const EvidenceSet ev = retrieve(db, views, flow.proto_fine, cfg.retrieval);
        if (a.json_out) {
            json j = json::parse(serialize_evidence(ev));
            j["flow_id"] = flow.flow_id;
            all.push_back(std::move(j));
            continue;
        }
        std::cout << fmt::format("flow {} ({})\n", flow.flow_id, flow.proto_fine);
        std::cout << fmt::format("  {:<8} {:>3} {:<24} {:<16} {:<7} {:>12} {:>12} {:<5}\n", "view", "#", "flow_id",
                                 "class", "level", "distance", "threshold", "kept");
        for (View v : kAllViews) {
            const auto& items = ev.items(v);
            if (items.empty()) {
                std::cout << fmt::format("  {:<8} (no candidates)\n", to_string(v));
                continue;
            }
            std::size_t rank = 0;
            for (const auto& it : items)
                std::cout << fmt::format("  {:<8} {:>3} {:<24} {:<16} {:<7} {:>12.6f} {:>12.6f} {:<5}\n", to_string(v),
                                         ++rank, it.flow_id, it.class_label, to_string(it.level), it.distance,
                                         it.threshold, it.kept ? "yes" : "no");
        }
        std::cout << fmt::format("  pool: {} kept item(s)\n", ev.pool.size());
    }
    if (a.json_out) std::cout << all.dump(2) << "\n";
    return kOk;
}

// ---------------------------------------------------------------- classify

struct BackendFlags {
    std::optional<std::string> backend;
    std::optional<double> timeout;
    std::optional<int> max_retries;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& b) {
    cmd->add_option("--backend", b.backend, "Completion backend (default mock)")->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--timeout", b.timeout, "Remote request timeout in seconds");
    cmd->add_option("--max-retries", b.max_retries, "Remote retries on transient failure");
}

void apply_backend_flags(EngineConfig& cfg, const BackendFlags& b) {
    if (b.backend) cfg.backend.kind = *b.backend == "remote" ? BackendKind::remote_chat : BackendKind::mock_majority;
    if (b.timeout) cfg.backend.timeout_seconds = *b.timeout;
    if (b.max_retries) cfg.backend.max_retries = *b.max_retries;
}

struct ClassifyArgs {
    CommonFlags common;
    BackendFlags backend;
    std::string db;
    std::string input;
    std::string out;
    std::string template_path;
    bool reasoning = false;
    bool ablate_guidance = false;
    std::size_t jobs = 1;
};

int cmd_classify(const ClassifyArgs& a) {
    const TrafficDatabase db = load_snapshot(a.db);
    EngineConfig cfg = engine_config(a.common, true);
    apply_backend_flags(cfg, a.backend);
    if (auto w = adopt_snapshot_norm(cfg, db)) warn(*w);
    const auto flows = load_dataset(a.input, policy_of(a.common));

    auto backend = make_backend(cfg.backend);
    ClassifyOptions options;
    options.retrieval = cfg.retrieval;
    options.prompt.reasoning = a.reasoning || cfg.reasoning;
    options.ablation = a.ablate_guidance ? Ablation::no_gp : Ablation::full;
    const Classifier classifier(db, template_of(a.template_path, cfg), *backend, options);
    const auto results = classifier.classify_all(flows, a.jobs);

    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw ValidationError("cannot write results: " + a.out);
    std::size_t backend_failures = 0, parse_failures = 0;
    for (const auto& r : results) {
        json j{{"flow_id", r.flow_id},
               {"predicted", r.verdict ? json(r.verdict->label) : json(nullptr)},
               {"true_label", r.true_label ? json(*r.true_label) : json(nullptr)},
               {"reasoning_digest", r.verdict && r.verdict->reasoning ? json(digest(*r.verdict->reasoning)) : json(nullptr)},
               {"evidence_digest", digest(serialize_evidence(r.evidence))}};
        if (r.verdict) {
            j["prompt_digest"] = r.verdict->provenance.prompt_digest;
            j["backend"] = r.verdict->provenance.backend_identity;
        } else {
            j["error"] = r.error;
            (r.failure == FailureKind::backend ? backend_failures : parse_failures) += 1;
            warn(fmt::format("flow {}: {}", r.flow_id, r.error));
        }
        out << j.dump() << "\n";
    }
    if (!out) throw ValidationError("failed writing results: " + a.out);
    std::cerr << fmt::format("classified {} flow(s): {} backend failure(s), {} unparsable answer(s)\n", results.size(),
                             backend_failures, parse_failures);
    return backend_failures + parse_failures > 0 ? kBackend : kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    CommonFlags common;
    BackendFlags backend;
    std::string dataset;
    std::string mode = "known";
    std::string ablation = "full";
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> novel_classes;
    std::string report;
    std::string template_path;
    bool json_out = false;
    bool reasoning = false;
    bool errors_as_wrong = false;
    bool exclude_self = false;
    double db_fraction = 0.8;
    std::vector<std::size_t> sweep_k;
    std::vector<double> sweep_alpha;
    std::size_t jobs = 1;
};

int cmd_eval(const EvalArgs& a) {
    EngineConfig cfg = engine_config(a.common, true);
    apply_backend_flags(cfg, a.backend);

    ExperimentConfig exp;
    exp.mode = a.mode == "openset" ? EvalMode::openset : EvalMode::known;
    exp.ablation = ablation_from_string(a.ablation);
    if (!a.seeds.empty()) exp.split.seeds = a.seeds;
    exp.split.db_fraction = a.db_fraction;
    exp.norm = cfg.norm;
    exp.build.stats_exclude_self = a.exclude_self;
    exp.classify.retrieval = cfg.retrieval;
    exp.classify.prompt.reasoning = a.reasoning || cfg.reasoning;
    exp.backend = cfg.backend;
    exp.tmpl = template_of(a.template_path, cfg);
    exp.errors_as_wrong = a.errors_as_wrong;
    exp.jobs = a.jobs;
    exp.keep_results = false;
    exp.novel_labels.insert(a.novel_classes.begin(), a.novel_classes.end());

    std::vector<FlowRecord> flows;
    if (a.dataset.starts_with("synthetic")) {
        const auto data = generate_synthetic_openset(parse_synthetic_spec(a.dataset));
        flows = data.flows;
        exp.novel_labels.insert(data.novel_labels.begin(), data.novel_labels.end());
        const auto policy = policy_of(a.common);
        for (auto& f : flows) f = randomize_strong_features(f, policy);
    } else {
        flows = load_dataset(a.dataset, policy_of(a.common));
    }

    std::string text;
    if (!a.sweep_k.empty() || !a.sweep_alpha.empty()) {
        const auto points = sweep(flows, exp, a.sweep_k, a.sweep_alpha);
        if (a.json_out) {
            json arr = json::array();
            for (const auto& p : points)
                arr.push_back({{"k", p.k}, {"alpha", p.alpha}, {"report", json::parse(report_json(p.report))}});
            text = arr.dump(2) + "\n";
        } else {
            text = format_sweep(points);
        }
    } else {
        const ExperimentReport report = run_experiment(flows, exp);
        for (const auto& run : report.runs)
            for (const auto& w : run.warnings) warn(fmt::format("seed {}: {}", run.seed, w));
        text = a.json_out ? report_json(report) + "\n" : format_report(report);
    }

    if (a.report.empty() || a.report == "-") {
        std::cout << text;
    } else {
        std::ofstream out(a.report, std::ios::trunc);
        if (!out) throw ValidationError("cannot write report: " + a.report);
        out << text;
        std::cerr << "report written to " << a.report << "\n";
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-set malicious traffic identification with multi-view retrieval"};
    app.set_version_flag("--version", std::string(MTI_BUILD_ID));
    app.require_subcommand(1);

    BuildDbArgs build;
    auto* build_cmd = app.add_subcommand("build-db", "Build a traffic database snapshot from labeled flow records");
    build_cmd->add_option("--input", build.input, "Flow-record file")->required();
    build_cmd->add_option("--out", build.out, "Snapshot path to write")->required();
    build_cmd->add_flag("--stats-exclude-self", build.exclude_self,
                        "Compute intra-class statistics over distinct pairs only");
    add_config_flag(build_cmd, build.common);
    add_randomize_flags(build_cmd, build.common);

    std::string stats_db;
    auto* stats_cmd = app.add_subcommand("db-stats", "Print label set and per-group distance statistics");
    stats_cmd->add_option("--db", stats_db, "Snapshot path")->required();

    QueryArgs query;
    auto* query_cmd = app.add_subcommand("query", "Retrieve and prune evidence for flow(s)");
    query_cmd->add_option("--db", query.db, "Snapshot path")->required();
    query_cmd->add_option("--flow", query.flow, "A record line or a flow-record file")->required();
    query_cmd->add_flag("--json", query.json_out, "Structured output");
    add_config_flag(query_cmd, query.common);
    add_randomize_flags(query_cmd, query.common);
    add_retrieval_flags(query_cmd, query.common);

    ClassifyArgs classify;
    auto* classify_cmd = app.add_subcommand("classify", "Classify flow records against a snapshot");
    classify_cmd->add_option("--db", classify.db, "Snapshot path")->required();
    classify_cmd->add_option("--input", classify.input, "Flow-record file")->required();
    classify_cmd->add_option("--out", classify.out, "Results file (one record per line)")->required();
    classify_cmd->add_option("--template", classify.template_path, "Prompt template file");
    classify_cmd->add_flag("--reasoning", classify.reasoning, "Ask the backend for its reasoning");
    classify_cmd->add_flag("--ablate-guidance", classify.ablate_guidance, "Drop evidence notes and decision guidance");
    classify_cmd->add_option("--jobs", classify.jobs, "Concurrent classifications")->check(CLI::PositiveNumber);
    add_backend_flags(classify_cmd, classify.backend);
    add_config_flag(classify_cmd, classify.common);
    add_randomize_flags(classify_cmd, classify.common);
    add_retrieval_flags(classify_cmd, classify.common);

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Run the split/build/classify/score protocol over several seeds");
    eval_cmd->add_option("--dataset", eval.dataset, "Flow-record file or synthetic:<spec>")->required();
    eval_cmd->add_option("--mode", eval.mode, "Evaluation mode")->check(CLI::IsMember({"known", "openset"}));
    eval_cmd->add_option("--ablation", eval.ablation, "Pipeline variant")
        ->check(CLI::IsMember({"full", "no-cer", "no-tap", "no-gp"}));
    eval_cmd->add_option("--seeds", eval.seeds, "Split seeds")->delimiter(',');
    eval_cmd->add_option("--novel-classes", eval.novel_classes, "Classes held out as novel")->delimiter(',');
    eval_cmd->add_option("--db-fraction", eval.db_fraction, "Share of each group placed in the database");
    eval_cmd->add_option("--report", eval.report, "Report path (stdout when omitted)");
    eval_cmd->add_option("--template", eval.template_path, "Prompt template file");
    eval_cmd->add_option("--sweep-k", eval.sweep_k, "Run once per k and print a table")->delimiter(',');
    eval_cmd->add_option("--sweep-alpha", eval.sweep_alpha, "Run once per alpha and print a table")->delimiter(',');
    eval_cmd->add_option("--jobs", eval.jobs, "Concurrent classifications")->check(CLI::PositiveNumber);
    eval_cmd->add_flag("--json", eval.json_out, "Machine-readable report");
    eval_cmd->add_flag("--reasoning", eval.reasoning, "Ask the backend for its reasoning");
    eval_cmd->add_flag("--errors-as-wrong", eval.errors_as_wrong, "Score failed classifications as wrong");
    eval_cmd->add_flag("--stats-exclude-self", eval.exclude_self, "Intra-class statistics over distinct pairs only");
    add_backend_flags(eval_cmd, eval.backend);
    add_config_flag(eval_cmd, eval.common);
    add_randomize_flags(eval_cmd, eval.common);
    add_retrieval_flags(eval_cmd, eval.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kValidation;
    }

    try {
        if (*build_cmd) return cmd_build_db(build);
        if (*stats_cmd) return cmd_db_stats(stats_db);
        if (*query_cmd) return cmd_query(query);
        if (*classify_cmd) return cmd_classify(classify);
        if (*eval_cmd) return cmd_eval(eval);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kBackend;
    } catch (const ConsistencyError& e) {
        std::cerr << "internal consistency error: " << e.what() << "\n";
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kValidation;
}
