#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "hash.hpp"
#include "mti/error.hpp"
#include "mti/eval.hpp"

namespace mti {

void SplitSpec::validate() const {
    if (!(db_fraction > 0.0 && db_fraction < 1.0)) throw ValidationError("db_fraction must lie in (0, 1)");
    if (seeds.empty()) throw ValidationError("at least one split seed is required");
}

Split stratified_split(const std::vector<FlowRecord>& flows, const SplitSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        if (!flows[i].label) throw ValidationError("flow '" + flows[i].flow_id + "' has no label; cannot stratify");
        groups[{*flows[i].label, flows[i].proto_coarse()}].push_back(i);
    }

    Split split;
    std::vector<bool> to_db(flows.size(), false);
    for (auto& [key, members] : groups) {
        const std::size_t n = members.size();
        if (n == 1) {
            split.warnings.push_back(fmt::format("group ({}, {}) has a single flow; assigned to the database side",
                                                 key.first, key.second));
            to_db[members.front()] = true;
            continue;
        }
        const std::uint64_t group_seed = detail::fnv1a64(key.second, detail::fnv1a64(key.first, seed ^ 0x5bd1e995ULL));
        std::mt19937_64 rng(group_seed);
        std::shuffle(members.begin(), members.end(), rng);
        auto take = static_cast<std::size_t>(std::llround(spec.db_fraction * static_cast<double>(n)));
        take = std::clamp<std::size_t>(take, 1, n - 1);
        for (std::size_t i = 0; i < take; ++i) to_db[members[i]] = true;
    }
    for (std::size_t i = 0; i < flows.size(); ++i) (to_db[i] ? split.db_part : split.test_part).push_back(flows[i]);
    return split;
}

ExperimentReport run_experiment(const std::vector<FlowRecord>& dataset, const ExperimentConfig& cfg) {
    cfg.split.validate();
    cfg.norm.validate();
    cfg.classify.retrieval.validate();
    if (cfg.mode == EvalMode::openset && cfg.novel_labels.empty())
        throw ValidationError("open-set evaluation needs at least one held-out novel class");

    std::vector<FlowRecord> known, novel;
    for (const auto& f : dataset) {
        if (!f.label) throw ValidationError("evaluation flows must be labeled; '" + f.flow_id + "' is not");
        (cfg.novel_labels.contains(*f.label) ? novel : known).push_back(f);
    }
    if (known.empty()) throw ValidationError("dataset has no known-class flows");

    auto backend = make_backend(cfg.backend);
    ClassifyOptions options = cfg.classify;
    options.ablation = cfg.ablation;

    ExperimentReport report;
    report.mode = cfg.mode;
    report.ablation = cfg.ablation;
    std::vector<MetricsReport> per_seed;
    for (std::uint64_t seed : cfg.split.seeds) {
        SeedRun run;
        run.seed = seed;
        Split split = stratified_split(known, cfg.split, seed);
        run.warnings = std::move(split.warnings);
        const TrafficDatabase db = build_database(split.db_part, cfg.norm, cfg.build);
        for (const auto& key : degenerate_groups(db))
            run.warnings.push_back(fmt::format("singleton group ({}, {} {}, {}): pruning keeps only exact matches",
                                               key.class_label, to_string(key.level), key.protocol,
                                               to_string(key.view)));

        std::vector<FlowRecord> queries = std::move(split.test_part);
        std::vector<std::string> truths;
        for (const auto& q : queries) truths.push_back(*q.label);
        if (cfg.mode == EvalMode::openset) {
            for (const auto& f : novel) {
                queries.push_back(f);
                truths.emplace_back(kNovelLabel);
            }
        }

        const Classifier classifier(db, cfg.tmpl, *backend, options);
        std::vector<ClassifyResult> results = classifier.classify_all(queries, cfg.jobs);

        // Aggregate in flow_id order regardless of completion order.
        std::vector<std::size_t> order(results.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return results[a].flow_id < results[b].flow_id; });
        std::vector<Prediction> preds;
        for (std::size_t i : order) {
            if (results[i].verdict) {
                preds.push_back({truths[i], results[i].verdict->label});
            } else if (cfg.errors_as_wrong) {
                preds.push_back({truths[i], ""});
            } else {
                ++run.excluded;
            }
        }
        if (preds.empty() && run.excluded > 0)
            throw BackendError(fmt::format("seed {}: all {} classifications failed; first error: {}", seed,
                                           run.excluded, results.front().error));
        const std::vector<std::string> label_set(db.label_set().begin(), db.label_set().end());
        run.report = cfg.mode == EvalMode::openset ? evaluate_openset(preds, label_set) : evaluate_known(preds, label_set);
        per_seed.push_back(run.report);
        if (cfg.keep_results) run.results = std::move(results);
        report.runs.push_back(std::move(run));
    }
    report.mean = mean_report(per_seed);
    return report;
}

std::vector<SweepPoint> sweep(const std::vector<FlowRecord>& dataset, const ExperimentConfig& cfg,
                              const std::vector<std::size_t>& ks, const std::vector<double>& alphas) {
    const std::vector<std::size_t> k_list = ks.empty() ? std::vector<std::size_t>{cfg.classify.retrieval.k} : ks;
    const std::vector<double> a_list = alphas.empty() ? std::vector<double>{cfg.classify.retrieval.alpha} : alphas;
    std::vector<SweepPoint> out;
    for (std::size_t k : k_list) {
        for (double a : a_list) {
            ExperimentConfig c = cfg;
            c.classify.retrieval.k = k;
            c.classify.retrieval.alpha = a;
            c.keep_results = false;
            out.push_back({k, a, run_experiment(dataset, c)});
        }
    }
    return out;
}

namespace {

void append_metrics(std::string& out, const MetricsReport& r) {
    out += fmt::format("samples: {}\n", r.samples);
    out += fmt::format("macro PRE={:.4f} RCL={:.4f} F1={:.4f}\n", r.macro_pre, r.macro_rcl, r.macro_f1);
    if (r.openset) {
        out += fmt::format("PRE-K={:.4f} RCL-K={:.4f} PRE-N={:.4f} RCL-N={:.4f}\n", r.pre_k, r.rcl_k, r.pre_n, r.rcl_n);
        out += fmt::format("NA={:.4f} (balanced: (AKS + AUS) / 2, AKS={:.4f}, AUS={:.4f})\n", r.na, r.aks, r.aus);
    }
    out += fmt::format("{:<24} {:>8} {:>8} {:>8} {:>8}\n", "class", "PRE", "RCL", "F1", "support");
    for (const auto& [label, m] : r.per_class)
        out += fmt::format("{:<24} {:>8.4f} {:>8.4f} {:>8.4f} {:>8}\n", label, m.pre, m.rcl, m.f1, m.support);
    out += "confusion (rows = truth, columns = prediction):\n";
    out += fmt::format("{:<24}", "");
    for (const auto& l : r.labels) out += fmt::format(" {:>10}", l.substr(0, 10));
    out += "\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        out += fmt::format("{:<24}", r.labels[i]);
        for (auto c : r.confusion[i]) out += fmt::format(" {:>10}", c);
        out += "\n";
    }
}

nlohmann::json metrics_json(const MetricsReport& r) {
    using nlohmann::json;
    json j{{"samples", r.samples},
           {"macro_pre", r.macro_pre},
           {"macro_rcl", r.macro_rcl},
           {"macro_f1", r.macro_f1},
           {"labels", r.labels},
           {"confusion", r.confusion}};
    if (r.openset) {
        j["pre_k"] = r.pre_k;
        j["rcl_k"] = r.rcl_k;
        j["pre_n"] = r.pre_n;
        j["rcl_n"] = r.rcl_n;
        j["aks"] = r.aks;
        j["aus"] = r.aus;
        j["na"] = r.na;
        j["na_definition"] = "(AKS + AUS) / 2";
    }
    json per = json::object();
    for (const auto& [label, m] : r.per_class)
        per[label] = {{"pre", m.pre}, {"rcl", m.rcl}, {"f1", m.f1}, {"support", m.support}};
    j["per_class"] = std::move(per);
    return j;
}

} // namespace

std::string format_report(const ExperimentReport& report) {
    std::string out = fmt::format("mode: {}\nablation: {}\nseeds: {}\n",
                                  report.mode == EvalMode::openset ? "openset" : "known", to_string(report.ablation),
                                  report.runs.size());
    for (const auto& run : report.runs) {
        out += fmt::format("\n== seed {} ==\n", run.seed);
        out += fmt::format("excluded (failed classifications): {}\n", run.excluded);
        append_metrics(out, run.report);
    }
    out += fmt::format("\n== mean over {} seeds ==\n", report.runs.size());
    append_metrics(out, report.mean);
    return out;
}

std::string format_sweep(const std::vector<SweepPoint>& points) {
    std::string out = fmt::format("{:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "k", "alpha", "PRE", "RCL", "F1",
                                  "RCL-N", "NA");
    for (const auto& p : points) {
        const auto& m = p.report.mean;
        out += fmt::format("{:>4} {:>8.3f} {:>8.4f} {:>8.4f} {:>8.4f} {:>8} {:>8}\n", p.k, p.alpha, m.macro_pre,
                           m.macro_rcl, m.macro_f1, m.openset ? fmt::format("{:.4f}", m.rcl_n) : "-",
                           m.openset ? fmt::format("{:.4f}", m.na) : "-");
    }
    return out;
}

std::string report_json(const ExperimentReport& report) {
    using nlohmann::json;
    json runs = json::array();
    for (const auto& run : report.runs) {
        json j = metrics_json(run.report);
        j["seed"] = run.seed;
        j["excluded"] = run.excluded;
        j["warnings"] = run.warnings;
        runs.push_back(std::move(j));
    }
    return json{{"mode", report.mode == EvalMode::openset ? "openset" : "known"},
                {"ablation", std::string(to_string(report.ablation))},
                {"runs", std::move(runs)},
                {"mean", metrics_json(report.mean)}}
        .dump(2);
}

} // namespace mti
