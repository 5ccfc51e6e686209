#include "mti/classifier.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "mti/error.hpp"

namespace mti {

std::string_view to_string(Ablation a) {
    switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_cer: return "no-cer";
    case Ablation::no_tap: return "no-tap";
    case Ablation::no_gp: return "no-gp";
    }
    return "?";
}

Ablation ablation_from_string(std::string_view s) {
    if (s == "full") return Ablation::full;
    if (s == "no-cer" || s == "no_cer") return Ablation::no_cer;
    if (s == "no-tap" || s == "no_tap") return Ablation::no_tap;
    if (s == "no-gp" || s == "no_gp") return Ablation::no_gp;
    throw ValidationError("unknown ablation '" + std::string(s) + "'");
}

Classifier::Classifier(const TrafficDatabase& db, PromptTemplate tmpl, Backend& backend, ClassifyOptions options)
    : db_(db), tmpl_(std::move(tmpl)), backend_(backend), options_(options) {
    options_.retrieval.validate();
    if (options_.ablation == Ablation::no_gp) tmpl_ = ablate_template(std::move(tmpl_), TemplateMode::no_guidance);
}

ClassifyResult Classifier::classify(const FlowRecord& flow) const {
    ClassifyResult result;
    result.flow_id = flow.flow_id;
    result.true_label = flow.label;

    const NormalizedViews views = normalize_flow(flow, db_.norm_config());
    switch (options_.ablation) {
    case Ablation::no_cer:
        break;
    case Ablation::no_tap:
        result.evidence = keep_all(coverage_enhanced_retrieval(db_, views, flow.proto_fine, options_.retrieval));
        break;
    case Ablation::full:
    case Ablation::no_gp:
        result.evidence = retrieve(db_, views, flow.proto_fine, options_.retrieval);
        break;
    }

    const RenderedPrompt prompt = build_prompt({flow, views}, result.evidence, db_, tmpl_, options_.prompt);
    result.prompt_text = prompt.text;
    try {
        const std::string raw = backend_.generate(prompt, result.evidence);
        Verdict v = parse_verdict(raw, prompt.label_space, options_.prompt.reasoning);
        v.provenance.prompt_digest = digest(prompt.text);
        v.provenance.evidence_digest = digest(serialize_evidence(result.evidence));
        v.provenance.backend_identity = backend_.identity();
        result.verdict = std::move(v);
    } catch (const VerdictParseError& e) {
        result.failure = FailureKind::verdict_parse;
        result.error = e.what();
    } catch (const BackendError& e) {
        result.failure = FailureKind::backend;
        result.error = e.what();
    }
    return result;
}

std::vector<ClassifyResult> Classifier::classify_all(const std::vector<FlowRecord>& flows, std::size_t jobs) const {
    std::vector<ClassifyResult> results(flows.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, flows.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < flows.size(); ++i) results[i] = classify(flows[i]);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < flows.size(); i = next++) {
                    try {
                        results[i] = classify(flows[i]);
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

} // namespace mti
