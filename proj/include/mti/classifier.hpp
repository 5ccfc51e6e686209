#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mti/database.hpp"
#include "mti/llm.hpp"
#include "mti/prompt.hpp"
#include "mti/retrieval.hpp"

namespace mti {

/// Pipeline wiring variants used for ablation runs.
enum class Ablation { full, no_cer, no_tap, no_gp };

std::string_view to_string(Ablation a);
/// Accepts "full", "no-cer"/"no_cer", "no-tap"/"no_tap", "no-gp"/"no_gp".
Ablation ablation_from_string(std::string_view s);

struct ClassifyOptions {
    RetrievalConfig retrieval;
    PromptOptions prompt;
    Ablation ablation = Ablation::full;
};

enum class FailureKind { none, verdict_parse, backend };

struct ClassifyResult {
    std::string flow_id;
    std::optional<std::string> true_label;
    std::optional<Verdict> verdict;
    FailureKind failure = FailureKind::none;
    std::string error;
    EvidenceSet evidence;
    std::string prompt_text;
};

/// Runs retrieval, prompt construction, generation and verdict parsing for query
/// flows against one immutable database.
class Classifier {
public:
    Classifier(const TrafficDatabase& db, PromptTemplate tmpl, Backend& backend, ClassifyOptions options);

    /// Backend and verdict-parse failures are recorded in the result, not thrown.
    ClassifyResult classify(const FlowRecord& flow) const;

    /// Classifies with up to `jobs` concurrent workers; output order follows input.
    std::vector<ClassifyResult> classify_all(const std::vector<FlowRecord>& flows, std::size_t jobs = 1) const;

    const TrafficDatabase& database() const { return db_; }

private:
    const TrafficDatabase& db_;
    PromptTemplate tmpl_;
    Backend& backend_;
    ClassifyOptions options_;
};

} // namespace mti
