#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mti/database.hpp"
#include "mti/features.hpp"
#include "mti/flow.hpp"
#include "mti/retrieval.hpp"

namespace mti {

inline constexpr std::string_view kNovelLabel = "novel";
inline constexpr std::string_view kNoEvidencePlaceholder =
    "There are no similar samples retrieved for this view; please focus on other available information.";

/// Editable prompt wording. Slots `{LABEL_SET}` and `{LABEL_SPACE}` are filled at
/// render time; any other `{UPPER_CASE}` token left in the output is an error.
struct PromptTemplate {
    std::string task_instruction;
    std::array<std::string, 3> evidence_note;
    std::string no_evidence_placeholder{kNoEvidencePlaceholder};
    std::string decision_guidance;
    std::string reasoning_suffix_on;
    std::string reasoning_suffix_off;

    bool operator==(const PromptTemplate&) const = default;
};

/// The shipped wording (identical to templates/default_prompt.txt).
PromptTemplate default_template();

/// Parses the `[[TASK]]`, `[[NOTE:<view>]]`, `[[NO_EVIDENCE]]`, `[[GUIDANCE]]`,
/// `[[REASONING_ON]]`, `[[REASONING_OFF]]` marker format.
PromptTemplate parse_template(std::string_view text);
PromptTemplate load_template(const std::filesystem::path& path);
std::string format_template(const PromptTemplate& tmpl);

enum class TemplateMode { full, no_guidance };

/// no_guidance drops the evidence notes and the decision guidance.
PromptTemplate ablate_template(PromptTemplate tmpl, TemplateMode mode);

struct PromptSegment {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct RenderedPrompt {
    std::string text;
    std::vector<PromptSegment> segments;
    std::vector<std::string> label_space;
    bool reasoning = false;

    const PromptSegment* segment(std::string_view name) const;
    std::string_view segment_text(std::string_view name) const;
};

/// The query as seen by the prompt: raw tags plus its normalized views.
struct QueryFlow {
    const FlowRecord& record;
    const NormalizedViews& views;
};

struct PromptOptions {
    bool reasoning = false;
    /// Maximum number of array elements printed per vector.
    std::size_t display_cap = 64;
};

/// LABEL_SET in database order followed by "novel".
std::vector<std::string> label_space(const TrafficDatabase& db);

/// Throws ConsistencyError if the evidence references a flow or label unknown to db.
RenderedPrompt build_prompt(const QueryFlow& query, const EvidenceSet& ev, const TrafficDatabase& db,
                            const PromptTemplate& tmpl, const PromptOptions& options = {});

} // namespace mti
