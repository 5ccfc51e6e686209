#include "mti/prompt.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "mti/error.hpp"

namespace mti {

namespace {

#include "default_template.inc"

constexpr std::array<std::string_view, 3> kViewHeadings{"Payload view", "Packet-length view", "Inter-arrival-time view"};

std::string rtrim_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

std::string join(const std::vector<std::string>& xs, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += xs[i];
    }
    return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

std::string fill_slots(std::string text, const std::vector<std::string>& label_set,
                       const std::vector<std::string>& space) {
    static const std::regex slot(R"(\{[A-Z][A-Z0-9_]*\})");
    for (std::sregex_iterator it(text.begin(), text.end(), slot), end; it != end; ++it)
        if (it->str() != "{LABEL_SET}" && it->str() != "{LABEL_SPACE}")
            throw ValidationError("prompt template has an unfilled slot " + it->str());
    replace_all(text, "{LABEL_SET}", "{" + join(label_set, ", ") + "}");
    replace_all(text, "{LABEL_SPACE}", "{" + join(space, ", ") + "}");
    return text;
}

template <typename T>
std::string format_array(const std::vector<T>& values, std::size_t cap) {
    std::string out = "[";
    const std::size_t shown = std::min(cap, values.size());
    for (std::size_t i = 0; i < shown; ++i) {
        if (i) out += ", ";
        if constexpr (std::is_same_v<T, std::uint8_t>)
            out += fmt::format("{}", static_cast<unsigned>(values[i]));
        else
            out += fmt::format("{}", values[i]);
    }
    if (shown < values.size()) out += fmt::format("{}... (+{} more)", shown ? ", " : "", values.size() - shown);
    out += "]";
    return out;
}

std::string display_vector(const NormalizedViews& v, View view, std::size_t cap) {
    switch (view) {
    case View::payload: return format_array(v.payload_vec, cap);
    case View::length: return format_array(v.len_time_vec, cap);
    case View::time: return format_array(v.iat_time_vec, cap);
    }
    return "[]";
}

} // namespace

PromptTemplate parse_template(std::string_view text) {
    PromptTemplate tmpl;
    tmpl.no_evidence_placeholder.clear();
    std::string* current = nullptr;
    std::array<bool, 8> seen{};
    auto start = [&](std::size_t slot, std::string* target, std::string_view marker) {
        if (seen[slot]) throw ValidationError("prompt template repeats marker " + std::string(marker));
        seen[slot] = true;
        current = target;
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (line.starts_with("[[") && line.ends_with("]]")) {
            const std::string_view marker = line.substr(2, line.size() - 4);
            if (marker == "TASK") start(0, &tmpl.task_instruction, line);
            else if (marker == "NOTE:payload") start(1, &tmpl.evidence_note[0], line);
            else if (marker == "NOTE:length") start(2, &tmpl.evidence_note[1], line);
            else if (marker == "NOTE:time") start(3, &tmpl.evidence_note[2], line);
            else if (marker == "NO_EVIDENCE") start(4, &tmpl.no_evidence_placeholder, line);
            else if (marker == "GUIDANCE") start(5, &tmpl.decision_guidance, line);
            else if (marker == "REASONING_ON") start(6, &tmpl.reasoning_suffix_on, line);
            else if (marker == "REASONING_OFF") start(7, &tmpl.reasoning_suffix_off, line);
            else throw ValidationError("prompt template has unknown marker " + std::string(line));
            continue;
        }
        if (!current) {
            if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
            throw ValidationError("prompt template has text before the first marker");
        }
        current->append(line);
        current->push_back('\n');
    }
    for (std::string* s : {&tmpl.task_instruction, &tmpl.evidence_note[0], &tmpl.evidence_note[1],
                           &tmpl.evidence_note[2], &tmpl.no_evidence_placeholder, &tmpl.decision_guidance,
                           &tmpl.reasoning_suffix_on, &tmpl.reasoning_suffix_off})
        *s = rtrim_newlines(std::move(*s));
    if (!seen[0] || tmpl.task_instruction.empty()) throw ValidationError("prompt template lacks a [[TASK]] section");
    if (!seen[4] || tmpl.no_evidence_placeholder.empty())
        throw ValidationError("prompt template lacks a [[NO_EVIDENCE]] section");
    if (!seen[6] || !seen[7]) throw ValidationError("prompt template lacks reasoning output sections");
    return tmpl;
}

PromptTemplate default_template() {
    static const PromptTemplate tmpl = parse_template(kDefaultTemplateText);
    return tmpl;
}

PromptTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open template: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_template(buf.str());
}

std::string format_template(const PromptTemplate& tmpl) {
    std::string out;
    auto section = [&](std::string_view marker, const std::string& body) {
        out += fmt::format("[[{}]]\n", marker);
        if (!body.empty()) out += body + "\n";
    };
    section("TASK", tmpl.task_instruction);
    for (View v : kAllViews) section(fmt::format("NOTE:{}", to_string(v)), tmpl.evidence_note[index_of(v)]);
    section("NO_EVIDENCE", tmpl.no_evidence_placeholder);
    section("GUIDANCE", tmpl.decision_guidance);
    section("REASONING_ON", tmpl.reasoning_suffix_on);
    section("REASONING_OFF", tmpl.reasoning_suffix_off);
    return out;
}

PromptTemplate ablate_template(PromptTemplate tmpl, TemplateMode mode) {
    if (mode == TemplateMode::no_guidance) {
        for (auto& note : tmpl.evidence_note) note.clear();
        tmpl.decision_guidance.clear();
    }
    return tmpl;
}

const PromptSegment* RenderedPrompt::segment(std::string_view name) const {
    for (const auto& s : segments)
        if (s.name == name) return &s;
    return nullptr;
}

std::string_view RenderedPrompt::segment_text(std::string_view name) const {
    const PromptSegment* s = segment(name);
    if (!s) return {};
    return std::string_view(text).substr(s->begin, s->end - s->begin);
}

std::vector<std::string> label_space(const TrafficDatabase& db) {
    std::vector<std::string> space(db.label_set().begin(), db.label_set().end());
    space.emplace_back(kNovelLabel);
    return space;
}

RenderedPrompt build_prompt(const QueryFlow& query, const EvidenceSet& ev, const TrafficDatabase& db,
                            const PromptTemplate& tmpl, const PromptOptions& options) {
    RenderedPrompt out;
    out.label_space = label_space(db);
    out.reasoning = options.reasoning;
    const std::vector<std::string> known(db.label_set().begin(), db.label_set().end());

    for (View v : kAllViews) {
        for (const auto& item : ev.items(v)) {
            if (!db.label_set().contains(item.class_label))
                throw ConsistencyError("evidence references label '" + item.class_label + "' absent from the database");
            if (!db.find(item.flow_id))
                throw ConsistencyError("evidence references flow '" + item.flow_id + "' absent from the database");
        }
    }

    std::string& text = out.text;
    auto open = [&](std::string name, std::string_view heading) {
        if (!out.segments.empty()) text += "\n";
        out.segments.push_back({std::move(name), text.size(), 0});
        text += fmt::format("## {}\n", heading);
    };
    auto close = [&] { out.segments.back().end = text.size(); };

    open("task_instruction", "Task Instruction");
    text += fill_slots(tmpl.task_instruction, known, out.label_space) + "\n";
    close();

    open("traffic_information", "Traffic Information");
    const auto cap = options.display_cap;
    text += fmt::format("Protocol: {}\n", query.record.proto_fine);
    text += "Payload bytes: ";
    if (query.views.has(View::payload)) text += display_vector(query.views, View::payload, cap);
    text += "\nPacket lengths: ";
    if (query.views.has(View::length)) text += display_vector(query.views, View::length, cap);
    text += "\nInter-arrival times (s): ";
    if (query.views.has(View::time)) text += display_vector(query.views, View::time, cap);
    text += "\n";
    close();

    open("retrieved_samples", "Retrieved Samples");
    for (View v : kAllViews) {
        if (!db.has_view(v)) continue;
        text += fmt::format("### {}\n", kViewHeadings[index_of(v)]);
        if (ev.kept_count(v) == 0) {
            text += fill_slots(tmpl.no_evidence_placeholder, known, out.label_space) + "\n";
            continue;
        }
        if (const auto& note = tmpl.evidence_note[index_of(v)]; !note.empty())
            text += fill_slots(note, known, out.label_space) + "\n";
        std::size_t n = 0;
        for (const auto& item : ev.items(v)) {
            if (!item.kept) continue;
            const DbEntry* e = db.find(item.flow_id);
            text += fmt::format("Sample {}: label={}, distance={:.6f}, values={}\n", ++n, item.class_label,
                                item.distance, display_vector(e->views, v, cap));
        }
    }
    close();

    if (!tmpl.decision_guidance.empty()) {
        open("decision_guidance", "Decision Guidance");
        text += fill_slots(tmpl.decision_guidance, known, out.label_space) + "\n";
        close();
    }

    open("output_format", "Output Format");
    text += fill_slots(options.reasoning ? tmpl.reasoning_suffix_on : tmpl.reasoning_suffix_off, known,
                       out.label_space) +
            "\n";
    close();
    return out;
}

} // namespace mti
