#include "mti/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "mti/distance.hpp"
#include "mti/error.hpp"

namespace mti {

void RetrievalConfig::validate() const {
    if (k == 0) throw ValidationError("k must be >= 1");
    if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
}

std::size_t EvidenceSet::kept_count(View v) const {
    const auto& xs = items(v);
    return static_cast<std::size_t>(std::count_if(xs.begin(), xs.end(), [](const auto& e) { return e.kept; }));
}

namespace {

bool ranks_before(const EvidenceItem& a, const EvidenceItem& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.flow_id < b.flow_id;
}

EvidenceSet with_pool(PerViewEvidence items) {
    EvidenceSet ev;
    ev.per_view = std::move(items);
    for (const auto& view_items : ev.per_view)
        for (const auto& item : view_items)
            if (item.kept) ev.pool.push_back(item);
    return ev;
}

} // namespace

PerViewEvidence coverage_enhanced_retrieval(const TrafficDatabase& db, const NormalizedViews& query,
                                            std::string_view proto_fine, const RetrievalConfig& cfg) {
    cfg.validate();
    PerViewEvidence out;
    for (View view : kAllViews) {
        if (!query.has(view) || !db.has_view(view)) continue;
        const CandidateSet cands = candidate_set(db, proto_fine, view);
        auto& ranked = out[index_of(view)];
        ranked.reserve(cands.entries.size());
        for (const DbEntry* e : cands.entries) {
            EvidenceItem item;
            item.flow_id = e->flow_id;
            item.class_label = e->class_label;
            item.view = view;
            item.distance = view_distance(query, e->views, view);
            item.level = cands.level;
            item.protocol = cands.level == ProtocolLevel::fine ? e->proto_fine : e->proto_coarse;
            ranked.push_back(std::move(item));
        }
        const std::size_t keep = std::min(cfg.k, ranked.size());
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                          ranks_before);
        ranked.resize(keep);
    }
    return out;
}

EvidenceSet adaptive_prune(PerViewEvidence items, const TrafficDatabase& db, const RetrievalConfig& cfg) {
    cfg.validate();
    for (auto& view_items : items) {
        for (auto& item : view_items) {
            const StatsKey key{item.class_label, item.level, item.protocol, item.view};
            const ClassProtocolStats* s = db.find_stats(key);
            if (!s)
                throw ConsistencyError("no cached stats for class '" + item.class_label + "', " +
                                       std::string(to_string(item.level)) + " protocol '" + item.protocol +
                                       "', view " + std::string(to_string(item.view)));
            item.threshold = s->mean_dist + cfg.alpha * s->std_dist;
            item.kept = item.distance <= item.threshold;
        }
    }
    return with_pool(std::move(items));
}

EvidenceSet keep_all(PerViewEvidence items) {
    for (auto& view_items : items) {
        for (auto& item : view_items) {
            item.threshold = std::numeric_limits<double>::infinity();
            item.kept = true;
        }
    }
    return with_pool(std::move(items));
}

EvidenceSet retrieve(const TrafficDatabase& db, const NormalizedViews& query, std::string_view proto_fine,
                     const RetrievalConfig& cfg) {
    return adaptive_prune(coverage_enhanced_retrieval(db, query, proto_fine, cfg), db, cfg);
}

std::string serialize_evidence(const EvidenceSet& ev) {
    using nlohmann::json;
    auto item_json = [](const EvidenceItem& e) {
        return json{{"flow_id", e.flow_id},
                    {"class_label", e.class_label},
                    {"view", std::string(to_string(e.view))},
                    {"distance", e.distance},
                    {"protocol_level", std::string(to_string(e.level))},
                    {"protocol", e.protocol},
                    {"threshold", std::isfinite(e.threshold) ? json(e.threshold) : json("inf")},
                    {"kept", e.kept}};
    };
    json per_view = json::object();
    for (View v : kAllViews) {
        json arr = json::array();
        for (const auto& e : ev.items(v)) arr.push_back(item_json(e));
        per_view[std::string(to_string(v))] = std::move(arr);
    }
    json pool = json::array();
    for (const auto& e : ev.pool) pool.push_back(item_json(e));
    return json{{"per_view", std::move(per_view)}, {"pool", std::move(pool)}}.dump();
}

} // namespace mti
