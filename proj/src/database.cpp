#include "mti/database.hpp"

#include <algorithm>
#include <cmath>

#include "mti/distance.hpp"
#include "mti/error.hpp"

namespace mti {

std::string_view to_string(ProtocolLevel level) { return level == ProtocolLevel::fine ? "fine" : "coarse"; }

DistanceStats compute_stats(const std::vector<const NormalizedViews*>& group, View view, bool exclude_self) {
    const std::size_t n = group.size();
    if (n == 0) throw ValidationError("compute_stats: empty group");
    if (n == 1) return {};

    // Symmetric metric: evaluate each unordered pair once, weight it twice.
    std::vector<double> upper;
    upper.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) upper.push_back(view_distance(*group[i], *group[j], view));

    const double pairs = exclude_self ? static_cast<double>(n * (n - 1)) : static_cast<double>(n * n);
    double sum = 0.0;
    for (double d : upper) sum += 2.0 * d;
    const double mean = sum / pairs;

    double sq = 0.0;
    for (double d : upper) sq += 2.0 * (d - mean) * (d - mean);
    if (!exclude_self) sq += static_cast<double>(n) * mean * mean;
    return {mean, std::sqrt(sq / pairs)};
}

const DbEntry* TrafficDatabase::find(std::string_view flow_id) const {
    auto it = by_id_.find(std::string(flow_id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const ClassProtocolStats* TrafficDatabase::find_stats(const StatsKey& key) const {
    auto it = stats_.find(key);
    return it == stats_.end() ? nullptr : &it->second;
}

bool TrafficDatabase::operator==(const TrafficDatabase& other) const {
    return entries_ == other.entries_ && stats_ == other.stats_ && label_set_ == other.label_set_ &&
           norm_ == other.norm_ && options_.stats_exclude_self == other.options_.stats_exclude_self;
}

void TrafficDatabase::index() {
    by_id_.clear();
    label_set_.clear();
    view_present_ = {};
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!by_id_.emplace(e.flow_id, i).second)
            throw ValidationError("duplicate flow_id in database: '" + e.flow_id + "'");
        label_set_.insert(e.class_label);
        for (View v : kAllViews) view_present_[index_of(v)] |= e.views.has(v);
    }
}

void TrafficDatabase::recompute_stats(const std::set<std::string>& classes) {
    std::map<StatsKey, std::vector<const NormalizedViews*>> groups;
    for (const auto& e : entries_) {
        if (!classes.contains(e.class_label)) continue;
        for (View v : kAllViews) {
            if (!e.views.has(v)) continue;
            groups[{e.class_label, ProtocolLevel::fine, e.proto_fine, v}].push_back(&e.views);
            groups[{e.class_label, ProtocolLevel::coarse, e.proto_coarse, v}].push_back(&e.views);
        }
    }
    std::erase_if(stats_, [&](const auto& kv) { return classes.contains(kv.first.class_label); });
    for (const auto& [key, members] : groups) {
        const auto s = compute_stats(members, key.view, options_.stats_exclude_self);
        stats_[key] = {s.mean, s.std, members.size()};
    }
}

namespace {

DbEntry make_entry(const FlowRecord& flow, const NormConfig& cfg) {
    if (!flow.label) throw ValidationError("flow '" + flow.flow_id + "' has no label; database flows must be labeled");
    validate(flow);
    return {flow.flow_id, *flow.label, flow.proto_fine, flow.proto_coarse(), normalize_flow(flow, cfg)};
}

} // namespace

TrafficDatabase build_database(const std::vector<FlowRecord>& flows, const NormConfig& cfg,
                               const BuildOptions& options) {
    cfg.validate();
    if (flows.empty()) throw ValidationError("cannot build a database from zero flows");
    TrafficDatabase db;
    db.norm_ = cfg;
    db.options_ = options;
    db.entries_.reserve(flows.size());
    for (const auto& f : flows) db.entries_.push_back(make_entry(f, cfg));
    db.index();
    db.recompute_stats(db.label_set_);
    return db;
}

TrafficDatabase extend_database(const TrafficDatabase& db, const std::vector<FlowRecord>& flows) {
    TrafficDatabase out = db;
    std::set<std::string> touched;
    for (const auto& f : flows) {
        out.entries_.push_back(make_entry(f, out.norm_));
        touched.insert(*f.label);
    }
    out.index();
    out.recompute_stats(touched);
    return out;
}

CandidateSet candidate_set(const TrafficDatabase& db, std::string_view proto_fine, View view) {
    CandidateSet fine{ProtocolLevel::fine, std::string(proto_fine), {}};
    for (const auto& e : db.entries())
        if (e.views.has(view) && e.proto_fine == proto_fine) fine.entries.push_back(&e);
    if (!fine.entries.empty()) return fine;

    CandidateSet coarse{ProtocolLevel::coarse, coarse_protocol(proto_fine), {}};
    for (const auto& e : db.entries())
        if (e.views.has(view) && e.proto_coarse == coarse.protocol) coarse.entries.push_back(&e);
    return coarse;
}

std::vector<StatsKey> degenerate_groups(const TrafficDatabase& db) {
    std::vector<StatsKey> out;
    for (const auto& [key, s] : db.stats())
        if (s.sample_count == 1) out.push_back(key);
    return out;
}

} // namespace mti
