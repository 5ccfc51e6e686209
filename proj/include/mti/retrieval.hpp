#pragma once

#include <array>
#include <string>
#include <vector>

#include "mti/database.hpp"
#include "mti/features.hpp"

namespace mti {

struct RetrievalConfig {
    std::size_t k = 5;
    double alpha = 1.0;

    void validate() const;
};

struct EvidenceItem {
    std::string flow_id;
    std::string class_label;
    View view = View::payload;
    double distance = 0.0;
    ProtocolLevel level = ProtocolLevel::fine;
    /// Protocol tag of the group the candidate was drawn from.
    std::string protocol;
    double threshold = 0.0;
    bool kept = false;

    bool operator==(const EvidenceItem&) const = default;
};

/// Per-view ranked candidates, ascending by (distance, flow_id).
using PerViewEvidence = std::array<std::vector<EvidenceItem>, 3>;

struct EvidenceSet {
    PerViewEvidence per_view;
    /// Kept items in view order, one per (view, flow_id).
    std::vector<EvidenceItem> pool;

    const std::vector<EvidenceItem>& items(View v) const { return per_view[index_of(v)]; }
    std::size_t kept_count(View v) const;

    bool operator==(const EvidenceSet&) const = default;
};

/// Protocol-filtered exact top-k per view. Views missing from the query or from
/// every database entry map to empty lists. Items come back unpruned (kept = false).
PerViewEvidence coverage_enhanced_retrieval(const TrafficDatabase& db, const NormalizedViews& query,
                                            std::string_view proto_fine, const RetrievalConfig& cfg);

/// Applies tau = mean + alpha * std of each item's (class, protocol, view) group at
/// the level it was retrieved under; keeps items with distance <= tau.
/// Throws ConsistencyError if a group has no cached stats.
EvidenceSet adaptive_prune(PerViewEvidence items, const TrafficDatabase& db, const RetrievalConfig& cfg);

/// Marks every item kept with an infinite threshold (pruning disabled).
EvidenceSet keep_all(PerViewEvidence items);

EvidenceSet retrieve(const TrafficDatabase& db, const NormalizedViews& query, std::string_view proto_fine,
                     const RetrievalConfig& cfg);

/// Canonical JSON text of an evidence set; identical inputs give identical bytes.
std::string serialize_evidence(const EvidenceSet& ev);

} // namespace mti
