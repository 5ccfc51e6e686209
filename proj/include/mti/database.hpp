#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "mti/features.hpp"
#include "mti/flow.hpp"

namespace mti {

enum class ProtocolLevel : std::uint8_t { fine = 0, coarse = 1 };

std::string_view to_string(ProtocolLevel level);

struct DbEntry {
    std::string flow_id;
    std::string class_label;
    std::string proto_fine;
    std::string proto_coarse;
    NormalizedViews views;

    bool operator==(const DbEntry&) const = default;
};

/// Identifies one intra-class distance population. The level disambiguates a fine
/// tag without sub-protocol ("TCP") from the coarse group of the same name.
struct StatsKey {
    std::string class_label;
    ProtocolLevel level = ProtocolLevel::fine;
    std::string protocol;
    View view = View::payload;

    auto operator<=>(const StatsKey&) const = default;
    bool operator==(const StatsKey&) const = default;
};

struct ClassProtocolStats {
    double mean_dist = 0.0;
    double std_dist = 0.0;
    std::size_t sample_count = 0;

    bool operator==(const ClassProtocolStats&) const = default;
};

struct DistanceStats {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and population std of d(x_i, x_j) over all ordered pairs. With
/// `exclude_self` false the n self-pairs are included and the sum is divided by n^2;
/// otherwise the n(n-1) off-diagonal pairs are used. Throws ValidationError on an
/// empty group.
DistanceStats compute_stats(const std::vector<const NormalizedViews*>& group, View view, bool exclude_self = false);

struct BuildOptions {
    bool stats_exclude_self = false;
};

class TrafficDatabase {
public:
    const std::vector<DbEntry>& entries() const { return entries_; }
    const std::map<StatsKey, ClassProtocolStats>& stats() const { return stats_; }
    const std::set<std::string>& label_set() const { return label_set_; }
    const NormConfig& norm_config() const { return norm_; }
    const BuildOptions& options() const { return options_; }

    const DbEntry* find(std::string_view flow_id) const;
    const ClassProtocolStats* find_stats(const StatsKey& key) const;
    /// True if at least one entry carries `view`.
    bool has_view(View view) const { return view_present_[index_of(view)]; }

    bool operator==(const TrafficDatabase& other) const;

private:
    friend TrafficDatabase build_database(const std::vector<FlowRecord>&, const NormConfig&, const BuildOptions&);
    friend TrafficDatabase extend_database(const TrafficDatabase&, const std::vector<FlowRecord>&);
    friend TrafficDatabase load_snapshot(const std::filesystem::path&);
    friend struct SnapshotCodec;

    void index();
    void recompute_stats(const std::set<std::string>& classes);

    std::vector<DbEntry> entries_;
    std::map<StatsKey, ClassProtocolStats> stats_;
    std::set<std::string> label_set_;
    NormConfig norm_;
    BuildOptions options_;

    std::unordered_map<std::string, std::size_t> by_id_;
    std::array<bool, 3> view_present_{};
};

TrafficDatabase build_database(const std::vector<FlowRecord>& flows, const NormConfig& cfg,
                               const BuildOptions& options = {});

/// New database holding the old entries plus `flows`; only groups of classes that
/// receive new entries are recomputed.
TrafficDatabase extend_database(const TrafficDatabase& db, const std::vector<FlowRecord>& flows);

struct CandidateSet {
    ProtocolLevel level = ProtocolLevel::fine;
    std::string protocol;
    std::vector<const DbEntry*> entries;
};

/// Entries carrying `view` with the same fine protocol tag, else with the same coarse
/// tag, else none.
CandidateSet candidate_set(const TrafficDatabase& db, std::string_view proto_fine, View view);

/// Groups with a single sample, whose pruning threshold degenerates to zero.
std::vector<StatsKey> degenerate_groups(const TrafficDatabase& db);

inline constexpr std::uint32_t kSnapshotVersion = 1;

void save_snapshot(const TrafficDatabase& db, const std::filesystem::path& path);
/// Throws SnapshotError on bad magic, version mismatch, checksum failure or truncation.
TrafficDatabase load_snapshot(const std::filesystem::path& path);

} // namespace mti
