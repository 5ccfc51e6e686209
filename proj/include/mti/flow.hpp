#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mti {

enum class StrongField : std::uint8_t { ip_address, port, tcp_seq, tls_sni };

std::string_view to_string(StrongField f);
/// Accepts "ip", "port", "tcp_seq", "tls_sni". Throws ValidationError otherwise.
StrongField strong_field_from_string(std::string_view s);

/// Half-open byte range [start, end) of the payload holding an identifier-like field.
struct StrongSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    StrongField kind = StrongField::port;

    bool operator==(const StrongSpan&) const = default;
};

struct FlowRecord {
    std::string flow_id;
    std::optional<std::string> label;
    std::string proto_fine;
    std::vector<std::uint8_t> payload;
    std::vector<std::int64_t> pkt_lengths;
    std::vector<double> iat_seconds;
    std::vector<StrongSpan> strong_spans;

    /// First pipe-delimited component of proto_fine.
    std::string proto_coarse() const;

    bool operator==(const FlowRecord&) const = default;
};

std::string coarse_protocol(std::string_view proto_fine);

struct RandomizationPolicy {
    std::uint64_t seed = 0;
    bool ip_addresses = false;
    bool ports = false;
    bool tcp_seq = false;
    bool tls_sni = false;

    static RandomizationPolicy all(std::uint64_t seed) { return {seed, true, true, true, true}; }
    static RandomizationPolicy none() { return {}; }

    bool covers(StrongField f) const;
    bool empty() const { return !ip_addresses && !ports && !tcp_seq && !tls_sni; }
};

/// Throws ValidationError naming the offending field.
void validate(const FlowRecord& flow);

/// Replaces payload bytes covered by flagged strong spans with bytes drawn from a
/// stream keyed by (seed, flow_id, span start). Spans past the payload end are clipped.
FlowRecord randomize_strong_features(const FlowRecord& flow, const RandomizationPolicy& policy);

/// Parses one record line. `line_no` is only used for error reporting.
FlowRecord parse_record(std::string_view line, std::size_t line_no = 1);
std::string serialize_record(const FlowRecord& flow);

std::vector<FlowRecord> parse_dataset(std::string_view text, const RandomizationPolicy& policy);
std::vector<FlowRecord> load_dataset(const std::filesystem::path& path, const RandomizationPolicy& policy);
void save_dataset(const std::filesystem::path& path, const std::vector<FlowRecord>& flows);

} // namespace mti
