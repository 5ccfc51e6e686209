#include "mti/flow.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hash.hpp"
#include "mti/error.hpp"

namespace mti {

using nlohmann::json;

std::string_view to_string(StrongField f) {
    switch (f) {
    case StrongField::ip_address: return "ip";
    case StrongField::port: return "port";
    case StrongField::tcp_seq: return "tcp_seq";
    case StrongField::tls_sni: return "tls_sni";
    }
    return "?";
}

StrongField strong_field_from_string(std::string_view s) {
    if (s == "ip") return StrongField::ip_address;
    if (s == "port") return StrongField::port;
    if (s == "tcp_seq") return StrongField::tcp_seq;
    if (s == "tls_sni") return StrongField::tls_sni;
    throw ValidationError("strong_spans: unknown field kind '" + std::string(s) + "'");
}

std::string coarse_protocol(std::string_view proto_fine) {
    return std::string(proto_fine.substr(0, proto_fine.find('|')));
}

std::string FlowRecord::proto_coarse() const { return coarse_protocol(proto_fine); }

bool RandomizationPolicy::covers(StrongField f) const {
    switch (f) {
    case StrongField::ip_address: return ip_addresses;
    case StrongField::port: return ports;
    case StrongField::tcp_seq: return tcp_seq;
    case StrongField::tls_sni: return tls_sni;
    }
    return false;
}

void validate(const FlowRecord& flow) {
    if (flow.flow_id.empty()) throw ValidationError("flow_id: must be non-empty");
    if (flow.label && flow.label->empty()) throw ValidationError("label: must be non-empty when present");
    if (flow.proto_fine.empty() || flow.proto_coarse().empty())
        throw ValidationError("proto_fine: must have a non-empty first component");
    for (auto len : flow.pkt_lengths)
        if (len < 0) throw ValidationError("pkt_lengths: negative packet length");
    for (double t : flow.iat_seconds)
        if (!std::isfinite(t) || t < 0.0) throw ValidationError("iat_seconds: values must be finite and >= 0");
    const std::size_t n = flow.pkt_lengths.size();
    const std::size_t expected_iat = n == 0 ? 0 : n - 1;
    if (flow.iat_seconds.size() != expected_iat)
        throw ValidationError("iat_seconds: expected " + std::to_string(expected_iat) + " values for " +
                              std::to_string(n) + " packets, got " + std::to_string(flow.iat_seconds.size()));
    for (const auto& span : flow.strong_spans)
        if (span.start > span.end) throw ValidationError("strong_spans: start exceeds end");
}

FlowRecord randomize_strong_features(const FlowRecord& flow, const RandomizationPolicy& policy) {
    FlowRecord out = flow;
    if (policy.empty()) return out;
    const std::uint64_t flow_key = detail::fnv1a64(flow.flow_id);
    for (const auto& span : flow.strong_spans) {
        if (!policy.covers(span.kind)) continue;
        const std::size_t end = std::min(span.end, out.payload.size());
        std::uint64_t state = policy.seed ^ flow_key ^ (static_cast<std::uint64_t>(span.start) * 0xd6e8feb86659fd93ULL);
        std::uint64_t word = 0;
        for (std::size_t i = span.start, used = 8; i < end; ++i, ++used) {
            if (used == 8) {
                word = detail::splitmix64(state);
                used = 0;
            }
            out.payload[i] = static_cast<std::uint8_t>(word >> (8 * used));
        }
    }
    return out;
}

namespace {

std::vector<std::uint8_t> decode_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) throw ValidationError("payload_hex: odd number of digits");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw ValidationError("payload_hex: expected lowercase hex digits");
    };
    std::vector<std::uint8_t> bytes(hex.size() / 2);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return bytes;
}

std::string encode_hex(const std::vector<std::uint8_t>& bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        hex.push_back(digits[b >> 4]);
        hex.push_back(digits[b & 0xf]);
    }
    return hex;
}

const json& require(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(std::string(key) + ": missing");
    return *it;
}

} // namespace

FlowRecord parse_record(std::string_view line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "record must be an object");

    FlowRecord flow;
    try {
        const auto& id = require(obj, "flow_id");
        if (!id.is_string()) throw ValidationError("flow_id: expected string");
        flow.flow_id = id.get<std::string>();

        if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) throw ValidationError("label: expected string or null");
            flow.label = it->get<std::string>();
        }

        const auto& proto = require(obj, "proto_fine");
        if (!proto.is_string()) throw ValidationError("proto_fine: expected string");
        flow.proto_fine = proto.get<std::string>();

        const auto& hex = require(obj, "payload_hex");
        if (!hex.is_string()) throw ValidationError("payload_hex: expected string");
        flow.payload = decode_hex(hex.get<std::string>());

        const auto& lens = require(obj, "pkt_lengths");
        if (!lens.is_array()) throw ValidationError("pkt_lengths: expected array");
        for (const auto& v : lens) {
            if (!v.is_number_integer()) throw ValidationError("pkt_lengths: expected integers");
            flow.pkt_lengths.push_back(v.get<std::int64_t>());
        }

        const auto& iats = require(obj, "iat_seconds");
        if (!iats.is_array()) throw ValidationError("iat_seconds: expected array");
        for (const auto& v : iats) {
            if (!v.is_number()) throw ValidationError("iat_seconds: expected numbers");
            flow.iat_seconds.push_back(v.get<double>());
        }

        if (auto it = obj.find("strong_spans"); it != obj.end() && !it->is_null()) {
            if (!it->is_array()) throw ValidationError("strong_spans: expected array");
            for (const auto& s : *it) {
                if (!s.is_array() || s.size() != 3 || !s[0].is_number_unsigned() || !s[1].is_number_unsigned() ||
                    !s[2].is_string())
                    throw ValidationError("strong_spans: expected [start, end, kind] triples");
                flow.strong_spans.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>(),
                                             strong_field_from_string(s[2].get<std::string>())});
            }
        }
        validate(flow);
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    return flow;
}

std::string serialize_record(const FlowRecord& flow) {
    json obj = json::object();
    obj["flow_id"] = flow.flow_id;
    obj["label"] = flow.label ? json(*flow.label) : json(nullptr);
    obj["proto_fine"] = flow.proto_fine;
    obj["payload_hex"] = encode_hex(flow.payload);
    obj["pkt_lengths"] = flow.pkt_lengths;
    obj["iat_seconds"] = flow.iat_seconds;
    if (!flow.strong_spans.empty()) {
        json spans = json::array();
        for (const auto& s : flow.strong_spans) spans.push_back({s.start, s.end, std::string(to_string(s.kind))});
        obj["strong_spans"] = std::move(spans);
    }
    return obj.dump();
}

std::vector<FlowRecord> parse_dataset(std::string_view text, const RandomizationPolicy& policy) {
    std::vector<FlowRecord> flows;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        FlowRecord flow = parse_record(line, line_no);
        if (!seen.insert(flow.flow_id).second)
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate flow_id '" + flow.flow_id + "'");
        flows.push_back(randomize_strong_features(flow, policy));
    }
    return flows;
}

std::vector<FlowRecord> load_dataset(const std::filesystem::path& path, const RandomizationPolicy& policy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), policy);
}

void save_dataset(const std::filesystem::path& path, const std::vector<FlowRecord>& flows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write dataset: " + path.string());
    for (const auto& f : flows) out << serialize_record(f) << '\n';
    if (!out) throw ValidationError("write failed: " + path.string());
}

} // namespace mti
