#include "mti/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mti/error.hpp"

namespace mti {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
        n = std::stoull(v, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used != v.size() || v.starts_with('-')) throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(n);
}

double to_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used != v.size()) throw ValidationError(key + ": expected a number, got '" + v + "'");
    return d;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError(key + ": expected true/false, got '" + v + "'");
}

} // namespace

EngineConfig parse_engine_config(std::string_view text, EngineConfig cfg) {
    std::size_t line_no = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "config line lacks '='");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        try {
            if (key == "L_pay") cfg.norm.l_pay = to_size(key, value), cfg.norm_from_file = true;
            else if (key == "L_len") cfg.norm.l_len = to_size(key, value), cfg.norm_from_file = true;
            else if (key == "L_time") cfg.norm.l_time = to_size(key, value), cfg.norm_from_file = true;
            else if (key == "W_seg") cfg.norm.w_seg = to_size(key, value), cfg.norm_from_file = true;
            else if (key == "k") cfg.retrieval.k = to_size(key, value);
            else if (key == "alpha") cfg.retrieval.alpha = to_real(key, value);
            else if (key == "backend") {
                if (value == "mock") cfg.backend.kind = BackendKind::mock_majority;
                else if (value == "remote") cfg.backend.kind = BackendKind::remote_chat;
                else throw ValidationError("backend: expected mock or remote");
            }
            else if (key == "endpoint_url") cfg.backend.endpoint_url = value;
            else if (key == "model") cfg.backend.model_name = value;
            else if (key == "timeout") cfg.backend.timeout_seconds = to_real(key, value);
            else if (key == "max_retries") cfg.backend.max_retries = static_cast<int>(to_size(key, value));
            else if (key == "temperature") cfg.backend.temperature = to_real(key, value);
            else if (key == "template") cfg.template_path = value;
            else if (key == "reasoning") cfg.reasoning = to_bool(key, value);
            else throw ValidationError("unknown config key '" + key + "'");
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    cfg.norm.validate();
    cfg.retrieval.validate();
    return cfg;
}

EngineConfig load_engine_config(const std::filesystem::path& path, EngineConfig base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_engine_config(buf.str(), std::move(base));
}

std::optional<std::string> adopt_snapshot_norm(EngineConfig& cfg, const TrafficDatabase& db) {
    std::optional<std::string> warning;
    const auto& snap = db.norm_config();
    if (cfg.norm_from_file && !(cfg.norm == snap))
        warning = fmt::format("config normalization (L_pay={}, L_len={}, L_time={}, W_seg={}) differs from the "
                              "snapshot's (L_pay={}, L_len={}, L_time={}, W_seg={}); using the snapshot's",
                              cfg.norm.l_pay, cfg.norm.l_len, cfg.norm.l_time, cfg.norm.w_seg, snap.l_pay, snap.l_len,
                              snap.l_time, snap.w_seg);
    cfg.norm = snap;
    return warning;
}

} // namespace mti
