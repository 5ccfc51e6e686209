#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mti/database.hpp"
#include "mti/features.hpp"
#include "mti/llm.hpp"
#include "mti/retrieval.hpp"

namespace mti {

struct EngineConfig {
    NormConfig norm;
    RetrievalConfig retrieval;
    BackendConfig backend;
    std::string template_path;
    bool reasoning = false;
    /// True when the file set any of L_pay, L_len, L_time, W_seg.
    bool norm_from_file = false;
};

/// `key = value` lines; `#` starts a comment. Recognized keys: L_pay, L_len, L_time,
/// W_seg, k, alpha, backend, endpoint_url, model, timeout, max_retries, temperature,
/// template, reasoning. Unknown keys are a ValidationError.
EngineConfig parse_engine_config(std::string_view text, EngineConfig base = {});
EngineConfig load_engine_config(const std::filesystem::path& path, EngineConfig base = {});

/// Adopts the snapshot's NormConfig. Returns a warning when the configured one differed.
std::optional<std::string> adopt_snapshot_norm(EngineConfig& cfg, const TrafficDatabase& db);

} // namespace mti
