#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mti/prompt.hpp"
#include "mti/retrieval.hpp"

namespace mti {

enum class BackendKind { remote_chat, mock_majority };

struct BackendConfig {
    BackendKind kind = BackendKind::mock_majority;
    std::string endpoint_url;  ///< e.g. http://127.0.0.1:8000/v1/chat/completions
    std::string model_name;
    std::string api_key;       ///< optional bearer credential
    double timeout_seconds = 60.0;
    int max_retries = 2;
    double temperature = 0.0;
    int retry_backoff_ms = 250;
    std::size_t max_in_flight = 4;

    /// remote_chat requires endpoint_url and model_name; throws ValidationError.
    void validate() const;

    /// Remote config from MALRAG_LLM_URL / MALRAG_LLM_MODEL / MALRAG_LLM_KEY.
    static BackendConfig remote_from_env();
};

struct Provenance {
    std::string prompt_digest;
    std::string evidence_digest;
    std::string backend_identity;
    std::string raw_response;
};

struct Verdict {
    std::string label;
    std::optional<std::string> reasoning;
    Provenance provenance;
};

/// Hex digest used for provenance records.
std::string digest(std::string_view data);

/// Label with the most kept items in the pool; ties go to the smaller best distance,
/// then to the lexicographically smaller label. Empty pool gives "novel".
std::string decide_mock(const EvidenceSet& ev);

class Backend {
public:
    virtual ~Backend() = default;
    /// Raw completion text for the prompt. The evidence is available to offline backends.
    virtual std::string generate(const RenderedPrompt& prompt, const EvidenceSet& ev) = 0;
    virtual std::string identity() const = 0;
};

class MockBackend final : public Backend {
public:
    std::string generate(const RenderedPrompt& prompt, const EvidenceSet& ev) override;
    std::string identity() const override { return "mock_majority"; }
};

/// Chat-completion client over plain HTTP: role-tagged messages in, choices out.
class RemoteChatBackend final : public Backend {
public:
    explicit RemoteChatBackend(BackendConfig cfg);

    std::string generate(const RenderedPrompt& prompt, const EvidenceSet& ev) override;
    std::string identity() const override;

private:
    std::string post_once(const std::string& body, int& status, bool& transient, bool& timed_out);

    BackendConfig cfg_;
    std::string base_;
    std::string path_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

/// Extracts the label from a response ending in `ANSWER: <label>`. Falls back to a
/// unique case-insensitive label mention in the last three lines. Throws
/// VerdictParseError when no unique label is found.
Verdict parse_verdict(std::string_view raw, const std::vector<std::string>& label_space, bool reasoning);

} // namespace mti
