#include "mti/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <map>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "hash.hpp"
#include "mti/error.hpp"

namespace mti {

using nlohmann::json;

std::string digest(std::string_view data) { return detail::hex_digest(data); }

void BackendConfig::validate() const {
    if (!(timeout_seconds > 0.0)) throw ValidationError("backend timeout must be > 0");
    if (max_retries < 0) throw ValidationError("backend max_retries must be >= 0");
    if (!(temperature >= 0.0)) throw ValidationError("backend temperature must be >= 0");
    if (max_in_flight == 0) throw ValidationError("backend in-flight cap must be >= 1");
    if (kind == BackendKind::remote_chat) {
        if (endpoint_url.empty()) throw ValidationError("remote backend needs an endpoint URL (MALRAG_LLM_URL)");
        if (model_name.empty()) throw ValidationError("remote backend needs a model name (MALRAG_LLM_MODEL)");
    }
}

BackendConfig BackendConfig::remote_from_env() {
    BackendConfig cfg;
    cfg.kind = BackendKind::remote_chat;
    if (const char* v = std::getenv("MALRAG_LLM_URL")) cfg.endpoint_url = v;
    if (const char* v = std::getenv("MALRAG_LLM_MODEL")) cfg.model_name = v;
    if (const char* v = std::getenv("MALRAG_LLM_KEY")) cfg.api_key = v;
    return cfg;
}

std::string decide_mock(const EvidenceSet& ev) {
    if (ev.pool.empty()) return std::string(kNovelLabel);
    struct Tally {
        std::size_t count = 0;
        double best = 0.0;
    };
    std::map<std::string, Tally> tally;
    for (const auto& item : ev.pool) {
        auto [it, fresh] = tally.try_emplace(item.class_label, Tally{0, item.distance});
        it->second.count += 1;
        it->second.best = std::min(it->second.best, item.distance);
    }
    // std::map iterates labels in lexicographic order, so strict comparisons keep the first.
    auto winner = tally.begin();
    for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
        const auto& [c, d] = it->second;
        if (c > winner->second.count || (c == winner->second.count && d < winner->second.best)) winner = it;
    }
    return winner->first;
}

std::string MockBackend::generate(const RenderedPrompt& prompt, const EvidenceSet& ev) {
    const std::string label = decide_mock(ev);
    if (!prompt.reasoning) return "ANSWER: " + label + "\n";
    std::string why;
    if (ev.pool.empty()) {
        why = "No retrieved sample survived pruning in any view, so the flow matches no known class.";
    } else {
        const auto votes = std::count_if(ev.pool.begin(), ev.pool.end(),
                                         [&](const auto& e) { return e.class_label == label; });
        why = fmt::format("{} of {} retained evidence items carry the label {}.", votes, ev.pool.size(), label);
    }
    return why + "\nANSWER: " + label + "\n";
}

RemoteChatBackend::RemoteChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(cfg_.endpoint_url, m, url))
        throw ValidationError("malformed backend URL '" + cfg_.endpoint_url + "'");
    base_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
    if (base_.starts_with("https://"))
        throw ValidationError("https endpoints are not supported by this build; use a plain http endpoint");
}

std::string RemoteChatBackend::identity() const { return "remote_chat:" + cfg_.model_name + "@" + base_ + path_; }

std::string RemoteChatBackend::post_once(const std::string& body, int& status, bool& transient, bool& timed_out) {
    httplib::Client cli(base_);
    const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
    const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    const auto started = std::chrono::steady_clock::now();
    auto res = cli.Post(path_, headers, body, "application/json");
    status = 0;
    transient = true;
    timed_out = false;
    if (!res) {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                    (res.error() == httplib::Error::Read && elapsed >= cfg_.timeout_seconds * 0.9);
        return httplib::to_string(res.error());
    }
    status = res->status;
    transient = status >= 500 || status == 429;
    return res->body;
}

std::string RemoteChatBackend::generate(const RenderedPrompt& prompt, const EvidenceSet&) {
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < cfg_.max_in_flight; });
        ++in_flight_;
    }
    struct Release {
        RemoteChatBackend& self;
        ~Release() {
            {
                std::lock_guard lock(self.mu_);
                --self.in_flight_;
            }
            self.cv_.notify_one();
        }
    } release{*this};

    const json request{{"model", cfg_.model_name},
                       {"temperature", cfg_.temperature},
                       {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})}};
    const std::string body = request.dump();

    int status = 0;
    bool transient = true;
    bool timed_out = false;
    std::string last;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0 && cfg_.retry_backoff_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry_backoff_ms * attempt));
        last = post_once(body, status, transient, timed_out);
        if (status >= 200 && status < 300) {
            const json reply = json::parse(last, nullptr, false);
            if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
                reply["choices"].empty())
                throw BackendError("malformed chat-completion response: " + last.substr(0, 200), status);
            const auto& choice = reply["choices"][0];
            if (choice.contains("message") && choice["message"].contains("content") &&
                choice["message"]["content"].is_string())
                return choice["message"]["content"].get<std::string>();
            if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
            throw BackendError("chat-completion response has no message content", status);
        }
        if (!transient) break;
    }
    const int attempts = cfg_.max_retries + 1;
    if (timed_out) throw TimeoutError(fmt::format("backend timed out after {} attempt(s): {}", attempts, last));
    if (status != 0)
        throw BackendError(fmt::format("backend returned HTTP {}: {}", status, last.substr(0, 200)), status);
    throw BackendError(fmt::format("backend unreachable after {} attempt(s): {}", attempts, last));
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    cfg.validate();
    if (cfg.kind == BackendKind::mock_majority) return std::make_unique<MockBackend>();
    return std::make_unique<RemoteChatBackend>(cfg);
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::optional<std::string> joined_reasoning(const std::vector<std::string>& lines, std::size_t upto) {
    std::string text;
    for (std::size_t i = 0; i < upto; ++i) text += lines[i] + "\n";
    text = trim(text);
    if (text.empty()) return std::nullopt;
    return text;
}

} // namespace

Verdict parse_verdict(std::string_view raw, const std::vector<std::string>& label_space, bool reasoning) {
    if (label_space.empty() || std::find(label_space.begin(), label_space.end(), kNovelLabel) == label_space.end())
        throw ValidationError("label space must be non-empty and contain 'novel'");

    std::vector<std::string> lines;
    for (std::size_t pos = 0; pos <= raw.size();) {
        std::size_t nl = raw.find('\n', pos);
        if (nl == std::string_view::npos) nl = raw.size();
        std::string line(raw.substr(pos, nl - pos));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        pos = nl + 1;
    }

    Verdict v;
    v.provenance.raw_response = std::string(raw);

    static const std::regex answer(R"(^\s*ANSWER\s*:\s*(.*?)\s*$)", std::regex::icase);
    for (std::size_t i = lines.size(); i-- > 0;) {
        std::smatch m;
        if (!std::regex_match(lines[i], m, answer)) continue;
        const std::string value = m[1].str();
        if (std::find(label_space.begin(), label_space.end(), value) != label_space.end()) {
            v.label = value;
            if (reasoning) v.reasoning = joined_reasoning(lines, i);
            return v;
        }
        break;
    }

    // Recovery: unique case-insensitive label mention among the last three non-empty lines.
    std::vector<std::size_t> tail;
    for (std::size_t i = lines.size(); i-- > 0 && tail.size() < 3;)
        if (!trim(lines[i]).empty()) tail.push_back(i);

    struct Hit {
        std::size_t line, begin, end;
        std::string label;
    };
    std::vector<Hit> hits;
    for (std::size_t li : tail) {
        const std::string hay = lower(lines[li]);
        for (const auto& label : label_space) {
            const std::string needle = lower(label);
            if (needle.empty()) continue;
            for (std::size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) {
                const std::size_t q = p + needle.size();
                const bool left_ok = p == 0 || !is_word_char(hay[p - 1]);
                const bool right_ok = q == hay.size() || !is_word_char(hay[q]);
                if (left_ok && right_ok) hits.push_back({li, p, q, label});
            }
        }
    }
    // A mention nested inside a longer label's mention (e.g. "NSIS" within "NSIS.ay") does not count.
    std::vector<std::string> found;
    std::size_t found_line = lines.size();
    for (const auto& h : hits) {
        const bool nested = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) {
            return o.line == h.line && o.begin <= h.begin && h.end <= o.end && (o.end - o.begin) > (h.end - h.begin);
        });
        if (nested) continue;
        if (std::find(found.begin(), found.end(), h.label) == found.end()) found.push_back(h.label);
        found_line = std::min(found_line, h.line);
    }
    if (found.size() != 1) {
        const std::string why = found.empty() ? "no label from the answer space found in the response"
                                              : "ambiguous response mentions several labels";
        throw VerdictParseError(why, std::string(raw));
    }
    v.label = found.front();
    if (reasoning) v.reasoning = joined_reasoning(lines, found_line);
    return v;
}

} // namespace mti
