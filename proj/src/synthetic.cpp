#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "mti/error.hpp"
#include "mti/eval.hpp"

namespace mti {

void SyntheticSpec::validate() const {
    if (known_classes == 0) throw ValidationError("synthetic: need at least one known class");
    if (flows_per_class == 0) throw ValidationError("synthetic: flows per class must be >= 1");
    if (!(separation >= 0.0) || !std::isfinite(separation)) throw ValidationError("synthetic: separation must be >= 0");
    if (!(missing_payload_rate >= 0.0 && missing_payload_rate <= 1.0))
        throw ValidationError("synthetic: missing payload rate must lie in [0, 1]");
}

namespace {

struct ClassProfile {
    std::vector<std::uint8_t> motif;
    double length_offset = 0.0;   // added to the shared 400-byte baseline, scaled by separation
    double length_swing = 0.0;    // amplitude of the periodic packet-size pattern
    std::size_t period = 4;
    double iat_log_shift = 0.0;   // log-scale shift of the base gap
    std::size_t burst_every = 8;
};

constexpr std::size_t kMotifBytes = 64;
constexpr std::array<std::string_view, 5> kProtocols{"TCP|TLS1.2", "TCP|TLS1.2", "TCP|HTTP", "TCP|HTTP", "UDP|DNS"};
constexpr std::array<std::size_t, 6> kPeriods{4, 8, 16, 5, 3, 6};

} // namespace

SyntheticDataset generate_synthetic_openset(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t total = spec.known_classes + spec.novel_classes;
    std::mt19937_64 rng(spec.seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto byte = [&] { return static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 255)(rng)); };

    // Evenly spaced profile slots, dealt to classes in a seed-dependent order so held-out
    // classes are not always the extremes.
    std::vector<std::size_t> slot(total);
    for (std::size_t i = 0; i < total; ++i) slot[i] = i;
    std::shuffle(slot.begin(), slot.end(), rng);

    std::vector<ClassProfile> profiles(total);
    for (std::size_t c = 0; c < total; ++c) {
        auto& p = profiles[c];
        const double pos = total == 1 ? 0.5 : static_cast<double>(slot[c]) / static_cast<double>(total - 1);
        p.motif.resize(kMotifBytes);
        for (auto& b : p.motif) b = byte();
        p.length_offset = -150.0 + 300.0 * pos + uniform(-10.0, 10.0);
        p.length_swing = uniform(40.0, 80.0);
        p.period = kPeriods[slot[c] % kPeriods.size()];
        p.iat_log_shift = -0.5 + pos + uniform(-0.05, 0.05);
        p.burst_every = 4 + slot[c] % 5;
    }

    const double sep = spec.separation;
    const double keep_motif = sep / (1.0 + sep);
    std::normal_distribution<double> len_noise(0.0, 30.0);
    std::normal_distribution<double> iat_noise(0.0, 0.2);

    SyntheticDataset out;
    for (std::size_t c = 0; c < total; ++c) {
        const std::string label = fmt::format("family_{:02}", c);
        (c < spec.known_classes ? out.known_labels : out.novel_labels).push_back(label);
        const auto& p = profiles[c];
        for (std::size_t i = 0; i < spec.flows_per_class; ++i) {
            FlowRecord f;
            f.flow_id = fmt::format("{}-{:05}", label, i);
            f.label = label;
            f.proto_fine = std::string(kProtocols[std::uniform_int_distribution<std::size_t>(0, kProtocols.size() - 1)(rng)]);

            const bool has_payload = uniform(0.0, 1.0) >= spec.missing_payload_rate;
            if (has_payload) {
                f.payload.resize(kMotifBytes);
                for (std::size_t j = 0; j < kMotifBytes; ++j) f.payload[j] = uniform(0.0, 1.0) < keep_motif ? p.motif[j] : byte();
                // Identifier-like prefix: two port bytes, four address bytes.
                f.strong_spans = {{0, 2, StrongField::port}, {2, 6, StrongField::ip_address}};
            }

            const auto packets = std::uniform_int_distribution<std::size_t>(64, 96)(rng);
            for (std::size_t k = 0; k < packets; ++k) {
                const double wave = std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(p.period));
                const double len = 400.0 + sep * (p.length_offset + p.length_swing * wave) + len_noise(rng);
                f.pkt_lengths.push_back(std::clamp<std::int64_t>(std::llround(len), 40, 1500));
            }
            const double base = 0.05 * std::exp(sep * p.iat_log_shift);
            for (std::size_t k = 0; k + 1 < packets; ++k) {
                const double burst = (k % p.burst_every == 0) ? 1.0 + sep : 1.0;
                f.iat_seconds.push_back(base * burst * std::exp(iat_noise(rng)));
            }
            out.flows.push_back(std::move(f));
        }
    }
    return out;
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
    constexpr std::string_view prefix = "synthetic:";
    if (text.starts_with(prefix)) text.remove_prefix(prefix.size());
    else if (text == "synthetic") text = {};
    SyntheticSpec spec;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const std::string_view item = text.substr(0, comma);
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw ValidationError("synthetic spec item '" + std::string(item) + "' lacks '='");
        const std::string key(item.substr(0, eq));
        const std::string value(item.substr(eq + 1));
        try {
            if (key == "known") spec.known_classes = std::stoul(value);
            else if (key == "novel") spec.novel_classes = std::stoul(value);
            else if (key == "flows") spec.flows_per_class = std::stoul(value);
            else if (key == "sep") spec.separation = std::stod(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else if (key == "missing") spec.missing_payload_rate = std::stod(value);
            else throw ValidationError("unknown synthetic spec key '" + key + "'");
        } catch (const std::logic_error&) {
            throw ValidationError("bad value for synthetic spec key '" + key + "': " + value);
        }
    }
    spec.validate();
    return spec;
}

} // namespace mti
