#pragma once
// Independent reference implementations used by the unit and acceptance tests.
// Written for clarity, not speed; they share no code with the library beyond its types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mti/database.hpp"
#include "mti/eval.hpp"
#include "mti/flow.hpp"
#include "mti/retrieval.hpp"

namespace oracle {

// Textbook DFT: X_k = sum_n x_n * exp(-2*pi*i*k*n/W), magnitudes of the first W/2 bins.
inline std::vector<double> naive_dft_amplitudes(const std::vector<double>& x) {
    const std::size_t w = x.size();
    std::vector<double> out;
    for (std::size_t k = 0; k < w / 2; ++k) {
        long double re = 0, im = 0;
        for (std::size_t n = 0; n < w; ++n) {
            const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k * n) /
                                    static_cast<long double>(w);
            re += x[n] * std::cos(ang);
            im += x[n] * std::sin(ang);
        }
        out.push_back(static_cast<double>(std::sqrt(re * re + im * im)));
    }
    return out;
}

inline double hamming_fraction(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    if (a.empty()) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++diff;
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double dist(const mti::NormalizedViews& a, const mti::NormalizedViews& b, mti::View v) {
    switch (v) {
    case mti::View::payload: return hamming_fraction(a.payload_vec, b.payload_vec);
    case mti::View::length: return euclid(a.len_freq_vec, b.len_freq_vec);
    case mti::View::time: return euclid(a.iat_freq_vec, b.iat_freq_vec);
    }
    return 0.0;
}

struct Stats {
    double mean = 0.0;
    double std = 0.0;
};

// Two-pass mean/std over every ordered pair (i, j), self-pairs included unless excluded.
inline Stats brute_stats(const std::vector<mti::NormalizedViews>& group, mti::View v, bool exclude_self = false) {
    std::vector<double> d;
    for (std::size_t i = 0; i < group.size(); ++i)
        for (std::size_t j = 0; j < group.size(); ++j)
            if (!(exclude_self && i == j)) d.push_back(dist(group[i], group[j], v));
    if (d.empty()) return {};
    double m = 0.0;
    for (double x : d) m += x;
    m /= static_cast<double>(d.size());
    double var = 0.0;
    for (double x : d) var += (x - m) * (x - m);
    return {m, std::sqrt(var / static_cast<double>(d.size()))};
}

inline std::string coarse_of(const std::string& fine) { return fine.substr(0, fine.find('|')); }

// Full-sort retrieval and pruning recomputed from raw entries, stats derived on the fly.
inline mti::PerViewEvidence brute_retrieve(const mti::TrafficDatabase& db, const mti::NormalizedViews& q,
                                           const std::string& proto, std::size_t k, double alpha, bool prune = true) {
    mti::PerViewEvidence out;
    const bool exclude_self = db.options().stats_exclude_self;
    for (mti::View v : mti::kAllViews) {
        if (!q.has(v)) continue;
        std::vector<const mti::DbEntry*> pool;
        mti::ProtocolLevel level = mti::ProtocolLevel::fine;
        std::string tag = proto;
        for (const auto& e : db.entries())
            if (e.views.has(v) && e.proto_fine == proto) pool.push_back(&e);
        if (pool.empty()) {
            level = mti::ProtocolLevel::coarse;
            tag = coarse_of(proto);
            for (const auto& e : db.entries())
                if (e.views.has(v) && coarse_of(e.proto_fine) == tag) pool.push_back(&e);
        }
        std::vector<std::pair<double, const mti::DbEntry*>> scored;
        for (auto* e : pool) scored.emplace_back(dist(q, e->views, v), e);
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first < b.first : a.second->flow_id < b.second->flow_id;
        });
        scored.resize(std::min(scored.size(), k));
        for (const auto& [d, e] : scored) {
            std::vector<mti::NormalizedViews> group;
            for (const auto& o : db.entries()) {
                const std::string& otag = level == mti::ProtocolLevel::fine ? o.proto_fine : coarse_of(o.proto_fine);
                if (o.class_label == e->class_label && otag == tag && o.views.has(v)) group.push_back(o.views);
            }
            const Stats s = brute_stats(group, v, exclude_self);
            const double tau = prune ? s.mean + alpha * s.std : std::numeric_limits<double>::infinity();
            out[mti::index_of(v)].push_back({e->flow_id, e->class_label, v, d, level, tag, tau, d <= tau});
        }
    }
    return out;
}

// Confusion-matrix free metric computation straight from the definitions.
struct BruteMetrics {
    std::map<std::string, double> pre, rcl, f1;
    double macro_pre = 0, macro_rcl = 0, macro_f1 = 0;
    double pre_n = 0, rcl_n = 0, aks = 0, aus = 0, na = 0, pre_k = 0, rcl_k = 0;
};

inline BruteMetrics brute_metrics(const std::vector<mti::Prediction>& rs, const std::vector<std::string>& labels,
                                  bool openset) {
    BruteMetrics m;
    auto ratio = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
    std::size_t active = 0;
    for (const auto& c : labels) {
        double tp = 0, fp = 0, fn = 0;
        for (const auto& r : rs) {
            if (r.truth == c && r.predicted == c) ++tp;
            if (r.truth != c && r.predicted == c) ++fp;
            if (r.truth == c && r.predicted != c) ++fn;
        }
        const double p = ratio(tp, tp + fp), q = ratio(tp, tp + fn);
        m.pre[c] = p;
        m.rcl[c] = q;
        m.f1[c] = ratio(2 * p * q, p + q);
        if (tp + fp + fn > 0) {
            ++active;
            m.macro_pre += p;
            m.macro_rcl += q;
            m.macro_f1 += m.f1[c];
        }
    }
    if (active) {
        m.macro_pre /= active;
        m.macro_rcl /= active;
        m.macro_f1 /= active;
    }
    if (openset) {
        // Known side is macro over known classes; novel is one positive class.
        m.pre_k = m.macro_pre;
        m.rcl_k = m.macro_rcl;
        double tpn = 0, pn = 0, nn = 0, kn = 0, kk = 0;
        for (const auto& r : rs) {
            const bool tnov = r.truth == "novel", pnov = r.predicted == "novel";
            if (pnov) ++pn;
            if (tnov) ++nn;
            if (tnov && pnov) ++tpn;
            if (!tnov) ++kn;
            if (!tnov && r.predicted == r.truth) ++kk;
        }
        m.pre_n = ratio(tpn, pn);
        m.rcl_n = ratio(tpn, nn);
        m.aks = ratio(kk, kn);
        m.aus = ratio(tpn, nn);
        m.na = (m.aks + m.aus) / 2;
    }
    return m;
}

// Separability check: assign each test flow to the nearest class centroid over
// simple raw summaries (mean byte agreement with class consensus payload, mean
// packet length, mean log inter-arrival), each z-scored by the pooled spread.
inline double nearest_centroid_f1(const std::vector<mti::FlowRecord>& train, const std::vector<mti::FlowRecord>& test) {
    struct Acc {
        std::vector<std::array<std::size_t, 256>> byte_hist;
        double len = 0, liat = 0;
        std::size_t n = 0;
    };
    auto summary = [](const mti::FlowRecord& f) {
        double len = 0, li = 0;
        for (auto x : f.pkt_lengths) len += static_cast<double>(x);
        for (auto x : f.iat_seconds) li += std::log(std::max(x, 1e-9));
        return std::pair{len / std::max<std::size_t>(1, f.pkt_lengths.size()),
                         li / std::max<std::size_t>(1, f.iat_seconds.size())};
    };
    std::map<std::string, Acc> cls;
    for (const auto& f : train) {
        auto& a = cls[*f.label];
        if (a.byte_hist.size() < f.payload.size()) a.byte_hist.resize(f.payload.size(), {});
        for (std::size_t i = 0; i < f.payload.size(); ++i) ++a.byte_hist[i][f.payload[i]];
        auto [l, t] = summary(f);
        a.len += l;
        a.liat += t;
        ++a.n;
    }
    std::map<std::string, std::vector<int>> consensus;
    double len_spread = 0, iat_spread = 0;
    std::vector<double> lens, iats;
    for (auto& [c, a] : cls) {
        a.len /= static_cast<double>(a.n);
        a.liat /= static_cast<double>(a.n);
        auto& cons = consensus[c];
        for (const auto& h : a.byte_hist)
            cons.push_back(static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin()));
    }
    for (const auto& f : train) {
        auto [l, t] = summary(f);
        len_spread += std::pow(l - cls[*f.label].len, 2);
        iat_spread += std::pow(t - cls[*f.label].liat, 2);
    }
    len_spread = std::sqrt(len_spread / static_cast<double>(train.size())) + 1e-9;
    iat_spread = std::sqrt(iat_spread / static_cast<double>(train.size())) + 1e-9;

    std::vector<mti::Prediction> preds;
    std::vector<std::string> labels;
    for (const auto& [c, a] : cls) labels.push_back(c);
    for (const auto& f : test) {
        auto [l, t] = summary(f);
        std::string best;
        double best_score = std::numeric_limits<double>::infinity();
        for (const auto& [c, a] : cls) {
            double mismatch = 0;
            const auto& cons = consensus[c];
            const std::size_t n = std::min(cons.size(), f.payload.size());
            for (std::size_t i = 0; i < n; ++i) mismatch += cons[i] != f.payload[i];
            const double pay = n ? mismatch / static_cast<double>(n) : 0.0;
            const double score = 4.0 * pay + std::abs(l - a.len) / len_spread + std::abs(t - a.liat) / iat_spread;
            if (score < best_score) best_score = score, best = c;
        }
        preds.push_back({*f.label, best});
    }
    return brute_metrics(preds, labels, false).macro_f1;
}

// Random flows for property tests: a few protocol tags (including a bare "TCP" fine
// tag), some flows without payload and some with a single packet (no time view).
inline std::vector<mti::FlowRecord> random_flows(std::mt19937_64& rng, std::size_t n, std::size_t classes,
                                                 std::size_t max_payload = 40, double missing_rate = 0.1) {
    static const std::vector<std::string> protos{"TCP", "TCP|HTTP", "TCP|TLS1.2", "UDP|DNS", "UDP|QUIC", "ICMP"};
    std::uniform_int_distribution<std::size_t> cls(0, classes - 1), pr(0, protos.size() - 1);
    std::uniform_int_distribution<int> byte(0, 255), nib(0, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<mti::FlowRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        mti::FlowRecord f;
        f.flow_id = "f" + std::to_string(i);
        const std::size_t c = cls(rng);
        f.label = "c" + std::to_string(c);
        f.proto_fine = protos[pr(rng)];
        if (u(rng) >= missing_rate) {
            const std::size_t len = 1 + rng() % max_payload;
            for (std::size_t b = 0; b < len; ++b)
                f.payload.push_back(static_cast<std::uint8_t>(nib(rng) == 0 ? byte(rng) : (c * 37 + b) & 0xff));
        }
        const std::size_t pk = u(rng) < missing_rate ? 1 : 2 + rng() % 30;
        for (std::size_t p = 0; p < pk; ++p) f.pkt_lengths.push_back(static_cast<std::int64_t>(40 + rng() % 1400));
        for (std::size_t p = 1; p < pk; ++p) f.iat_seconds.push_back(u(rng) * (1.0 + static_cast<double>(c)));
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace oracle
