#include "mti/distance.hpp"

#include <cassert>
#include <cmath>

#include "mti/error.hpp"

namespace mti {

double payload_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw ConsistencyError("payload_distance: length mismatch");
    if (a.empty()) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

double spectral_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConsistencyError("spectral_distance: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double view_distance(const NormalizedViews& a, const NormalizedViews& b, View view) {
    switch (view) {
    case View::payload: return payload_distance(a.payload_vec, b.payload_vec);
    case View::length: return spectral_distance(a.len_freq_vec, b.len_freq_vec);
    case View::time: return spectral_distance(a.iat_freq_vec, b.iat_freq_vec);
    }
    return 0.0;
}

} // namespace mti
