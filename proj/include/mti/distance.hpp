#pragma once

#include <cstdint>
#include <span>

#include "mti/features.hpp"

namespace mti {

/// Fraction of positions where the two byte vectors differ.
double payload_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Euclidean norm of a - b.
double spectral_distance(std::span<const double> a, std::span<const double> b);

/// Metric for `view`: Hamming on payload integers, Euclidean on the spectra.
double view_distance(const NormalizedViews& a, const NormalizedViews& b, View view);

} // namespace mti
