#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mti/flow.hpp"

namespace mti {

enum class View : std::uint8_t { payload = 0, length = 1, time = 2 };

inline constexpr std::array<View, 3> kAllViews{View::payload, View::length, View::time};

std::string_view to_string(View v);
View view_from_string(std::string_view s);
constexpr std::size_t index_of(View v) { return static_cast<std::size_t>(v); }

struct NormConfig {
    std::size_t l_pay = 256;
    std::size_t l_len = 64;
    std::size_t l_time = 64;
    std::size_t w_seg = 16;

    /// Number of retained spectral bins.
    std::size_t k_f() const { return w_seg / 2; }
    /// Throws ValidationError if any length is zero or w_seg < 2.
    void validate() const;

    bool operator==(const NormConfig&) const = default;
};

struct NormalizedViews {
    std::vector<std::uint8_t> payload_vec;
    std::vector<double> len_time_vec;
    std::vector<double> iat_time_vec;
    std::vector<double> len_freq_vec;
    std::vector<double> iat_freq_vec;
    std::array<bool, 3> present{};

    bool has(View v) const { return present[index_of(v)]; }

    bool operator==(const NormalizedViews&) const = default;
};

std::vector<std::uint8_t> normalize_payload(std::span<const std::uint8_t> payload, std::size_t l_pay);

std::vector<double> truncate_or_pad(std::span<const double> seq, std::size_t length);

/// Magnitudes of the first floor(W/2) DFT bins of one frame; bin 0 is DC.
std::vector<double> frame_dft_amplitudes(std::span<const double> frame);

/// Truncate/pad to `length`, cut into ceil(length / w_seg) zero-padded frames and
/// mean-pool the per-frame amplitude spectra.
std::vector<double> spectral_profile(std::span<const double> seq, std::size_t length, std::size_t w_seg);

NormalizedViews normalize_flow(const FlowRecord& flow, const NormConfig& cfg);

} // namespace mti
