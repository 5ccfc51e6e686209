#include "mti/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>

#include "mti/error.hpp"

namespace mti {

std::string_view to_string(View v) {
    switch (v) {
    case View::payload: return "payload";
    case View::length: return "length";
    case View::time: return "time";
    }
    return "?";
}

View view_from_string(std::string_view s) {
    if (s == "payload") return View::payload;
    if (s == "length") return View::length;
    if (s == "time") return View::time;
    throw ValidationError("unknown view '" + std::string(s) + "'");
}

void NormConfig::validate() const {
    if (l_pay == 0) throw ValidationError("L_pay must be >= 1");
    if (l_len == 0) throw ValidationError("L_len must be >= 1");
    if (l_time == 0) throw ValidationError("L_time must be >= 1");
    if (w_seg < 2) throw ValidationError("W_seg must be >= 2");
}

std::vector<std::uint8_t> normalize_payload(std::span<const std::uint8_t> payload, std::size_t l_pay) {
    std::vector<std::uint8_t> out(l_pay, 0);
    std::copy_n(payload.begin(), std::min(payload.size(), l_pay), out.begin());
    return out;
}

std::vector<double> truncate_or_pad(std::span<const double> seq, std::size_t length) {
    std::vector<double> out(length, 0.0);
    std::copy_n(seq.begin(), std::min(seq.size(), length), out.begin());
    return out;
}

namespace {

using cplx = std::complex<double>;

// In-place iterative radix-2 Cooley-Tukey; size must be a power of two.
void fft_radix2(std::vector<cplx>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx w = std::polar(1.0, ang * static_cast<double>(k));
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

} // namespace

std::vector<double> frame_dft_amplitudes(std::span<const double> frame) {
    const std::size_t w = frame.size();
    const std::size_t k_f = w / 2;
    std::vector<double> amps(k_f, 0.0);
    if (k_f == 0) return amps;

    if (std::has_single_bit(w)) {
        std::vector<cplx> buf(frame.begin(), frame.end());
        fft_radix2(buf);
        for (std::size_t k = 0; k < k_f; ++k) amps[k] = std::abs(buf[k]);
        return amps;
    }

    // Direct sum for non power-of-two frame sizes; twiddle index is (n*k) mod w.
    std::vector<cplx> twiddle(w);
    for (std::size_t i = 0; i < w; ++i)
        twiddle[i] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(w));
    for (std::size_t k = 0; k < k_f; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t n = 0; n < w; ++n) acc += frame[n] * twiddle[(n * k) % w];
        amps[k] = std::abs(acc);
    }
    return amps;
}

std::vector<double> spectral_profile(std::span<const double> seq, std::size_t length, std::size_t w_seg) {
    const std::size_t k_f = w_seg / 2;
    const std::vector<double> v = truncate_or_pad(seq, length);
    const std::size_t n_frames = (length + w_seg - 1) / w_seg;
    std::vector<double> mean(k_f, 0.0);
    std::vector<double> frame(w_seg);
    for (std::size_t i = 0; i < n_frames; ++i) {
        std::fill(frame.begin(), frame.end(), 0.0);
        const std::size_t begin = i * w_seg;
        const std::size_t end = std::min(begin + w_seg, length);
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end),
                  frame.begin());
        const auto amps = frame_dft_amplitudes(frame);
        for (std::size_t k = 0; k < k_f; ++k) mean[k] += amps[k];
    }
    for (auto& m : mean) m /= static_cast<double>(n_frames);
    return mean;
}

NormalizedViews normalize_flow(const FlowRecord& flow, const NormConfig& cfg) {
    NormalizedViews views;
    views.payload_vec = normalize_payload(flow.payload, cfg.l_pay);

    const std::vector<double> lengths(flow.pkt_lengths.begin(), flow.pkt_lengths.end());
    views.len_time_vec = truncate_or_pad(lengths, cfg.l_len);
    views.iat_time_vec = truncate_or_pad(flow.iat_seconds, cfg.l_time);
    views.len_freq_vec = spectral_profile(lengths, cfg.l_len, cfg.w_seg);
    views.iat_freq_vec = spectral_profile(flow.iat_seconds, cfg.l_time, cfg.w_seg);

    views.present[index_of(View::payload)] = !flow.payload.empty();
    views.present[index_of(View::length)] = !flow.pkt_lengths.empty();
    views.present[index_of(View::time)] = !flow.iat_seconds.empty();
    return views;
}

} // namespace mti
