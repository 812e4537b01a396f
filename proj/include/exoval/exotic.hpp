#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace exoval {

enum class ExoticKind { knock_out_call, knock_in_call, asian_call, lookback_call, european_call };

std::string_view to_string(ExoticKind kind);
// Accepts the canonical names plus the short aliases "barrier" (knock-out),
// "ko", "ki", "asian", "lookback", "european".
ExoticKind parse_exotic_kind(std::string_view name);

constexpr bool is_barrier(ExoticKind k) {
    return k == ExoticKind::knock_out_call || k == ExoticKind::knock_in_call;
}

// Contract terms of a single-asset call. The barrier is an up barrier and is
// present exactly for the knock-in/knock-out kinds.
struct ExoticSpec {
    ExoticKind kind = ExoticKind::european_call;
    double strike = 100.0;
    double maturity = 1.0;
    std::optional<double> barrier;

    // Throws ConfigError unless K > 0, T > 0 and, for barrier kinds,
    // B > max(spot, K).
    void validate(double spot) const;

    ExoticSpec with_kind(ExoticKind k) const;
};

}  // namespace exoval
