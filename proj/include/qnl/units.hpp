#pragma once

#include <numbers>

namespace qnl {

// CODATA 2018 exact values.
inline constexpr double kPlanck = 6.62607015e-34;   // J s
inline constexpr double kBoltzmann = 1.380649e-23;  // J/K
inline constexpr double kHbar = kPlanck / (2.0 * std::numbers::pi);

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Hz -> rad/s
constexpr double to_angular(double f_hz) { return kTwoPi * f_hz; }
/// rad/s -> Hz
constexpr double to_hz(double omega) { return omega / kTwoPi; }

namespace literals {
constexpr double operator""_GHz(long double v) { return static_cast<double>(v) * 1e9; }
constexpr double operator""_MHz(long double v) { return static_cast<double>(v) * 1e6; }
constexpr double operator""_kHz(long double v) { return static_cast<double>(v) * 1e3; }
constexpr double operator""_us(long double v) { return static_cast<double>(v) * 1e-6; }
constexpr double operator""_ns(long double v) { return static_cast<double>(v) * 1e-9; }
constexpr double operator""_mV(long double v) { return static_cast<double>(v) * 1e-3; }
constexpr double operator""_mK(long double v) { return static_cast<double>(v) * 1e-3; }
}  // namespace literals

}  // namespace qnl
