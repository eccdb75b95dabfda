#include "qnl/resonator.hpp"

#include "qnl/error.hpp"
#include "qnl/units.hpp"

#include <cmath>
#include <numbers>

namespace qnl::resonator {

namespace {
constexpr double kBcsGapRatio = 1.76;
}

double kinetic_inductance(const FilmParams& film) {
  if (!(film.t_c > 0.0 && film.r_square > 0.0))
    throw DomainError("kinetic_inductance: T_c and R_sq must be > 0");
  const double gap = kBcsGapRatio * kBoltzmann * film.t_c;
  return kHbar * film.r_square / (std::numbers::pi * gap);
}

LumpedModel lumped_model(double l_k, double width, double length, double f_diff) {
  if (!(l_k > 0.0 && width > 0.0 && length > 0.0 && f_diff > 0.0))
    throw DomainError("lumped_model: all inputs must be > 0");
  LumpedModel m;
  m.f_diff = f_diff;
  m.width = width;
  m.length = length;
  m.l_per_length = l_k / width;
  m.l_diff = 2.0 * m.l_per_length * length / (std::numbers::pi * std::numbers::pi);
  const double w = to_angular(f_diff);
  m.c_diff = 1.0 / (w * w * m.l_diff);
  m.z_diff = std::sqrt(m.l_diff / m.c_diff);
  return m;
}

double coupling_ratio(double z_a, double f_a, double z_b, double f_b) {
  if (!(z_a > 0.0 && f_a > 0.0 && z_b > 0.0 && f_b > 0.0))
    throw DomainError("coupling_ratio: all inputs must be > 0");
  return (f_a * std::sqrt(z_a)) / (f_b * std::sqrt(z_b));
}

}  // namespace qnl::resonator
