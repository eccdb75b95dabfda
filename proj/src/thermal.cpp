#include "qnl/thermal.hpp"

#include "qnl/error.hpp"
#include "qnl/units.hpp"

#include <cmath>
#include <complex>

namespace qnl::thermal {

void ThermalModel::validate() const {
  if (!(f_q > 0.0 && f_r > 0.0 && kappa > 0.0 && t1_zero > 0.0))
    throw DomainError("ThermalModel: f_q, f_r, kappa, t1_zero must be > 0");
}

double chi_estimate(double g, double delta) {
  if (delta == 0.0) throw DomainError("chi_estimate: zero detuning");
  return g * g / delta;
}

double t1_vs_temperature(const ThermalModel& m, double temperature) {
  if (temperature < 0.0) throw DomainError("t1_vs_temperature: negative temperature");
  if (temperature == 0.0) return m.t1_zero;
  return m.t1_zero * std::tanh(kPlanck * m.f_q / (2.0 * kBoltzmann * temperature));
}

double thermal_population(double f_q, double temperature) {
  if (temperature < 0.0) throw DomainError("thermal_population: negative temperature");
  if (temperature == 0.0) return 0.0;
  const double x = kPlanck * f_q / (kBoltzmann * temperature);
  return 1.0 / (1.0 + std::exp(x));
}

double electron_temperature(double p_e, double f_q) {
  if (!(p_e > 0.0 && p_e < 0.5))
    throw DomainError("electron_temperature: p_e must lie in (0, 0.5)");
  // ln(1/p - 1) = log1p((1 - 2p)/p) keeps precision near p = 0.5.
  return kPlanck * f_q / (kBoltzmann * std::log1p((1.0 - 2.0 * p_e) / p_e));
}

double photon_occupation(double f_r, double temperature) {
  if (temperature < 0.0) throw DomainError("photon_occupation: negative temperature");
  if (temperature == 0.0) return 0.0;
  return 1.0 / std::expm1(kPlanck * f_r / (kBoltzmann * temperature));
}

double resonator_dephasing(const ThermalModel& m, double n_th) {
  if (m.kappa == 0.0) throw DomainError("resonator_dephasing: kappa = 0");
  if (n_th < 0.0) throw DomainError("resonator_dephasing: negative occupation");
  using namespace std::complex_literals;
  const std::complex<double> base = 1.0 + 2.0i * m.chi / m.kappa;
  const std::complex<double> root = std::sqrt(base * base + 8.0i * m.chi * n_th / m.kappa);
  return 0.5 * m.kappa * (root - 1.0).real();
}

}  // namespace qnl::thermal
