#include "evcoupler/budget.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace evc {

namespace {

double rel(const Measured& m) {
  return m.value != 0.0 ? m.sigma / std::abs(m.value) : 0.0;
}

Measured scaled(double value, double rel_sigma, std::string label) {
  return Measured{value, std::abs(value) * rel_sigma, std::move(label)};
}

}  // namespace

EfficiencyChain chain_product(const std::vector<Measured>& stages) {
  if (stages.empty())
    throw std::invalid_argument("chain_product: empty efficiency chain");
  double prod = 1.0;
  double rel2 = 0.0;
  bool zero = false;
  for (const auto& s : stages) {
    if (s.value < 0)
      throw std::invalid_argument("chain_product: negative stage efficiency" +
                                  (s.label.empty() ? "" : " (" + s.label + ")"));
    if (s.sigma < 0)
      throw std::invalid_argument("chain_product: negative stage sigma" +
                                  (s.label.empty() ? "" : " (" + s.label + ")"));
    if (s.value == 0.0) zero = true;
    prod *= s.value;
    rel2 += rel(s) * rel(s);
  }
  EfficiencyChain out;
  out.stages = stages;
  out.product = zero ? Measured{0.0, 0.0, "chain"}
                     : scaled(prod, std::sqrt(rel2), "chain");
  return out;
}

EtaCfResult extract_eta_cf(double p_reflected, double p_incident,
                           const Measured& eta_fbs) {
  if (!(p_incident > 0))
    throw std::invalid_argument("extract_eta_cf: incident power must be positive");
  if (p_reflected < 0)
    throw std::invalid_argument("extract_eta_cf: negative reflected power");
  if (!(eta_fbs.value > 0))
    throw std::invalid_argument("extract_eta_cf: splitter efficiency must be positive");

  const double ratio = p_reflected / (p_incident * eta_fbs.value);
  EtaCfResult out;
  out.eta_cf.value = std::sqrt(ratio);
  // only the splitter efficiency carries uncertainty here; the square root
  // halves its relative error
  out.eta_cf.sigma = out.eta_cf.value * 0.5 * rel(eta_fbs);
  out.eta_cf.label = "eta_cf";
  if (ratio > 1.0) {
    out.unphysical = true;
    out.warning =
        "extracted coupling efficiency exceeds 1 (reflection calibration "
        "inconsistent); value reported anyway";
  }
  return out;
}

Measured one_way_fiber(const Measured& two_way) {
  if (!(two_way.value > 0))
    throw std::invalid_argument("one_way_fiber: two-way transmission must be positive");
  Measured out;
  out.value = std::sqrt(two_way.value);
  out.sigma = two_way.sigma / (2.0 * out.value);
  out.label = two_way.label.empty() ? "one_way" : two_way.label + "_one_way";
  return out;
}

Measured pure_single_photon_rate(const Measured& rate, const Measured& g2_zero) {
  if (g2_zero.value >= 1.0)
    throw std::invalid_argument(
        "pure_single_photon_rate: g2(0) >= 1, no single-photon component");
  if (g2_zero.value < 0)
    throw std::invalid_argument("pure_single_photon_rate: negative g2(0)");
  const double f = std::sqrt(1.0 - g2_zero.value);
  Measured out;
  out.value = rate.value * f;
  // d/dg2 of sqrt(1-g2) = -1/(2 sqrt(1-g2))
  const double rel_f = g2_zero.sigma / (2.0 * (1.0 - g2_zero.value));
  out.sigma = std::abs(out.value) * std::hypot(rel(rate), rel_f);
  out.label = "pure_rate";
  return out;
}

SourceEfficiency source_efficiency(const Measured& detected_rate_mhz,
                                   const EfficiencyChain& offchip,
                                   double rep_rate_mhz) {
  if (!(rep_rate_mhz > 0))
    throw std::invalid_argument("source_efficiency: repetition rate must be positive");
  if (!(offchip.product.value > 0))
    throw std::invalid_argument(
        "source_efficiency: off-chip chain transmission must be positive");
  SourceEfficiency out;
  const double fiber = detected_rate_mhz.value / offchip.product.value;
  const double r = std::hypot(rel(detected_rate_mhz), rel(offchip.product));
  out.fiber_rate_mhz = scaled(fiber, r, "fiber_rate_mhz");
  out.efficiency = scaled(fiber / rep_rate_mhz, r, "source_efficiency");
  return out;
}

Measured expected_detector_rate(const EfficiencyChain& onchip,
                                const Measured& eta_cf,
                                const EfficiencyChain& offchip,
                                double rep_rate_mhz) {
  if (!(rep_rate_mhz > 0))
    throw std::invalid_argument(
        "expected_detector_rate: repetition rate must be positive");
  const double v =
      rep_rate_mhz * onchip.product.value * eta_cf.value * offchip.product.value;
  const double r = std::sqrt(rel(onchip.product) * rel(onchip.product) +
                             rel(eta_cf) * rel(eta_cf) +
                             rel(offchip.product) * rel(offchip.product));
  return scaled(v, r, "expected_rate_mhz");
}

Measured beta_factor(const Measured& gamma_total, const Measured& gamma_ref) {
  if (!(gamma_total.value > 0) || !(gamma_ref.value > 0))
    throw std::invalid_argument("beta_factor: decay rates must be positive");
  if (gamma_ref.value >= gamma_total.value)
    throw std::invalid_argument(
        "beta_factor: reference decay rate is not below the total rate, "
        "coupled fraction would be non-positive");
  const double ratio = gamma_ref.value / gamma_total.value;
  Measured out;
  out.value = 1.0 - ratio;
  out.sigma = ratio * std::hypot(rel(gamma_ref), rel(gamma_total));
  out.label = "beta";
  return out;
}

double mc_chain_sigma(const std::vector<Measured>& stages, int n_samples,
                      uint64_t seed) {
  if (stages.empty())
    throw std::invalid_argument("mc_chain_sigma: empty efficiency chain");
  if (n_samples < 2)
    throw std::invalid_argument("mc_chain_sigma: need at least 2 samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    double prod = 1.0;
    for (const auto& st : stages) prod *= st.value + st.sigma * gauss(rng);
    sum += prod;
    sum2 += prod * prod;
  }
  const double mean = sum / n_samples;
  return std::sqrt(std::max(0.0, sum2 / n_samples - mean * mean));
}

}  // namespace evc
