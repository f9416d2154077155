#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace evc {

// A value with a one-sigma uncertainty. Uncertainties propagate to first
// order (relative sigmas add in quadrature through products and ratios).
struct Measured {
  double value = 0.0;
  double sigma = 0.0;
  std::string label;
};

struct EfficiencyChain {
  std::vector<Measured> stages;
  Measured product;
};

// Product of stage efficiencies with quadrature error propagation. A zero
// stage collapses the product (and its sigma) to zero. Throws on an empty
// chain or a negative stage.
EfficiencyChain chain_product(const std::vector<Measured>& stages);

struct EtaCfResult {
  Measured eta_cf;
  bool unphysical = false;  // extracted efficiency above 1
  std::string warning;
};

// Chip-fiber coupling from a reflection calibration: light sent down the
// fiber traverses the interface twice, so
//   eta_cf = sqrt(P_reflected / (P_incident * eta_fbs))
// where eta_fbs accounts for the splitter route. A ratio above 1 is
// reported as a warning, not an error: calibration drift can push the
// estimate slightly unphysical and the caller should see the number.
EtaCfResult extract_eta_cf(double p_reflected, double p_incident,
                           const Measured& eta_fbs);

// Square root of a two-pass (there-and-back) transmission measurement:
// value -> sqrt(value), sigma -> sigma / (2 sqrt(value)).
Measured one_way_fiber(const Measured& two_way);

// r_pure = r * sqrt(1 - g2_zero): multi-photon-corrected single photon
// rate. Throws when g2_zero >= 1 (no single-photon character to correct).
Measured pure_single_photon_rate(const Measured& rate, const Measured& g2_zero);

struct SourceEfficiency {
  Measured fiber_rate_mhz;  // detected rate referred back to the fiber
  Measured efficiency;      // fiber rate / excitation repetition rate
};

// Divides a detected rate by the off-chip detection chain, then by the
// repetition rate (exact) to get the in-fiber photon probability per pulse.
SourceEfficiency source_efficiency(const Measured& detected_rate_mhz,
                                   const EfficiencyChain& offchip,
                                   double rep_rate_mhz);

// rep * on-chip product * eta_cf * off-chip product: the rate a detector
// should see if every pulse yielded a photon on chip.
Measured expected_detector_rate(const EfficiencyChain& onchip,
                                const Measured& eta_cf,
                                const EfficiencyChain& offchip,
                                double rep_rate_mhz);

// beta = 1 - gamma_ref / gamma_total: fraction of spontaneous emission
// captured by the guided mode, from the lifetime contrast against a
// reference (unguided) environment. Requires gamma_ref < gamma_total.
Measured beta_factor(const Measured& gamma_total, const Measured& gamma_ref);

// Monte-Carlo standard deviation of a stage product under independent
// Gaussian scatter, for cross-checking the quadrature formula.
double mc_chain_sigma(const std::vector<Measured>& stages, int n_samples,
                      uint64_t seed);

}  // namespace evc
