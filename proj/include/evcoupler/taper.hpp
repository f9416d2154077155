#pragma once
#include <complex>
#include <string>
#include <vector>

#include "evcoupler/modesolver.hpp"

namespace evc {

// Width profile of an adiabatic taper. y in um starting at 0 (wide, chip
// end); w in nm, non-increasing from the start width down to the tip width.
struct TaperProfile {
  std::vector<double> y_um;
  std::vector<double> w_nm;
  double length_um() const { return y_um.empty() ? 0.0 : y_um.back(); }
  void validate() const;  // monotonicity + matching array lengths
};

// Tabulated dispersion the taper design runs on: bare-waveguide fundamental
// n_WG(w) and the two lowest coupled supermodes n1(w) >= n2(w), all at one
// wavelength, on a common ascending width grid.
struct DispersionData {
  std::vector<double> w_nm;
  std::vector<double> n_wg;
  std::vector<double> n1, n2;
  void validate() const;
  double gap(size_t i) const { return n1[i] - n2[i]; }
};

// Integrates dw/dy = alpha*k0*gap(w)^2 / (dn_WG/dw) from w_start down to
// w_tip: the profile saturates |dn_WG/dy| = alpha * k0 * gap^2 everywhere,
// the shortest taper for the given safety factor. dn_WG/dw comes from
// central differences on the table nodes, monotone-cubic interpolated in
// between (as is the gap). Throws if gap < 1e-4 anywhere on [w_tip, w_start]
// (length diverges) or if n_WG is not strictly increasing in w.
TaperProfile design_taper(const DispersionData& disp, double w_start_nm,
                          double w_tip_nm, double alpha, double lambda_nm,
                          int n_samples = 800);

// Safety factor that makes the designed taper come out at target_length_um;
// bisection on alpha (L scales as 1/alpha exactly, so this is one division,
// but the bisection keeps it honest against future nonlinear variants).
double alpha_for_length(const DispersionData& disp, double w_start_nm,
                        double w_tip_nm, double target_length_um,
                        double lambda_nm);

struct AdiabaticityReport {
  std::vector<double> y_um;
  std::vector<double> ratio;  // |dn_WG/dy| / (k0 * gap^2), dimensionless
  double max_ratio = 0.0;
  double argmax_y_um = 0.0;
};

// Evaluates the adiabaticity ratio pointwise on the profile. A profile is
// adiabatic at safety factor alpha iff max_ratio <= alpha. Throws on a
// zero-length profile or when the profile leaves dispersion coverage.
AdiabaticityReport adiabaticity_margin(const TaperProfile& profile,
                                       const DispersionData& disp,
                                       double lambda_nm);

enum class EmeLaunch {
  wg_like,      // unit power in the supermode that best matches the bare
                // waveguide fundamental at the first section
  fundamental,  // unit power in the highest-n_eff supermode
  custom,       // options.launch_coeffs, one per mode of the first section
};

struct EmeOptions {
  int n_sections = 60;
  int n_modes = 4;
  double resolution_nm = 15.0;
  double padding_nm = 1000.0;
  bool full_domain = false;
  EmeLaunch launch = EmeLaunch::wg_like;
  std::vector<std::complex<double>> launch_coeffs;
  Exec exec = Exec::serial;
};

// Forward-only eigenmode-expansion record. Sections are uniform-length slices
// of the profile; amplitudes are modal coefficients at each section entry
// (after projection) with phase accumulated across the section. A projection
// between identical cross-sections conserves power to roundoff (the modal
// basis is exactly orthonormal under the cross-power pairing). Between
// differing cross-sections the pairing is indefinite and the projected power
// can exceed the launch power slightly; max_power_creation records the worst
// excess of total modal power over the launch power (0 when conservative).
struct EmeRecord {
  std::vector<double> y_mid_um;               // section midpoints
  std::vector<std::vector<double>> neff;      // per section, per mode
  std::vector<double> power_total;            // per section, after projection
  std::vector<double> power_fiber_like;       // per section
  std::vector<double> power_wg_like;          // per section
  double t_fiber = 0.0;   // final power in the fiber-like supermode
  double launch_power = 1.0;
  double max_power_creation = 0.0;
  std::vector<std::complex<double>> final_amps;
  std::vector<double> final_fiber_overlap;    // per final-section mode
};

// Slices the profile, solves the coupled cross-section per slice, and folds
// amplitudes forward with overlap projections and per-section phases.
// fiber-like / wg-like identification is by best squared overlap against the
// bare-fiber / bare-waveguide fundamental solved on the same grid; t_fiber
// requires the final fiber-like overlap > 0.5 (else mode-identification
// error). geometry `base` supplies everything but the width.
EmeRecord propagate_eme(const TaperProfile& profile,
                        const CouplerGeometry& base, const MaterialSet& mat,
                        const EmeOptions& opts = {});

// propagate_eme per wavelength; returns (lambda_nm, T_fiber) pairs in input
// order. Wavelength points are independent and honor opts.exec.
std::vector<std::pair<double, double>> sweep_wavelength(
    const TaperProfile& profile, const CouplerGeometry& base,
    const MaterialSet& mat, const std::vector<double>& lambdas_nm,
    const EmeOptions& opts = {});

}  // namespace evc
