#pragma once
#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace evc {

// Model callback for the least-squares engine: fill predictions f(theta) at
// the fit's data points and, when J is non-null, the Jacobian df_i/dtheta_j.
using ModelFn = std::function<void(const Eigen::VectorXd& theta,
                                   Eigen::VectorXd& f, Eigen::MatrixXd* J)>;

struct FitOptions {
  int max_iterations = 500;
  double cost_rel_tol = 1e-10;  // converged when a step improves cost less
  double grad_tol = 1e-8;       // or the weighted gradient drops below this
  double lambda0 = 1e-3;        // initial damping
};

struct FitResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // sigma^2-scaled inverse normal matrix
  Eigen::VectorXd sigma;       // sqrt of covariance diagonal
  double cost = 0.0;           // weighted sum of squared residuals
  double residual_norm = 0.0;  // unweighted ||y - f||
  int iterations = 0;
  bool converged = false;
};

// Damped (Levenberg-Marquardt) weighted least squares with box constraints.
// weights multiply squared residuals (1/sigma_i^2 for calibrated errors).
// Covariance is (J^T W J)^-1 scaled by cost/(n-p), so confidence intervals
// are calibrated even when weights are only relative. 95 % intervals are
// params +- 1.96*sigma. Throws on divergence (no acceptable step at maximum
// damping), a singular normal matrix (names the parameter index), or the
// iteration cap.
FitResult nlls_fit(const ModelFn& model, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& weights, Eigen::VectorXd theta0,
                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                   const FitOptions& opts = {});

// The model callbacks behind the built-in fits, with analytic Jacobians.
// Exposed so derivative correctness can be checked against finite
// differences. Parameter layouts:
//   g2:         [a_peak, tau_peak_ns, b, tau_blink_ns, g2_zero, background]
//   saturation: [i_max, p_sat]
//   decay:      [amplitude at the first sample, rate_per_ns, background]
// (the decay exponential is anchored at the first sample for conditioning).
ModelFn g2_model(std::vector<double> tau_ns, double rep_period_ns);
ModelFn saturation_model(std::vector<double> power);
ModelFn decay_model(std::vector<double> t_ns);

// ---------------------------------------------------------------- g2 model

// Pulsed-excitation autocorrelation histogram. tau bin centers in ns.
struct G2Histogram {
  std::vector<double> tau_ns;
  std::vector<double> counts;
  double rep_period_ns = 1000.0 / 76.0;  // 76 MHz pulse train
  void validate() const;  // monotone tau, >= 5 periods of span per side
};

struct G2Params {
  double a_peak = 1.0;       // height of an unbunched side peak
  double tau_peak_ns = 1.0;  // peak decay time
  double b = 0.0;            // blinking bunching amplitude
  double tau_blink_ns = 10;  // bunching envelope decay time
  double g2_zero = 0.0;      // center-peak suppression
  double background = 0.0;
};

// counts(tau) = B + g2_zero*A*exp(-|tau|/tau_peak)
//             + sum_{k!=0} A*(1 + b*exp(-|k|T/tau_blink))*exp(-|tau-kT|/tau_peak)
// Throws if the grid is coarser than tau_peak/2 (peaks unresolvable).
std::vector<double> model_g2(const G2Params& p,
                             const std::vector<double>& tau_ns,
                             double rep_period_ns);

struct G2Fit {
  FitResult fit;
  G2Params params;
  double g2_zero = 0.0, g2_zero_ci95 = 0.0;  // fit parameter, 95 % interval
  double g2_zero_area = 0.0;  // area-method cross-estimate, NaN if the span
                              // holds too few clean reference peaks
  // fraction of repetition cycles lost to dark periods, b/(1+b)
  double blinking_amplitude = 0.0, blinking_sigma = 0.0;
  // 1 - blinking_amplitude = 1/(1+b)
  double preparation_efficiency = 0.0, preparation_sigma = 0.0;
};

// Weighted (1/max(count,1), Poisson-like) fit of model_g2 plus the
// area-method cross check. Throws on a structureless histogram.
G2Fit fit_g2(const G2Histogram& hist);

// Ratio of background-subtracted area of the tau=0 peak to the mean area of
// long-delay peaks (|k| >= k_min, where the fitted bunching envelope has
// decayed below 5 %). half_window_ns <= 0 picks 2.5 fitted peak times.
// Throws when fewer than 3 long-delay peaks fit in the histogram span.
double g2_area_method(const G2Histogram& hist, double half_window_ns = 0.0);

// ------------------------------------------------------- saturation, decay

struct SaturationFit {
  FitResult fit;
  double i_max = 0.0, i_max_sigma = 0.0;
  double p_sat = 0.0, p_sat_sigma = 0.0;
};

// I(P) = I_max*(1 - exp(-P/P_sat)). Optional per-point weights (default
// Poisson-like 1/max(count,1)).
SaturationFit fit_saturation(const std::vector<double>& power,
                             const std::vector<double>& counts,
                             const std::vector<double>& weights = {});

// level = 1 - exp(-P/P_sat)
double saturation_level(double power, double p_sat);

struct DecayFit {
  FitResult fit;
  double rate_per_ns = 0.0, rate_sigma = 0.0;
  double amplitude = 0.0, background = 0.0;
};

// y(t) = A*exp(-rate*t) + B. Throws on non-decaying data. Optional weights
// as in fit_saturation.
DecayFit fit_decay(const std::vector<double>& t_ns,
                   const std::vector<double>& counts,
                   const std::vector<double>& weights = {});

}  // namespace evc
