#include "evcoupler/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd clamp_to_box(Eigen::VectorXd v, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = std::min(hi(i), std::max(lo(i), v(i)));
  return v;
}

}  // namespace

ModelFn g2_model(std::vector<double> tau_ns, double rep_period_ns) {
  return [tau = std::move(tau_ns), T = rep_period_ns](
             const Eigen::VectorXd& th, Eigen::VectorXd& f, Eigen::MatrixXd* J) {
    const double a_peak = th(0), tau_peak = th(1), b = th(2), tau_blink = th(3),
                 g2z = th(4), background = th(5);
    const double cut = 45.0 * tau_peak;
    for (size_t i = 0; i < tau.size(); ++i) {
      const double t = tau[i];
      const double e0 = std::exp(-std::abs(t) / tau_peak);
      double v = background + g2z * a_peak * e0;
      double dA = g2z * e0;
      double dTp = g2z * a_peak * e0 * std::abs(t) / (tau_peak * tau_peak);
      double dB = 0.0, dTb = 0.0;
      const int k_lo = static_cast<int>(std::floor((t - cut) / T));
      const int k_hi = static_cast<int>(std::ceil((t + cut) / T));
      for (int k = k_lo; k <= k_hi; ++k) {
        if (k == 0) continue;
        const double eb = std::exp(-std::abs(k) * T / tau_blink);
        const double env = 1.0 + b * eb;
        const double ep = std::exp(-std::abs(t - k * T) / tau_peak);
        v += a_peak * env * ep;
        dA += env * ep;
        dTp += a_peak * env * ep * std::abs(t - k * T) / (tau_peak * tau_peak);
        dB += a_peak * eb * ep;
        dTb += a_peak * b * eb * ep * std::abs(k) * T / (tau_blink * tau_blink);
      }
      const auto ii = static_cast<Eigen::Index>(i);
      f(ii) = v;
      if (J) {
        (*J)(ii, 0) = dA;
        (*J)(ii, 1) = dTp;
        (*J)(ii, 2) = dB;
        (*J)(ii, 3) = dTb;
        (*J)(ii, 4) = a_peak * e0;
        (*J)(ii, 5) = 1.0;
      }
    }
  };
}

ModelFn saturation_model(std::vector<double> power) {
  return [x = std::move(power)](const Eigen::VectorXd& th, Eigen::VectorXd& f,
                                Eigen::MatrixXd* J) {
    const double imax = th(0), psat = th(1);
    for (size_t i = 0; i < x.size(); ++i) {
      const double e = std::exp(-x[i] / psat);
      const auto ii = static_cast<Eigen::Index>(i);
      f(ii) = imax * (1.0 - e);
      if (J) {
        (*J)(ii, 0) = 1.0 - e;
        (*J)(ii, 1) = -imax * e * x[i] / (psat * psat);
      }
    }
  };
}

ModelFn decay_model(std::vector<double> t_ns) {
  const double t0 = t_ns.empty() ? 0.0 : t_ns.front();
  return [x = std::move(t_ns), t0](const Eigen::VectorXd& th, Eigen::VectorXd& f,
                                   Eigen::MatrixXd* J) {
    const double a = th(0), rate = th(1), b = th(2);
    for (size_t i = 0; i < x.size(); ++i) {
      const double e = std::exp(-rate * (x[i] - t0));
      const auto ii = static_cast<Eigen::Index>(i);
      f(ii) = a * e + b;
      if (J) {
        (*J)(ii, 0) = e;
        (*J)(ii, 1) = -a * (x[i] - t0) * e;
        (*J)(ii, 2) = 1.0;
      }
    }
  };
}

FitResult nlls_fit(const ModelFn& model, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& weights, Eigen::VectorXd theta0,
                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                   const FitOptions& opts) {
  const Eigen::Index n = y.size();
  const Eigen::Index p = theta0.size();
  if (weights.size() != n)
    throw std::invalid_argument("nlls_fit: weight count does not match data");
  if (lower.size() != p || upper.size() != p)
    throw std::invalid_argument("nlls_fit: bound count does not match parameters");
  if (n <= p)
    throw std::invalid_argument("nlls_fit: need more data points than parameters");
  if ((weights.array() < 0).any())
    throw std::invalid_argument("nlls_fit: negative weight");

  Eigen::VectorXd theta = clamp_to_box(std::move(theta0), lower, upper);
  Eigen::VectorXd f(n), r(n);
  Eigen::MatrixXd J(n, p);

  auto eval_cost = [&](const Eigen::VectorXd& th, Eigen::VectorXd& fv) {
    Eigen::VectorXd rv;
    model(th, fv, nullptr);
    rv = y - fv;
    return (weights.array() * rv.array().square()).sum();
  };

  model(theta, f, &J);
  r = y - f;
  double cost = (weights.array() * r.array().square()).sum();
  double lambda = opts.lambda0;

  FitResult out;
  int it = 0;
  double last_drop = 1.0;  // relative drop of the previous accepted step
  for (; it < opts.max_iterations; ++it) {
    Eigen::MatrixXd Jw = weights.asDiagonal() * J;
    Eigen::MatrixXd A = J.transpose() * Jw;           // normal matrix
    Eigen::VectorXd g = J.transpose() * (weights.asDiagonal() * r);

    // convergence uses the projected gradient: a component whose improving
    // direction is blocked by an active bound cannot be reduced further
    Eigen::VectorXd gp = g;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (theta(j) <= lower(j) && g(j) < 0) gp(j) = 0.0;
      if (theta(j) >= upper(j) && g(j) > 0) gp(j) = 0.0;
    }
    if (gp.lpNorm<Eigen::Infinity>() < opts.grad_tol) break;

    // a parameter can legitimately lose its influence mid-run (a vanishing
    // amplitude kills the column of its time constant); the truncated solve
    // below copes with that, so only the initial point is diagnosed
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!std::isfinite(A(j, j)))
        throw std::runtime_error("nlls_fit: non-finite model output");
      if (it == 0 && !(A(j, j) > 0))
        throw std::runtime_error(
            "nlls_fit: singular normal matrix, parameter " + std::to_string(j) +
            " has no effect on the model at the initial parameters");
    }

    bool stepped = false;
    bool settled = false;
    double accepted_drop = 0.0;
    double nu = 2.0;
    while (!stepped) {
      Eigen::MatrixXd Ad = A;
      for (Eigen::Index j = 0; j < p; ++j) Ad(j, j) += lambda * A(j, j);
      // truncated SVD keeps a numerically dead direction (a parameter whose
      // curvature is many orders below the rest) from polluting the whole step
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(
          Ad, Eigen::ComputeThinU | Eigen::ComputeThinV);
      svd.setThreshold(1e-12);
      Eigen::VectorXd delta = svd.solve(g);
      Eigen::VectorXd cand = clamp_to_box(theta + delta, lower, upper);
      Eigen::VectorXd step = cand - theta;  // after box clamping
      Eigen::VectorXd fc(n);
      const double cost_c = eval_cost(cand, fc);
      if (std::isfinite(cost_c) && cost_c < cost) {
        // gain ratio (actual / quadratic-model reduction) steers the damping;
        // near-quadratic valleys get aggressive shrinks instead of a fixed
        // factor, which matters when two parameters are strongly correlated
        double pred = 0.0;
        for (Eigen::Index j = 0; j < p; ++j)
          pred += step(j) * (lambda * A(j, j) * step(j) + g(j));
        const double rho = pred > 0 ? (cost - cost_c) / pred : 1.0;
        const double c3 = 2.0 * rho - 1.0;
        accepted_drop = (cost - cost_c) / std::max(cost, 1e-300);
        theta = cand;
        f = fc;
        r = y - f;
        cost = cost_c;
        lambda = std::max(lambda * std::max(1.0 / 3.0, 1.0 - c3 * c3 * c3),
                          1e-12);
        stepped = true;
      } else {
        // progress was already negligible and the best remaining candidate is
        // a vanishing step that moves the cost by less than the tolerance:
        // converged where we stand. Without the progress-history guard a
        // pathological model (cost not improvable from the start) would be
        // mislabeled converged instead of diverged.
        if (last_drop <= 1e-6 && std::isfinite(cost_c) &&
            cost_c - cost <= opts.cost_rel_tol * std::max(cost, 1e-300) &&
            step.norm() <= 1e-12 * (1.0 + theta.norm())) {
          settled = true;
          break;
        }
        lambda *= nu;
        nu *= 2.0;
        if (lambda > 1e14)
          throw std::runtime_error(
              "nlls_fit: diverged, no damping level yields an improving step");
      }
    }
    if (settled) { ++it; break; }
    last_drop = accepted_drop;
    model(theta, f, &J);
    r = y - f;
    if (accepted_drop < opts.cost_rel_tol) { ++it; break; }
  }
  if (it >= opts.max_iterations)
    throw std::runtime_error("nlls_fit: iteration cap reached without convergence");

  // Covariance of the optimum, scaled so intervals are calibrated for
  // relative weights: sigma_hat^2 = cost/(n-p). The pseudo-inverse keeps a
  // direction that became dead during the run from blowing up the rest; its
  // own variance is reported as zero (the parameter is pinned by convention).
  Eigen::MatrixXd Jw = weights.asDiagonal() * J;
  Eigen::MatrixXd A = J.transpose() * Jw;
  const double s2 = cost / static_cast<double>(n - p);
  Eigen::JacobiSVD<Eigen::MatrixXd> asvd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  asvd.setThreshold(1e-12);
  Eigen::MatrixXd cov =
      asvd.solve(Eigen::MatrixXd::Identity(p, p)) * s2;

  out.params = theta;
  out.covariance = cov;
  out.sigma = cov.diagonal().array().max(0.0).sqrt();
  out.cost = cost;
  out.residual_norm = r.norm();
  out.iterations = it;
  out.converged = true;
  return out;
}

// ---------------------------------------------------------------- g2 model

void G2Histogram::validate() const {
  if (tau_ns.size() != counts.size())
    throw std::invalid_argument("g2 histogram: tau and count lengths differ");
  if (tau_ns.size() < 8)
    throw std::invalid_argument("g2 histogram: too few bins");
  for (size_t i = 1; i < tau_ns.size(); ++i)
    if (!(tau_ns[i] > tau_ns[i - 1]))
      throw std::invalid_argument("g2 histogram: tau bins not increasing");
  if (!(rep_period_ns > 0))
    throw std::invalid_argument("g2 histogram: repetition period must be positive");
  const double span_needed = 5.0 * rep_period_ns;
  if (tau_ns.front() > -span_needed || tau_ns.back() < span_needed)
    throw std::invalid_argument(
        "g2 histogram: need at least 5 repetition periods of delay span on "
        "each side of zero");
  for (double c : counts)
    if (!std::isfinite(c))
      throw std::invalid_argument("g2 histogram: non-finite count");
}

std::vector<double> model_g2(const G2Params& p,
                             const std::vector<double>& tau_ns,
                             double rep_period_ns) {
  if (!(p.tau_peak_ns > 0) || !(p.tau_blink_ns > 0))
    throw std::invalid_argument("model_g2: decay times must be positive");
  if (!(rep_period_ns > 0))
    throw std::invalid_argument("model_g2: repetition period must be positive");
  for (size_t i = 1; i < tau_ns.size(); ++i)
    if (tau_ns[i] - tau_ns[i - 1] > 0.5 * p.tau_peak_ns)
      throw std::invalid_argument(
          "model_g2: delay grid coarser than half the peak decay time, peaks "
          "would be unresolvable");

  const double T = rep_period_ns;
  // exp(-45) ~ 3e-20: peaks beyond this window contribute below double
  // precision.
  const double cut = 45.0 * p.tau_peak_ns;
  std::vector<double> out(tau_ns.size());
  for (size_t i = 0; i < tau_ns.size(); ++i) {
    const double tau = tau_ns[i];
    double v = p.background +
               p.g2_zero * p.a_peak * std::exp(-std::abs(tau) / p.tau_peak_ns);
    const int k_lo = static_cast<int>(std::floor((tau - cut) / T));
    const int k_hi = static_cast<int>(std::ceil((tau + cut) / T));
    for (int k = k_lo; k <= k_hi; ++k) {
      if (k == 0) continue;
      const double env =
          1.0 + p.b * std::exp(-std::abs(k) * T / p.tau_blink_ns);
      v += p.a_peak * env * std::exp(-std::abs(tau - k * T) / p.tau_peak_ns);
    }
    out[i] = v;
  }
  return out;
}

namespace {

double percentile(std::vector<double> v, double q) {
  const size_t idx = static_cast<size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<long>(idx), v.end());
  return v[idx];
}

struct G2Internal {
  G2Params params;
  FitResult fit;
};

G2Internal fit_g2_params(const G2Histogram& hist) {
  hist.validate();
  const double T = hist.rep_period_ns;
  const auto& tau = hist.tau_ns;
  const auto& c = hist.counts;
  const size_t n = tau.size();

  const double cmax = *std::max_element(c.begin(), c.end());
  const double cmin = *std::min_element(c.begin(), c.end());
  if (!(cmax - cmin > 1e-12 * std::max(std::abs(cmax), 1.0)))
    throw std::invalid_argument(
        "fit_g2: histogram has no peak structure (all counts equal)");

  double min_dt = kInf;
  for (size_t i = 1; i < n; ++i) min_dt = std::min(min_dt, tau[i] - tau[i - 1]);

  // Rough parameter estimates from the raw histogram. Side-peak height near
  // |k|=1 sets the scale, area/height sets the peak time.
  const double b0_bg = percentile(c, 0.05);
  double side_max = 0.0, center_max = 0.0, peak1_area = 0.0;
  double h1 = 0.0, hfar = 0.0;
  const double tau_far = std::max(tau.back(), -tau.front()) - T;
  for (size_t i = 0; i < n; ++i) {
    const double a = std::abs(tau[i]);
    const double dt =
        0.5 * ((i + 1 < n ? tau[i + 1] : tau[i]) - (i > 0 ? tau[i - 1] : tau[i]));
    if (std::abs(a - T) < 0.4 * T) {
      side_max = std::max(side_max, c[i] - b0_bg);
      if (std::abs(tau[i] - T) < 0.5 * T) peak1_area += (c[i] - b0_bg) * dt;
      h1 = std::max(h1, c[i] - b0_bg);
    }
    if (a < 0.4 * T) center_max = std::max(center_max, c[i] - b0_bg);
    if (a > tau_far - 0.5 * T && std::abs(a - std::round(a / T) * T) < 0.4 * T)
      hfar = std::max(hfar, c[i] - b0_bg);
  }
  if (hfar <= 0.0) hfar = side_max;

  double a0 = std::max(side_max, 1e-9);
  double tp0 = peak1_area > 0 ? peak1_area / (2.0 * a0) : 0.1 * T;
  tp0 = std::min(std::max(tp0, std::max(1e-3 * T, 0.5 * min_dt)), 0.45 * T);
  double g2z0 = std::min(std::max(center_max / a0, 0.0), 1.5);
  // near/far peak-height ratio seeds the bunching amplitude; both sides use
  // the same max estimator so an unbunched histogram seeds at (about) zero
  double b0 = std::min(std::max(h1 / std::max(hfar, 1e-9) - 1.0, 1e-6), 10.0);
  double tb0 = 5.0 * T;

  Eigen::VectorXd theta0(6), lo(6), hi(6);
  theta0 << a0, tp0, b0, tb0, g2z0, std::max(b0_bg, 0.0);
  lo << 1e-12, std::max(1e-4 * T, 0.25 * min_dt), 0.0, 0.2 * T, 0.0, 0.0;
  hi << kInf, 0.8 * T, 50.0, 1e4 * T, 5.0, kInf;

  Eigen::VectorXd w(n);
  for (size_t i = 0; i < n; ++i)
    w(static_cast<Eigen::Index>(i)) = 1.0 / std::max(c[i], 1.0);

  G2Internal out;
  out.fit = nlls_fit(g2_model(tau, T), to_vec(c), w, theta0, lo, hi);
  const auto& th = out.fit.params;
  out.params = G2Params{th(0), th(1), th(2), th(3), th(4), th(5)};
  return out;
}

// Area ratio with an explicit peak set. Background is subtracted before
// integrating; the bin-width factor cancels between numerator and
// denominator only on a uniform grid, so widths are kept per bin.
double area_method_core(const G2Histogram& hist, double half_window_ns,
                        int k_min, double background) {
  const double T = hist.rep_period_ns;
  const auto& tau = hist.tau_ns;
  const auto& c = hist.counts;
  const size_t n = tau.size();

  auto window_area = [&](double center, bool& covered) {
    covered = center - half_window_ns >= tau.front() &&
              center + half_window_ns <= tau.back();
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (std::abs(tau[i] - center) > half_window_ns) continue;
      const double dt = 0.5 * ((i + 1 < n ? tau[i + 1] : tau[i]) -
                               (i > 0 ? tau[i - 1] : tau[i]));
      s += (c[i] - background) * dt;
    }
    return s;
  };

  bool cov0 = false;
  const double area0 = window_area(0.0, cov0);
  if (!cov0)
    throw std::invalid_argument(
        "g2 area method: integration window around zero delay exceeds the "
        "histogram span");

  double side_sum = 0.0;
  int side_count = 0;
  const int k_max = static_cast<int>(std::floor(
      (std::max(std::abs(tau.front()), std::abs(tau.back()))) / T));
  for (int k = k_min; k <= k_max; ++k) {
    for (int s : {-1, 1}) {
      bool covered = false;
      const double a = window_area(s * k * T, covered);
      if (covered) {
        side_sum += a;
        ++side_count;
      }
    }
  }
  if (side_count < 3)
    throw std::invalid_argument(
        "g2 area method: fewer than 3 fully-contained long-delay peaks "
        "(|k| >= " + std::to_string(k_min) + ") in the histogram span");
  return area0 / (side_sum / side_count);
}

int k_min_from_envelope(const G2Params& p, double T) {
  if (p.b <= 0.05) return 1;
  // smallest k with b*exp(-kT/tau_blink) < 0.05
  const double k = p.tau_blink_ns / T * std::log(p.b / 0.05);
  return std::max(1, static_cast<int>(std::floor(k)) + 1);
}

}  // namespace

G2Fit fit_g2(const G2Histogram& hist) {
  G2Internal in = fit_g2_params(hist);
  G2Fit out;
  out.fit = in.fit;
  out.params = in.params;
  out.g2_zero = in.params.g2_zero;
  out.g2_zero_ci95 = 1.96 * in.fit.sigma(4);

  const double b = in.params.b;
  const double sb = in.fit.sigma(2);
  out.blinking_amplitude = b / (1.0 + b);
  out.preparation_efficiency = 1.0 / (1.0 + b);
  // both are smooth functions of b with |d/db| = 1/(1+b)^2
  out.blinking_sigma = sb / ((1.0 + b) * (1.0 + b));
  out.preparation_sigma = out.blinking_sigma;

  const double hw = std::min(2.5 * in.params.tau_peak_ns,
                             0.45 * hist.rep_period_ns);
  try {
    out.g2_zero_area = area_method_core(
        hist, hw, k_min_from_envelope(in.params, hist.rep_period_ns),
        in.params.background);
  } catch (const std::invalid_argument&) {
    // span too short for clean reference peaks: the cross-check is simply
    // unavailable, the fitted value stands on its own
    out.g2_zero_area = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double g2_area_method(const G2Histogram& hist, double half_window_ns) {
  G2Internal in = fit_g2_params(hist);
  double hw = half_window_ns;
  if (!(hw > 0))
    hw = std::min(2.5 * in.params.tau_peak_ns, 0.45 * hist.rep_period_ns);
  return area_method_core(hist, hw,
                          k_min_from_envelope(in.params, hist.rep_period_ns),
                          in.params.background);
}

// ------------------------------------------------------- saturation, decay

namespace {

Eigen::VectorXd default_count_weights(const std::vector<double>& counts,
                                      const std::vector<double>& weights) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(counts.size()));
  if (!weights.empty()) {
    if (weights.size() != counts.size())
      throw std::invalid_argument("fit: weight count does not match data");
    for (size_t i = 0; i < counts.size(); ++i)
      w(static_cast<Eigen::Index>(i)) = weights[i];
  } else {
    for (size_t i = 0; i < counts.size(); ++i)
      w(static_cast<Eigen::Index>(i)) = 1.0 / std::max(counts[i], 1.0);
  }
  return w;
}

}  // namespace

double saturation_level(double power, double p_sat) {
  if (!(p_sat > 0))
    throw std::invalid_argument("saturation_level: P_sat must be positive");
  return 1.0 - std::exp(-power / p_sat);
}

SaturationFit fit_saturation(const std::vector<double>& power,
                             const std::vector<double>& counts,
                             const std::vector<double>& weights) {
  if (power.size() != counts.size())
    throw std::invalid_argument("fit_saturation: power and count lengths differ");
  if (power.size() < 3)
    throw std::invalid_argument("fit_saturation: need at least 3 points");
  const auto [pmin, pmax] = std::minmax_element(power.begin(), power.end());
  if (!(*pmax - *pmin > 1e-12 * std::max(std::abs(*pmax), 1.0)))
    throw std::invalid_argument(
        "fit_saturation: all power values identical, P_sat is undetermined");
  for (double p : power)
    if (p < 0) throw std::invalid_argument("fit_saturation: negative power");

  const double imax0 = 1.05 * *std::max_element(counts.begin(), counts.end());
  // first power where counts pass 1-1/e of the maximum, else the median
  double psat0 = 0.0;
  for (size_t i = 0; i < power.size(); ++i)
    if (counts[i] >= 0.632 * imax0 / 1.05) { psat0 = power[i]; break; }
  if (!(psat0 > 0)) {
    std::vector<double> ps = power;
    std::nth_element(ps.begin(), ps.begin() + static_cast<long>(ps.size() / 2),
                     ps.end());
    psat0 = ps[ps.size() / 2];
  }
  if (!(psat0 > 0)) psat0 = *pmax > 0 ? *pmax : 1.0;

  Eigen::VectorXd theta0(2), lo(2), hi(2);
  theta0 << std::max(imax0, 1e-9), psat0;
  lo << 1e-12, 1e-12;
  hi << kInf, kInf;

  SaturationFit out;
  out.fit = nlls_fit(saturation_model(power), to_vec(counts),
                     default_count_weights(counts, weights), theta0, lo, hi);
  out.i_max = out.fit.params(0);
  out.p_sat = out.fit.params(1);
  out.i_max_sigma = out.fit.sigma(0);
  out.p_sat_sigma = out.fit.sigma(1);
  return out;
}

DecayFit fit_decay(const std::vector<double>& t_ns,
                   const std::vector<double>& counts,
                   const std::vector<double>& weights) {
  if (t_ns.size() != counts.size())
    throw std::invalid_argument("fit_decay: time and count lengths differ");
  if (t_ns.size() < 10)
    throw std::invalid_argument("fit_decay: need at least 10 points");
  for (size_t i = 1; i < t_ns.size(); ++i)
    if (!(t_ns[i] > t_ns[i - 1]))
      throw std::invalid_argument("fit_decay: times not increasing");

  const double ymax = *std::max_element(counts.begin(), counts.end());
  const double ymin = *std::min_element(counts.begin(), counts.end());
  if (!(ymax - ymin > 1e-12 * std::max(std::abs(ymax), 1.0)))
    throw std::invalid_argument(
        "fit_decay: trace is constant, no decay to fit");

  const double b0 = ymin;
  const double a0 = std::max(counts.front() - b0, ymax - ymin);
  // first crossing of A/e sets the initial rate
  double rate0 = 0.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] - b0 <= a0 * std::exp(-1.0)) {
      if (t_ns[i] > t_ns.front()) rate0 = 1.0 / (t_ns[i] - t_ns.front());
      break;
    }
  }
  const double span = t_ns.back() - t_ns.front();
  if (!(rate0 > 0)) rate0 = 3.0 / span;

  const double t0 = t_ns.front();
  Eigen::VectorXd theta0(3), lo(3), hi(3);
  theta0 << a0, rate0, std::max(b0, 0.0);
  lo << 1e-12, -kInf, 0.0;
  hi << kInf, kInf, kInf;

  DecayFit out;
  out.fit = nlls_fit(decay_model(t_ns), to_vec(counts),
                     default_count_weights(counts, weights), theta0, lo, hi);
  if (!(out.fit.params(1) > 0))
    throw std::runtime_error(
        "fit_decay: fitted rate is not positive, trace does not decay");
  // internally the exponential is anchored at the first sample for
  // conditioning; convert back to the t=0 amplitude
  out.amplitude = out.fit.params(0) * std::exp(out.fit.params(1) * t0);
  out.rate_per_ns = out.fit.params(1);
  out.rate_sigma = out.fit.sigma(1);
  out.background = out.fit.params(2);
  return out;
}

}  // namespace evc
