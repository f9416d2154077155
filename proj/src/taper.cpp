#include "evcoupler/taper.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace evc {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// Monotone cubic (Fritsch-Carlson) interpolant. Keeps tabulated monotone data
// monotone, which is what protects the taper integrand from spurious
// oscillation between coarse sweep points.
class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> x, std::vector<double> f)
      : x_(std::move(x)), f_(std::move(f)) {
    const size_t n = x_.size();
    if (n < 2 || f_.size() != n) fail("interpolant needs >= 2 points");
    for (size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) fail("interpolant abscissae not increasing");
    d_.resize(n);
    std::vector<double> h(n - 1), delta(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      delta[i] = (f_[i + 1] - f_[i]) / h[i];
    }
    if (n == 2) {
      d_[0] = d_[1] = delta[0];
    } else {
      for (size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
          d_[i] = 0.0;
        } else {
          const double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
          d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
      }
      d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
      d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }
  }

  double xmin() const { return x_.front(); }
  double xmax() const { return x_.back(); }

  double value(double x) const { return eval(x, false); }
  double derivative(double x) const { return eval(x, true); }

 private:
  static double end_slope(double h0, double h1, double del0, double del1) {
    double d = ((2 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if (d * del0 <= 0) return 0.0;
    if (del0 * del1 < 0 && std::abs(d) > 3 * std::abs(del0)) return 3 * del0;
    return d;
  }

  double eval(double x, bool deriv) const {
    const size_t n = x_.size();
    size_t i = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    if (i == 0) i = 1;
    if (i >= n) i = n - 1;
    --i;  // interval [x_i, x_{i+1}]
    const double h = x_[i + 1] - x_[i], t = (x - x_[i]) / h;
    const double f0 = f_[i], f1 = f_[i + 1], d0 = d_[i], d1 = d_[i + 1];
    if (!deriv) {
      const double t2 = t * t, t3 = t2 * t;
      return f0 * (2 * t3 - 3 * t2 + 1) + f1 * (-2 * t3 + 3 * t2) +
             h * (d0 * (t3 - 2 * t2 + t) + d1 * (t3 - t2));
    }
    const double t2 = t * t;
    return (f0 * (6 * t2 - 6 * t) + f1 * (-6 * t2 + 6 * t)) / h +
           d0 * (3 * t2 - 4 * t + 1) + d1 * (3 * t2 - 2 * t);
  }

  std::vector<double> x_, f_, d_;
};

// dn/dw at table nodes by central differences (one-sided at the ends),
// interpolated between nodes.
Pchip slope_interpolant(const std::vector<double>& w,
                        const std::vector<double>& f) {
  const size_t n = w.size();
  std::vector<double> d(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t a = i == 0 ? 0 : i - 1;
    const size_t b = i + 1 == n ? i : i + 1;
    d[i] = (f[b] - f[a]) / (w[b] - w[a]);
  }
  return Pchip(w, d);
}

struct DesignCurves {
  Pchip dn_dw;  // of the bare-waveguide branch
  Pchip gap;    // supermode splitting n1 - n2
};

DesignCurves make_curves(const DispersionData& disp) {
  disp.validate();
  std::vector<double> g(disp.w_nm.size());
  for (size_t i = 0; i < g.size(); ++i) g[i] = disp.gap(i);
  return {slope_interpolant(disp.w_nm, disp.n_wg), Pchip(disp.w_nm, g)};
}

void check_coverage(const DispersionData& disp, double w, const char* who) {
  if (w < disp.w_nm.front() - 1e-9 || w > disp.w_nm.back() + 1e-9)
    fail(std::string(who) + ": width " + std::to_string(w) +
         " nm outside dispersion coverage [" +
         std::to_string(disp.w_nm.front()) + ", " +
         std::to_string(disp.w_nm.back()) + "]");
}

}  // namespace

void TaperProfile::validate() const {
  if (y_um.size() != w_nm.size()) fail("taper profile: y/w length mismatch");
  if (y_um.empty()) fail("taper profile: empty");
  for (size_t i = 1; i < y_um.size(); ++i) {
    if (!(y_um[i] > y_um[i - 1])) fail("taper profile: y not increasing");
    if (w_nm[i] > w_nm[i - 1] + 1e-12) fail("taper profile: width increases");
  }
}

void DispersionData::validate() const {
  const size_t n = w_nm.size();
  if (n < 2) fail("dispersion data: need >= 2 width points");
  if (n_wg.size() != n || n1.size() != n || n2.size() != n)
    fail("dispersion data: column length mismatch");
  for (size_t i = 1; i < n; ++i)
    if (!(w_nm[i] > w_nm[i - 1])) fail("dispersion data: widths not ascending");
  for (size_t i = 0; i < n; ++i)
    if (n1[i] < n2[i]) fail("dispersion data: n1 < n2 at a node");
}

TaperProfile design_taper(const DispersionData& disp, double w_start_nm,
                          double w_tip_nm, double alpha, double lambda_nm,
                          int n_samples) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail("design_taper: alpha must be in (0,1)");
  if (!(w_tip_nm < w_start_nm)) fail("design_taper: w_tip must be < w_start");
  if (n_samples < 2) fail("design_taper: n_samples < 2");
  check_coverage(disp, w_tip_nm, "design_taper");
  check_coverage(disp, w_start_nm, "design_taper");
  const DesignCurves c = make_curves(disp);
  const double k0 = kTwoPi / lambda_nm;

  // integrate dy = dn_WG/dw / (alpha * k0 * gap^2) dw from the wide end down
  auto integrand = [&](double w) {
    const double g = c.gap.value(w);
    if (g < 1e-4)
      fail("design_taper: supermode gap below 1e-4 at width " +
           std::to_string(w) + " nm (taper length diverges)");
    const double s = c.dn_dw.value(w);
    if (s <= 0.0)
      fail("design_taper: non-monotone waveguide dispersion at width " +
           std::to_string(w) + " nm");
    return s / (alpha * k0 * g * g);
  };

  TaperProfile p;
  p.w_nm.resize(n_samples);
  p.y_um.resize(n_samples);
  const double step = (w_start_nm - w_tip_nm) / (n_samples - 1);
  double y_nm = 0.0;
  double prev_g = integrand(w_start_nm);
  p.w_nm[0] = w_start_nm;
  p.y_um[0] = 0.0;
  for (int j = 1; j < n_samples; ++j) {
    const double w = w_start_nm - j * step;
    const double g = integrand(w);
    y_nm += 0.5 * (prev_g + g) * step;
    prev_g = g;
    p.w_nm[j] = w;
    p.y_um[j] = y_nm / 1000.0;
  }
  p.validate();
  return p;
}

double alpha_for_length(const DispersionData& disp, double w_start_nm,
                        double w_tip_nm, double target_length_um,
                        double lambda_nm) {
  if (!(target_length_um > 0)) fail("alpha_for_length: target length <= 0");
  // L(alpha) = L(alpha0)*alpha0/alpha exactly, but bisect anyway so the
  // contract survives integrand changes
  auto len = [&](double a) {
    return design_taper(disp, w_start_nm, w_tip_nm, a, lambda_nm).length_um();
  };
  double lo = 1e-8, hi = 0.999999;
  if (len(hi) > target_length_um)
    fail("alpha_for_length: target shorter than any alpha < 1 achieves");
  if (len(lo) < target_length_um)
    fail("alpha_for_length: target longer than alpha = 1e-8 achieves");
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (len(mid) > target_length_um ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

AdiabaticityReport adiabaticity_margin(const TaperProfile& profile,
                                       const DispersionData& disp,
                                       double lambda_nm) {
  profile.validate();
  if (profile.y_um.size() < 2 || profile.length_um() <= 0.0)
    fail("adiabaticity_margin: zero-length profile");
  const DesignCurves c = make_curves(disp);
  const double k0 = kTwoPi / lambda_nm;
  const size_t n = profile.y_um.size();

  AdiabaticityReport rep;
  rep.y_um = profile.y_um;
  rep.ratio.resize(n);
  for (size_t i = 0; i < n; ++i) {
    check_coverage(disp, profile.w_nm[i], "adiabaticity_margin");
    const size_t a = i == 0 ? 0 : i - 1;
    const size_t b = i + 1 == n ? i : i + 1;
    const double dw_dy = (profile.w_nm[b] - profile.w_nm[a]) /
                         ((profile.y_um[b] - profile.y_um[a]) * 1000.0);
    const double dn_dy = c.dn_dw.value(profile.w_nm[i]) * dw_dy;  // per nm
    const double g = c.gap.value(profile.w_nm[i]);
    rep.ratio[i] = std::abs(dn_dy) / (k0 * g * g);
    if (rep.ratio[i] > rep.max_ratio) {
      rep.max_ratio = rep.ratio[i];
      rep.argmax_y_um = profile.y_um[i];
    }
  }
  return rep;
}

namespace {

struct Section {
  std::vector<GuidedMode> modes;
  std::vector<double> fiber_ov;  // squared overlap vs bare-fiber fundamental
};

double interp_width(const TaperProfile& p, double y_um) {
  const auto& y = p.y_um;
  if (y_um <= y.front()) return p.w_nm.front();
  if (y_um >= y.back()) return p.w_nm.back();
  const size_t i =
      std::upper_bound(y.begin(), y.end(), y_um) - y.begin() - 1;
  const double t = (y_um - y[i]) / (y[i + 1] - y[i]);
  return p.w_nm[i] + t * (p.w_nm[i + 1] - p.w_nm[i]);
}

}  // namespace

EmeRecord propagate_eme(const TaperProfile& profile,
                        const CouplerGeometry& base, const MaterialSet& mat,
                        const EmeOptions& opts) {
  profile.validate();
  if (opts.n_sections < 1) fail("propagate_eme: n_sections < 1");
  if (opts.n_modes < 2) fail("propagate_eme: n_modes < 2");
  const double L_um = profile.length_um();
  const int S = L_um > 0.0 ? opts.n_sections : 1;
  const double dz_nm = L_um * 1000.0 / S;
  const bool half = !opts.full_domain && base.fiber_offset_nm == 0.0;
  const double lambda = base.wavelength_nm;

  SolveOptions sopt;
  sopt.n_modes = opts.n_modes;

  auto build = [&](GuideSelection which, double w) {
    CouplerGeometry g = base;
    g.wg_width_nm = w;
    return build_cross_section(g, mat, which, opts.resolution_nm,
                               opts.padding_nm, half);
  };

  // references: bare-fiber fundamental (width-independent grid as long as
  // w <= d) and the bare-waveguide fundamental at the first section's width
  SolveOptions ref_opt;
  ref_opt.n_modes = 1;
  const double w_first = interp_width(profile, (0.5) * L_um / S);
  GuidedMode fiber_ref =
      solve_modes(build(GuideSelection::fiber_only, w_first), ref_opt)[0];
  GuidedMode wg_ref =
      solve_modes(build(GuideSelection::waveguide_only, w_first), ref_opt)[0];

  // identical widths resolve to one eigensolve (uniform profiles, flat tails)
  std::map<long long, Section> cache;
  auto section_at = [&](double w) -> Section {
    const long long key = llround(w * 1e6);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Section sec;
    sec.modes = solve_modes(build(GuideSelection::coupled, w), sopt);
    for (auto& m : sec.modes)
      sec.fiber_ov.push_back(mode_overlap(fiber_ref, m));
    if (cache.size() < 4) cache[key] = sec;  // uniform-profile fast path only
    return sec;
  };

  EmeRecord rec;
  Section cur = section_at(interp_width(profile, (0.5) * L_um / S));

  // launch amplitudes on the first section's basis
  std::vector<std::complex<double>> a(cur.modes.size(), 0.0);
  switch (opts.launch) {
    case EmeLaunch::fundamental:
      a[0] = 1.0;
      break;
    case EmeLaunch::wg_like: {
      size_t best = 0;
      double bo = -1.0;
      for (size_t m = 0; m < cur.modes.size(); ++m) {
        const double o = mode_overlap(wg_ref, cur.modes[m]);
        if (o > bo) {
          bo = o;
          best = m;
        }
      }
      a[best] = 1.0;
      break;
    }
    case EmeLaunch::custom:
      if (opts.launch_coeffs.size() != cur.modes.size())
        fail("propagate_eme: launch_coeffs size does not match the " +
             std::to_string(cur.modes.size()) + " modes of the first section");
      a = opts.launch_coeffs;
      break;
  }
  double launch_power = 0.0;
  for (auto& c : a) launch_power += std::norm(c);
  rec.launch_power = launch_power;

  auto record_section = [&](int s, const Section& sec,
                            const std::vector<std::complex<double>>& amps) {
    rec.y_mid_um.push_back((s + 0.5) * L_um / S);
    std::vector<double> ne;
    for (const auto& m : sec.modes) ne.push_back(m.n_eff);
    rec.neff.push_back(std::move(ne));
    double ptot = 0.0;
    for (const auto& c : amps) ptot += std::norm(c);
    rec.power_total.push_back(ptot);
    rec.max_power_creation =
        std::max(rec.max_power_creation, ptot - rec.launch_power);
    // fiber-like modal power: best bare-fiber overlap wins
    size_t fi = 0;
    for (size_t m = 1; m < sec.fiber_ov.size(); ++m)
      if (sec.fiber_ov[m] > sec.fiber_ov[fi]) fi = m;
    rec.power_fiber_like.push_back(fi < amps.size() ? std::norm(amps[fi]) : 0.0);
    // projection of the travelling field onto the frozen bare-WG reference
    std::complex<double> wg_amp = 0.0;
    for (size_t m = 0; m < amps.size(); ++m)
      wg_amp += overlap_coefficient(wg_ref, sec.modes[m]) * amps[m];
    rec.power_wg_like.push_back(std::norm(wg_amp));
  };

  record_section(0, cur, a);

  for (int s = 0; s < S; ++s) {
    // phase across section s
    for (size_t m = 0; m < a.size(); ++m)
      a[m] *= std::exp(std::complex<double>(
          0.0, kTwoPi * cur.modes[m].n_eff * dz_nm / lambda));
    if (s + 1 == S) break;
    // project onto the next section's basis
    Section nxt = section_at(interp_width(profile, (s + 1.5) * L_um / S));
    std::vector<std::complex<double>> b(nxt.modes.size(), 0.0);
    for (size_t j = 0; j < nxt.modes.size(); ++j)
      for (size_t m = 0; m < a.size(); ++m)
        b[j] += overlap_coefficient(nxt.modes[j], cur.modes[m]) * a[m];
    cur = std::move(nxt);
    a = std::move(b);
    record_section(s + 1, cur, a);
  }

  // final-section identification against the bare-fiber fundamental
  rec.final_amps = a;
  rec.final_fiber_overlap = cur.fiber_ov;
  size_t fi = 0;
  for (size_t m = 1; m < cur.fiber_ov.size(); ++m)
    if (cur.fiber_ov[m] > cur.fiber_ov[fi]) fi = m;
  if (cur.fiber_ov.empty() || cur.fiber_ov[fi] <= 0.5)
    fail("propagate_eme: no final-section mode with bare-fiber overlap > 0.5 "
         "(mode identification failed)");
  rec.t_fiber = fi < a.size() ? std::norm(a[fi]) : 0.0;
  return rec;
}

std::vector<std::pair<double, double>> sweep_wavelength(
    const TaperProfile& profile, const CouplerGeometry& base,
    const MaterialSet& mat, const std::vector<double>& lambdas_nm,
    const EmeOptions& opts) {
  if (lambdas_nm.empty()) fail("sweep_wavelength: empty wavelength list");
  std::vector<std::pair<double, double>> out(lambdas_nm.size());
  parallel_for(opts.exec, int(lambdas_nm.size()), [&](int i) {
    CouplerGeometry g = base;
    g.wavelength_nm = lambdas_nm[i];
    EmeOptions o = opts;
    o.exec = Exec::serial;  // no nested parallelism
    out[i] = {lambdas_nm[i], propagate_eme(profile, g, mat, o).t_fiber};
  });
  return out;
}

}  // namespace evc
