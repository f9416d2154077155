#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "evcoupler/taper.hpp"

using namespace evc;
using doctest::Contains;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Coupled/bare dispersion solved once at 20 nm cells on the half domain and
// frozen here, so the design tests run on real curves without paying for a
// sweep. Columns: width, bare-waveguide n_eff, upper and lower supermode.
DispersionData frozen_dispersion() {
  DispersionData d;
  const double rows[][4] = {
      {120, 1.005772201, 1.328715237, 1.184639982},
      {140, 1.051315732, 1.336847735, 1.212992792},
      {160, 1.220622401, 1.397073925, 1.283308118},
      {180, 1.573885203, 1.661165988, 1.310257338},
      {200, 1.836297320, 1.887739979, 1.315090431},
      {220, 2.059489807, 2.093765948, 1.317500144},
      {240, 2.204759919, 2.230553538, 1.319120893},
      {260, 2.325422672, 2.346511769, 1.320522161},
      {280, 2.410928563, 2.429014420, 1.322188614},
      {300, 2.483742259, 2.499973243, 1.324427526},
      {320, 2.538447603, 2.553301906, 1.328891928},
  };
  for (const auto& r : rows) {
    d.w_nm.push_back(r[0]);
    d.n_wg.push_back(r[1]);
    d.n1.push_back(r[2]);
    d.n2.push_back(r[3]);
  }
  return d;
}

// Constant-gap, constant-slope table: the design integral has a closed form
// on it, L = a * (w_start - w_tip) / (alpha * k0 * gap^2).
DispersionData linear_dispersion(double a, double gap) {
  DispersionData d;
  for (int w = 140; w <= 300; w += 20) {
    d.w_nm.push_back(w);
    d.n_wg.push_back(1.0 + a * w);
    d.n1.push_back(2.0 + gap);
    d.n2.push_back(2.0);
  }
  return d;
}

TaperProfile dense_linear_profile(double length_um, double w0, double w1,
                                  int n) {
  TaperProfile p;
  for (int i = 0; i < n; ++i) {
    const double t = double(i) / (n - 1);
    p.y_um.push_back(t * length_um);
    p.w_nm.push_back(w0 + t * (w1 - w0));
  }
  return p;
}

TaperProfile uniform_profile(double length_um, double w_nm) {
  return {{0.0, length_um}, {w_nm, w_nm}};
}

TaperProfile point_profile(double w_nm) { return {{0.0}, {w_nm}}; }

}  // namespace

TEST_CASE("taper profile and dispersion table validation") {
  CHECK_THROWS_WITH_AS(TaperProfile({0.0, 1.0}, {200.0}).validate(),
                       Contains("length mismatch"), std::runtime_error);
  CHECK_THROWS_WITH_AS(TaperProfile{}.validate(), Contains("empty"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(TaperProfile({0.0, 1.0, 1.0}, {300, 250, 200}).validate(),
                       Contains("y not increasing"), std::runtime_error);
  CHECK_THROWS_WITH_AS(TaperProfile({0.0, 1.0, 2.0}, {300, 250, 260}).validate(),
                       Contains("width increases"), std::runtime_error);
  CHECK_NOTHROW(TaperProfile({0.0, 1.0, 2.0}, {300, 250, 250}).validate());
  CHECK(point_profile(200).length_um() == 0.0);

  DispersionData one;
  one.w_nm = {100};
  one.n_wg = {1.0};
  one.n1 = {2.0};
  one.n2 = {1.5};
  CHECK_THROWS_WITH_AS(one.validate(), Contains(">= 2 width points"),
                       std::runtime_error);

  DispersionData bad = linear_dispersion(0.004, 0.12);
  bad.n_wg.pop_back();
  CHECK_THROWS_WITH_AS(bad.validate(), Contains("column length mismatch"),
                       std::runtime_error);

  DispersionData dup = linear_dispersion(0.004, 0.12);
  dup.w_nm[3] = dup.w_nm[2];
  CHECK_THROWS_WITH_AS(dup.validate(), Contains("widths not ascending"),
                       std::runtime_error);

  DispersionData crossed = linear_dispersion(0.004, 0.12);
  crossed.n2[4] = crossed.n1[4] + 0.01;
  CHECK_THROWS_WITH_AS(crossed.validate(), Contains("n1 < n2"),
                       std::runtime_error);

  const DispersionData ok = linear_dispersion(0.004, 0.12);
  CHECK(ok.gap(0) == doctest::Approx(0.12).epsilon(1e-15));
}

TEST_CASE("linear dispersion reduces the taper design to its closed form") {
  const double a = 0.004, gap = 0.12, alpha = 0.1, lambda = 940.0;
  const DispersionData disp = linear_dispersion(a, gap);
  const TaperProfile p = design_taper(disp, 300.0, 140.0, alpha, lambda);

  const double k0 = 2.0 * kPi / lambda;  // 1/nm
  const double L_um = a * (300.0 - 140.0) / (alpha * k0 * gap * gap) / 1000.0;
  // constant integrand, so the trapezoid rule is exact
  CHECK(p.length_um() == doctest::Approx(L_um).epsilon(1e-12));

  CHECK(p.w_nm.front() == 300.0);
  CHECK(p.w_nm.back() == 140.0);
  CHECK(p.y_um.front() == 0.0);

  // constant |dn/dy| makes the width profile linear in y: uniform spacing
  const size_t n = p.y_um.size();
  const double d0 = p.y_um[1] - p.y_um[0];
  for (size_t i = 2; i < n; ++i)
    CHECK(p.y_um[i] - p.y_um[i - 1] == doctest::Approx(d0).epsilon(1e-9));

  // the design saturates the ratio at alpha along the whole profile
  const AdiabaticityReport rep = adiabaticity_margin(p, disp, lambda);
  CHECK(rep.max_ratio == doctest::Approx(alpha).epsilon(1e-3));
  for (double r : rep.ratio) CHECK(r == doctest::Approx(alpha).epsilon(1e-2));

  // halving the safety factor doubles the length, exactly
  const TaperProfile p2 = design_taper(disp, 300.0, 140.0, 2.0 * alpha, lambda);
  CHECK(p2.length_um() == doctest::Approx(0.5 * p.length_um()).epsilon(1e-12));
}

TEST_CASE("safety factor for a target length round trips through the design") {
  const DispersionData disp = frozen_dispersion();

  const TaperProfile ref = design_taper(disp, 300.0, 140.0, 0.1, 940.0);
  CHECK(ref.length_um() == doctest::Approx(37.63497379).epsilon(1e-8));

  const double alpha = alpha_for_length(disp, 300.0, 140.0, 30.0, 940.0);
  // L scales as 1/alpha
  CHECK(alpha == doctest::Approx(0.1 * ref.length_um() / 30.0).epsilon(1e-9));
  const TaperProfile p = design_taper(disp, 300.0, 140.0, alpha, 940.0);
  CHECK(p.length_um() == doctest::Approx(30.0).epsilon(1e-9));

  CHECK_THROWS_WITH_AS(alpha_for_length(disp, 300.0, 140.0, -1.0, 940.0),
                       Contains("target length <= 0"), std::runtime_error);
  CHECK_THROWS_WITH_AS(alpha_for_length(disp, 300.0, 140.0, 1e-4, 940.0),
                       Contains("shorter than any alpha < 1"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(alpha_for_length(disp, 300.0, 140.0, 1e9, 940.0),
                       Contains("longer than alpha = 1e-8"),
                       std::runtime_error);
}

TEST_CASE("designed taper saturates its adiabaticity ratio everywhere") {
  const DispersionData disp = frozen_dispersion();
  const TaperProfile p = design_taper(disp, 300.0, 140.0, 0.1, 940.0);
  const AdiabaticityReport rep = adiabaticity_margin(p, disp, 940.0);

  CHECK(rep.y_um.size() == p.y_um.size());
  CHECK(rep.ratio.size() == p.y_um.size());
  CHECK(rep.max_ratio == doctest::Approx(0.1).epsilon(2e-2));
  CHECK(rep.max_ratio == doctest::Approx(0.1000419286).epsilon(1e-8));
  CHECK(rep.argmax_y_um > 0.0);
  CHECK(rep.argmax_y_um < p.length_um());
  double lo = 1e9;
  for (double r : rep.ratio) {
    CHECK(r <= rep.max_ratio);
    lo = std::min(lo, r);
  }
  // saturation: the pointwise ratio never drops far below the target either
  CHECK(lo > 0.09);
}

TEST_CASE("straight-line taper concentrates risk at the mode anticrossing") {
  const DispersionData disp = frozen_dispersion();
  const TaperProfile p = dense_linear_profile(30.0, 300.0, 140.0, 301);
  const AdiabaticityReport rep = adiabaticity_margin(p, disp, 940.0);

  // width at the worst point falls where the supermode gap pinches
  const double w_peak = 300.0 - (300.0 - 140.0) * rep.argmax_y_um / 30.0;
  CHECK(w_peak > 140.0);
  CHECK(w_peak < 200.0);
  CHECK(rep.max_ratio > rep.ratio.front());
  CHECK(rep.max_ratio > rep.ratio.back());

  CHECK_THROWS_WITH_AS(adiabaticity_margin(point_profile(200), disp, 940.0),
                       Contains("zero-length"), std::runtime_error);
  const TaperProfile off = dense_linear_profile(5.0, 400.0, 300.0, 11);
  CHECK_THROWS_WITH_AS(adiabaticity_margin(off, disp, 940.0),
                       Contains("outside dispersion coverage"),
                       std::runtime_error);
}

TEST_CASE("taper design reports the width where its assumptions break") {
  const DispersionData disp = frozen_dispersion();

  // collapse the supermode gap on a 40 nm plateau: length diverges there.
  // 801 samples step exactly 0.2 nm, so the first sample inside the plateau
  // (integrating down from 300) is 240.0 and the error names it
  DispersionData pinched = disp;
  for (size_t i = 0; i < pinched.w_nm.size(); ++i)
    if (pinched.w_nm[i] >= 200.0 && pinched.w_nm[i] <= 240.0)
      pinched.n2[i] = pinched.n1[i] - 5e-5;
  CHECK_THROWS_WITH_AS(design_taper(pinched, 300.0, 140.0, 0.1, 940.0, 801),
                       Contains("supermode gap below 1e-4"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(design_taper(pinched, 300.0, 140.0, 0.1, 940.0, 801),
                       Contains("at width 240"), std::runtime_error);

  // a fold deep enough that even the central-difference slope goes negative
  DispersionData folded = disp;
  folded.n_wg[6] = 1.80;  // at 240 nm, below the 200 nm value
  CHECK_THROWS_WITH_AS(design_taper(folded, 300.0, 140.0, 0.1, 940.0),
                       Contains("non-monotone waveguide dispersion"),
                       std::runtime_error);

  CHECK_THROWS_WITH_AS(design_taper(disp, 340.0, 140.0, 0.1, 940.0),
                       Contains("outside dispersion coverage"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(design_taper(disp, 300.0, 140.0, 0.0, 940.0),
                       Contains("alpha must be in (0,1)"), std::runtime_error);
  CHECK_THROWS_WITH_AS(design_taper(disp, 300.0, 140.0, 1.0, 940.0),
                       Contains("alpha must be in (0,1)"), std::runtime_error);
  CHECK_THROWS_WITH_AS(design_taper(disp, 140.0, 300.0, 0.1, 940.0),
                       Contains("w_tip must be < w_start"), std::runtime_error);
}

TEST_CASE("uniform coupler at the anticrossing beats power between the guides") {
  CouplerGeometry g;
  g.wg_width_nm = 160.0;
  const MaterialSet mat;
  const double lambda_um = g.wavelength_nm * 1e-3;

  // supermodes and the bare-waveguide reference on the grid the propagation
  // itself uses (same cells, same half domain)
  const CrossSection cs =
      build_cross_section(g, mat, GuideSelection::coupled, 20.0, 1000.0, true);
  SolveOptions so;
  so.n_modes = 2;
  const std::vector<GuidedMode> sm = solve_modes(cs, so);
  REQUIRE(sm.size() == 2);
  CHECK(sm[0].n_eff == doctest::Approx(1.397073925).epsilon(1e-9));
  CHECK(sm[1].n_eff == doctest::Approx(1.283308118).epsilon(1e-9));
  const double dn = sm[0].n_eff - sm[1].n_eff;

  const CrossSection wg_cs = build_cross_section(
      g, mat, GuideSelection::waveguide_only, 20.0, 1000.0, true);
  SolveOptions so1;
  so1.n_modes = 1;
  const GuidedMode wg = solve_modes(wg_cs, so1)[0];
  const double c1 = overlap_coefficient(wg, sm[0]);
  const double c2 = overlap_coefficient(wg, sm[1]);
  // the bare mode is carried by both supermodes (the split is uneven, about
  // 88/12 at this node; the beat formula below holds for any split)
  CHECK(c1 * c1 > 0.05);
  CHECK(c2 * c2 > 0.05);
  CHECK(c1 * c1 + c2 * c2 < 1.0 + 1e-9);

  const double L = 10.0;
  const int S = 80;
  EmeOptions opts;
  opts.n_sections = S;
  opts.n_modes = 2;
  opts.resolution_nm = 20.0;
  opts.launch = EmeLaunch::custom;
  const double amp = 1.0 / std::sqrt(2.0);
  opts.launch_coeffs = {amp, amp};
  const EmeRecord rec = propagate_eme(uniform_profile(L, 160.0), g, mat, opts);

  // one row per section entry; amplitudes at row r carry r * dy of phase
  REQUIRE(rec.power_wg_like.size() == size_t(S));
  CHECK(rec.launch_power == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec.y_mid_um.size() == size_t(S));
  for (size_t i = 1; i < rec.y_mid_um.size(); ++i)
    CHECK(rec.y_mid_um[i] > rec.y_mid_um[i - 1]);

  // identical cross-sections: the projection is the identity up to roundoff
  // drift of a few 1e-13 per step, in either direction
  CHECK(rec.max_power_creation <= 1e-9);
  for (double pt : rec.power_total)
    CHECK(pt == doctest::Approx(1.0).epsilon(1e-10));
  for (const auto& ns : rec.neff) {
    REQUIRE(ns.size() == 2);
    CHECK(ns[0] == doctest::Approx(sm[0].n_eff).epsilon(1e-12));
    CHECK(ns[1] == doctest::Approx(sm[1].n_eff).epsilon(1e-12));
  }

  // two-mode interference: launching c = (1,1)/sqrt(2) into supermodes that
  // carry the bare mode with weights c1, c2 makes the bare-guide power
  //   P(y) = (c1^2 + c2^2 + 2 c1 c2 cos(k0 dn y)) / 2
  const double k0 = 2.0 * kPi / lambda_um;
  const double dy = L / S;
  for (int r = 0; r < S; ++r) {
    const double y = r * dy;
    const double pred =
        0.5 * (c1 * c1 + c2 * c2 + 2.0 * c1 * c2 * std::cos(k0 * dn * y));
    CAPTURE(r);
    CHECK(std::abs(rec.power_wg_like[r] - pred) <= 0.01);
  }

  // beat minimum at half the two-mode beat length, lambda / (2 dn)
  int rmin = 1;
  for (int r = 2; r + 1 < S; ++r)
    if (rec.power_wg_like[r] < rec.power_wg_like[rmin]) rmin = r;
  const double pm = rec.power_wg_like[rmin - 1];
  const double p0 = rec.power_wg_like[rmin];
  const double pp = rec.power_wg_like[rmin + 1];
  const double shift = 0.5 * (pm - pp) / (pm - 2.0 * p0 + pp);
  const double y_min = (rmin + shift) * dy;
  CHECK(y_min == doctest::Approx(lambda_um / (2.0 * dn)).epsilon(5e-3));
}

TEST_CASE("zero-length propagation is the identity") {
  CouplerGeometry g;
  g.wg_width_nm = 300.0;
  const MaterialSet mat;
  EmeOptions opts;
  opts.n_modes = 2;
  opts.resolution_nm = 20.0;

  opts.launch = EmeLaunch::fundamental;
  const EmeRecord rec =
      propagate_eme(point_profile(300.0), g, mat, opts);
  REQUIRE(rec.final_amps.size() == 2);
  CHECK(std::abs(rec.final_amps[0] - std::complex<double>(1.0, 0.0)) <= 1e-12);
  CHECK(std::abs(rec.final_amps[1]) <= 1e-12);
  CHECK(rec.power_total.size() == 1);
  for (double pt : rec.power_total)
    CHECK(pt == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec.max_power_creation <= 1e-15);
  // at 300 nm the upper supermode is the waveguide-like one
  REQUIRE(rec.final_fiber_overlap.size() == 2);
  CHECK(rec.final_fiber_overlap[1] > rec.final_fiber_overlap[0]);
  CHECK(rec.t_fiber == doctest::Approx(0.0).epsilon(1e-12));

  // wg-like launch picks the same mode as `fundamental` away from the
  // anticrossing
  opts.launch = EmeLaunch::wg_like;
  const EmeRecord rec2 =
      propagate_eme(point_profile(300.0), g, mat, opts);
  REQUIRE(rec2.final_amps.size() == 2);
  CHECK(std::abs(rec2.final_amps[0] - rec.final_amps[0]) <= 1e-12);
  CHECK(std::abs(rec2.final_amps[1] - rec.final_amps[1]) <= 1e-12);
}

TEST_CASE("eme input validation and mode identification") {
  CouplerGeometry g;
  const MaterialSet mat;
  EmeOptions opts;
  opts.resolution_nm = 20.0;

  opts.n_sections = 0;
  CHECK_THROWS_WITH_AS(propagate_eme(uniform_profile(5.0, 200.0), g, mat, opts),
                       Contains("n_sections"), std::runtime_error);
  opts.n_sections = 60;
  opts.n_modes = 1;
  CHECK_THROWS_WITH_AS(propagate_eme(uniform_profile(5.0, 200.0), g, mat, opts),
                       Contains("n_modes"), std::runtime_error);

  opts.n_modes = 2;
  opts.launch = EmeLaunch::custom;
  opts.launch_coeffs = {1.0};
  CHECK_THROWS_WITH_AS(propagate_eme(point_profile(160.0), g, mat, opts),
                       Contains("launch_coeffs size"), std::runtime_error);

  // a wide multimode guide: the two highest modes are both core-confined, so
  // no fiber-like mode exists in the basis
  opts.launch = EmeLaunch::fundamental;
  opts.launch_coeffs.clear();
  CHECK_THROWS_WITH_AS(propagate_eme(point_profile(1000.0), g, mat, opts),
                       Contains("bare-fiber overlap"), std::runtime_error);
}

TEST_CASE("designed taper hands power to the fiber branch irreversibly") {
  const DispersionData disp = frozen_dispersion();
  const TaperProfile p = design_taper(disp, 300.0, 140.0, 0.1, 940.0);

  CouplerGeometry g;
  const MaterialSet mat;
  EmeOptions opts;
  opts.n_sections = 16;
  opts.n_modes = 2;
  opts.resolution_nm = 15.0;  // the 140 nm tip needs cells <= 17.5 nm
  opts.launch = EmeLaunch::wg_like;
  const EmeRecord rec = propagate_eme(p, g, mat, opts);

  REQUIRE(rec.power_fiber_like.size() == 16);
  CHECK(rec.t_fiber > 0.6);
  CHECK(rec.t_fiber <= 1.0 + 1e-6);
  CHECK(rec.max_power_creation <= 5e-3);
  for (double pt : rec.power_total) {
    CHECK(pt > 0.9);
    CHECK(pt < 1.0 + 5e-3);
  }

  // power starts in the waveguide branch and ends in the fiber branch
  CHECK(rec.power_fiber_like.front() < 0.1);
  CHECK(rec.power_wg_like.front() > 0.9);
  CHECK(rec.power_fiber_like.back() > 0.6);

  // adiabatic transfer does not slosh back: the fiber-branch power never
  // overshoots its final value by more than a small ripple
  double running_max = 0.0;
  for (double pf : rec.power_fiber_like) running_max = std::max(running_max, pf);
  CHECK(rec.power_fiber_like.back() >= running_max - 0.02);

  for (const auto& ns : rec.neff) {
    REQUIRE(ns.size() == 2);
    CHECK(ns[0] > ns[1]);
  }
}

TEST_CASE("wavelength sweep reproduces independent single runs") {
  CouplerGeometry g;
  const MaterialSet mat;
  const TaperProfile p = point_profile(140.0);
  EmeOptions opts;
  opts.n_modes = 2;
  opts.resolution_nm = 15.0;

  const std::vector<double> lambdas = {935.0, 945.0};
  const auto rows = sweep_wavelength(p, g, mat, lambdas, opts);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].first == 935.0);
  CHECK(rows[1].first == 945.0);

  CouplerGeometry gl = g;
  gl.wavelength_nm = 935.0;
  const EmeRecord one = propagate_eme(p, gl, mat, opts);
  CHECK(rows[0].second == doctest::Approx(one.t_fiber).epsilon(1e-15));

  EmeOptions par = opts;
  par.exec = Exec::par;
  const auto rows_par = sweep_wavelength(p, g, mat, {935.0}, par);
  REQUIRE(rows_par.size() == 1);
  CHECK(rows_par[0].second == rows[0].second);
}
