#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "evcoupler/budget.hpp"
#include "evcoupler/config.hpp"
#include "evcoupler/csv.hpp"
#include "evcoupler/fitting.hpp"
#include "evcoupler/geometry.hpp"
#include "evcoupler/modesolver.hpp"
#include "evcoupler/parallel.hpp"
#include "evcoupler/svgplot.hpp"
#include "evcoupler/taper.hpp"

namespace {

using evc::format_double;

std::string g_out_dir = ".";

std::string out_path(const std::string& name) {
  std::filesystem::create_directories(g_out_dir);
  return (std::filesystem::path(g_out_dir) / name).string();
}

void write_csv_file(const std::string& name,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) s += ',';
    s += header[i];
  }
  s += '\n';
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) {
      if (i) s += ',';
      s += format_double(r[i]);
    }
    s += '\n';
  }
  evc::write_file_atomic(out_path(name), s);
}

evc::GuideSelection parse_which(const std::string& s) {
  if (s == "coupled") return evc::GuideSelection::coupled;
  if (s == "waveguide") return evc::GuideSelection::waveguide_only;
  if (s == "fiber") return evc::GuideSelection::fiber_only;
  throw std::runtime_error("unknown guide selection '" + s +
                           "' (coupled|waveguide|fiber)");
}

const char* which_name(evc::GuideSelection w) {
  switch (w) {
    case evc::GuideSelection::coupled: return "coupled";
    case evc::GuideSelection::waveguide_only: return "waveguide";
    case evc::GuideSelection::fiber_only: return "fiber";
  }
  return "?";
}

// ------------------------------------------------------------------- modes

struct ModesArgs {
  double width = 0;
  std::string which = "coupled";
  bool fields = false;
  bool has_width = false;
};

int cmd_modes(const evc::RunConfig& cfg, const ModesArgs& a) {
  evc::CouplerGeometry g = cfg.geometry;
  if (a.has_width) g.wg_width_nm = a.width;
  const evc::GuideSelection which = parse_which(a.which);
  const bool half = g.fiber_offset_nm == 0.0 && !cfg.full_domain;
  auto cs = evc::build_cross_section(g, cfg.materials, which,
                                     cfg.resolution_nm, cfg.padding_nm, half,
                                     evc::Exec::par);
  evc::SolveOptions so;
  so.n_modes = cfg.n_modes;
  so.n_eff_guess = cfg.n_eff_guess;
  so.krylov = cfg.krylov;
  auto modes = evc::solve_modes(cs, so);

  std::cout << "which = " << which_name(which) << ", width = "
            << format_double(g.wg_width_nm) << " nm, resolution = "
            << format_double(cs.dx_nm) << " nm, grid = " << cs.nx << " x "
            << cs.ny << (cs.half_domain ? " (half domain)" : "") << "\n";
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < modes.size(); ++k) {
    const auto& m = modes[k];
    std::cout << "mode " << k << ": n_eff = " << format_double(m.n_eff)
              << ", te_fraction = " << format_double(m.te_fraction) << "\n";
    rows.push_back({double(k), m.n_eff, m.te_fraction, m.residual,
                    m.boundary_decay});
  }
  write_csv_file("modes.csv",
                 {"mode", "n_eff", "te_fraction", "residual", "boundary_decay"},
                 rows);

  if (a.fields) {
    for (size_t k = 0; k < modes.size(); ++k) {
      const auto& m = modes[k];
      auto dump = [&](const char* comp, const std::vector<double>& v,
                      bool half_x) {
        // half_x: sampled at (i+1/2)dx, j*dy (ex, hy); else (i+1)dx, (j+1/2)dy
        const int nxc = half_x ? m.nx : m.nx - 1;
        const int nyc = half_x ? m.ny - 1 : m.ny;
        std::vector<std::vector<double>> fr;
        fr.reserve(v.size());
        for (int i = 0; i < nxc; ++i)
          for (int j = 0; j < nyc; ++j) {
            const double x = half_x ? (i + 0.5) * m.dx_nm : (i + 1.0) * m.dx_nm;
            const double y = half_x ? (j + 1.0) * m.dy_nm : (j + 0.5) * m.dy_nm;
            fr.push_back({x, y, v[size_t(i) * nyc + j]});
          }
        write_csv_file("fields_mode" + std::to_string(k) + "_" + comp + ".csv",
                       {"x_nm", "y_nm", comp}, fr);
      };
      dump("ex", m.ex, true);
      dump("hy", m.hy, true);
      dump("ey", m.ey, false);
      dump("hx", m.hx, false);
    }
  }
  return 0;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  double w_min = 50, w_max = 350;
  int n_points = 15;
  bool all = false;
  std::string which = "coupled";
  std::string dispersion_out;
};

struct FamilyRun {
  std::vector<double> widths;
  std::vector<std::vector<evc::GuidedMode>> pts;
  std::vector<std::string> errs;  // empty string = ok
  evc::SweepResult result;        // over the successful points only
};

FamilyRun run_family(const evc::RunConfig& cfg, evc::GuideSelection which,
                     const std::vector<double>& widths) {
  FamilyRun fr;
  fr.widths = widths;
  fr.pts.resize(widths.size());
  fr.errs.resize(widths.size());
  const bool half = cfg.geometry.fiber_offset_nm == 0.0 && !cfg.full_domain;
  evc::parallel_for(evc::Exec::par, widths.size(), [&](size_t i) {
    try {
      evc::CouplerGeometry g = cfg.geometry;
      g.wg_width_nm = widths[i];
      double r = cfg.resolution_nm;
      const double feat = evc::smallest_feature_nm(g, which);
      if (feat / r < 8.0) r = feat / 8.0;
      auto cs = evc::build_cross_section(g, cfg.materials, which, r,
                                         cfg.padding_nm, half);
      evc::SolveOptions so;
      so.n_modes = cfg.n_modes;
      so.n_eff_guess = cfg.n_eff_guess;
      so.krylov = cfg.krylov;
      fr.pts[i] = evc::solve_modes(cs, so);
    } catch (const std::exception& e) {
      fr.errs[i] = e.what();
    }
  });
  std::vector<double> ok_w;
  std::vector<std::vector<evc::GuidedMode>> ok_m;
  for (size_t i = 0; i < widths.size(); ++i)
    if (fr.errs[i].empty()) {
      ok_w.push_back(widths[i]);
      ok_m.push_back(std::move(fr.pts[i]));
    }
  if (!ok_w.empty()) fr.result = evc::track_branches(ok_w, ok_m);
  fr.pts.clear();
  return fr;
}

int cmd_sweep(const evc::RunConfig& cfg, const SweepArgs& a) {
  if (a.n_points < 2) throw std::runtime_error("sweep: need n_points >= 2");
  if (!(a.w_max > a.w_min))
    throw std::runtime_error("sweep: need w_max > w_min");
  std::vector<double> widths(a.n_points);
  for (int i = 0; i < a.n_points; ++i)
    widths[i] = a.w_min + i * (a.w_max - a.w_min) / (a.n_points - 1);

  std::vector<evc::GuideSelection> families;
  if (a.all)
    families = {evc::GuideSelection::coupled,
                evc::GuideSelection::waveguide_only,
                evc::GuideSelection::fiber_only};
  else
    families = {parse_which(a.which)};

  std::vector<evc::PlotSeries> plot;
  std::vector<std::string> failures;
  std::vector<FamilyRun> runs;
  for (auto which : families) {
    FamilyRun fr = run_family(cfg, which, widths);
    std::vector<std::vector<double>> rows;
    for (const auto& b : fr.result.branches) {
      evc::PlotSeries ps;
      ps.label = std::string(which_name(which)) + ":" + std::to_string(b.id);
      for (size_t i = 0; i < b.width_nm.size(); ++i) {
        rows.push_back({b.width_nm[i], double(b.id), b.n_eff[i],
                        b.te_fraction[i]});
        ps.x.push_back(b.width_nm[i]);
        ps.y.push_back(b.n_eff[i]);
      }
      plot.push_back(std::move(ps));
    }
    write_csv_file(std::string("sweep_") + which_name(which) + ".csv",
                   {"width_nm", "branch_id", "n_eff", "te_fraction"}, rows);
    for (size_t i = 0; i < fr.errs.size(); ++i)
      if (!fr.errs[i].empty())
        failures.push_back(std::string(which_name(which)) + " at width " +
                           format_double(widths[i]) + ": " + fr.errs[i]);
    std::cout << "swept " << which_name(which) << ": "
              << fr.result.branches.size() << " branches, "
              << fr.result.ambiguities.size() << " ambiguous continuations\n";
    runs.push_back(std::move(fr));
  }

  evc::write_file_atomic(out_path("sweep_neff.svg"),
                         evc::render_svg_plot(plot, "width (nm)", "n_eff"));

  if (!a.dispersion_out.empty()) {
    if (!a.all)
      throw std::runtime_error(
          "sweep: --dispersion-out needs --all (bare-waveguide and coupled "
          "families)");
    if (!failures.empty())
      throw std::runtime_error(
          "sweep: dispersion table incomplete, " +
          std::to_string(failures.size()) + " point(s) failed; first: " +
          failures.front());
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < widths.size(); ++i) {
      // runs[0] coupled, runs[1] waveguide (family order above)
      const auto& cp = runs[0];
      const auto& wg = runs[1];
      auto top_at = [&](const evc::SweepResult& r, double w, int rank) {
        std::vector<double> vals;
        for (const auto& b : r.branches)
          for (size_t k = 0; k < b.width_nm.size(); ++k)
            if (b.width_nm[k] == w) vals.push_back(b.n_eff[k]);
        std::sort(vals.rbegin(), vals.rend());
        if (int(vals.size()) <= rank)
          throw std::runtime_error(
              "sweep: fewer than " + std::to_string(rank + 1) +
              " modes at width " + format_double(w) +
              ", cannot assemble dispersion table");
        return vals[size_t(rank)];
      };
      rows.push_back({widths[i], top_at(wg.result, widths[i], 0),
                      top_at(cp.result, widths[i], 0),
                      top_at(cp.result, widths[i], 1)});
    }
    write_csv_file(a.dispersion_out, {"width_nm", "n_wg", "n1", "n2"}, rows);
  }

  if (!failures.empty())
    throw std::runtime_error(
        "sweep incomplete (partial CSVs written): " +
        std::to_string(failures.size()) + " of " +
        std::to_string(widths.size() * families.size()) +
        " points failed; first: " + failures.front());
  return 0;
}

// ------------------------------------------------------------------- taper

evc::DispersionData read_dispersion(const std::string& path) {
  evc::Table t = evc::read_csv(path);
  evc::DispersionData d;
  d.w_nm = t.column("width_nm");
  d.n_wg = t.column("n_wg");
  d.n1 = t.column("n1");
  d.n2 = t.column("n2");
  d.validate();
  return d;
}

evc::TaperProfile read_profile(const std::string& path) {
  evc::Table t = evc::read_csv(path);
  evc::TaperProfile p;
  p.y_um = t.column("y_um");
  p.w_nm = t.column("w_nm");
  p.validate();
  return p;
}

struct TaperDesignArgs {
  std::string dispersion;
  double w_start = 0, w_tip = 0, alpha = 0, length = 0;
  bool has_w_start = false, has_w_tip = false, has_alpha = false,
       has_length = false;
  int samples = 800;
  std::string profile_out = "taper_profile.csv";
};

int cmd_taper_design(const evc::RunConfig& cfg, const TaperDesignArgs& a) {
  auto disp = read_dispersion(a.dispersion);
  const double w_start = a.has_w_start ? a.w_start : cfg.taper_w_start_nm;
  const double w_tip = a.has_w_tip ? a.w_tip : cfg.taper_w_tip_nm;
  const double lambda = cfg.geometry.wavelength_nm;
  double alpha = a.has_alpha ? a.alpha : cfg.taper_alpha;
  if (a.has_length)
    alpha = evc::alpha_for_length(disp, w_start, w_tip, a.length, lambda);
  auto prof = evc::design_taper(disp, w_start, w_tip, alpha, lambda,
                                a.samples);
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < prof.y_um.size(); ++i)
    rows.push_back({prof.y_um[i], prof.w_nm[i]});
  write_csv_file(a.profile_out, {"y_um", "w_nm"}, rows);
  std::cout << "alpha = " << format_double(alpha) << "\n"
            << "length_um = " << format_double(prof.length_um()) << "\n"
            << "profile = " << a.profile_out << " (" << prof.y_um.size()
            << " samples)\n";
  return 0;
}

struct TaperCheckArgs {
  std::string dispersion, profile;
  std::string report_out = "adiabaticity.csv";
};

int cmd_taper_check(const evc::RunConfig& cfg, const TaperCheckArgs& a) {
  auto disp = read_dispersion(a.dispersion);
  auto prof = read_profile(a.profile);
  auto rep = evc::adiabaticity_margin(prof, disp, cfg.geometry.wavelength_nm);
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < rep.y_um.size(); ++i)
    rows.push_back({rep.y_um[i], rep.ratio[i]});
  write_csv_file(a.report_out, {"y_um", "ratio"}, rows);
  std::cout << "length_um = " << format_double(prof.length_um()) << "\n"
            << "max_ratio = " << format_double(rep.max_ratio) << "\n"
            << "argmax_y_um = " << format_double(rep.argmax_y_um) << "\n";
  return 0;
}

struct TaperPropArgs {
  std::string profile;
  std::string launch = "wg";
  int sections = 0, modes = 0;
  double resolution = 0;
  std::string sections_out = "eme_sections.csv";
};

evc::EmeOptions eme_options(const evc::RunConfig& cfg, const TaperPropArgs& a) {
  evc::EmeOptions opts;
  opts.n_sections = a.sections > 0 ? a.sections : cfg.eme_sections;
  opts.n_modes = a.modes > 0 ? a.modes : cfg.eme_modes;
  opts.resolution_nm = a.resolution > 0 ? a.resolution : cfg.eme_resolution_nm;
  opts.padding_nm = cfg.padding_nm;
  opts.full_domain = cfg.full_domain;
  if (a.launch == "wg")
    opts.launch = evc::EmeLaunch::wg_like;
  else if (a.launch == "fundamental")
    opts.launch = evc::EmeLaunch::fundamental;
  else
    throw std::runtime_error("taper propagate: unknown launch '" + a.launch +
                             "' (wg|fundamental)");
  return opts;
}

int cmd_taper_propagate(const evc::RunConfig& cfg, const TaperPropArgs& a) {
  auto prof = read_profile(a.profile);
  auto rec = evc::propagate_eme(prof, cfg.geometry, cfg.materials,
                                eme_options(cfg, a));
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < rec.y_mid_um.size(); ++i)
    rows.push_back({rec.y_mid_um[i], rec.power_total[i],
                    rec.power_fiber_like[i], rec.power_wg_like[i]});
  write_csv_file(a.sections_out,
                 {"y_mid_um", "power_total", "power_fiber_like",
                  "power_wg_like"},
                 rows);
  std::cout << "t_fiber = " << format_double(rec.t_fiber) << "\n"
            << "final_power_total = "
            << format_double(rec.power_total.empty() ? 0.0
                                                     : rec.power_total.back())
            << "\n"
            << "max_power_creation = " << format_double(rec.max_power_creation)
            << "\n";
  return 0;
}

struct TaperLambdaArgs {
  std::string profile;
  std::string range;  // "900:960:5"
  std::string launch = "wg";
  int sections = 0, modes = 0;
  double resolution = 0;
  std::string csv_out = "taper_lambda.csv";
};

std::vector<double> parse_range(const std::string& s) {
  double a = 0, b = 0, step = 0;
  if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 ||
      !(step > 0) || b < a)
    throw std::runtime_error("bad wavelength range '" + s +
                             "', expected min:max:step with step > 0");
  std::vector<double> v;
  for (double x = a; x <= b + 1e-9 * step; x += step) v.push_back(x);
  return v;
}

int cmd_taper_lambda(const evc::RunConfig& cfg, const TaperLambdaArgs& a) {
  auto prof = read_profile(a.profile);
  TaperPropArgs pa;
  pa.launch = a.launch;
  pa.sections = a.sections;
  pa.modes = a.modes;
  pa.resolution = a.resolution;
  evc::EmeOptions opts = eme_options(cfg, pa);
  opts.exec = evc::Exec::par;
  auto lambdas = parse_range(a.range);
  auto tf = evc::sweep_wavelength(prof, cfg.geometry, cfg.materials, lambdas,
                                  opts);
  std::vector<std::vector<double>> rows;
  for (auto& [lam, t] : tf) {
    rows.push_back({lam, t});
    std::cout << format_double(lam) << " nm: T_fiber = " << format_double(t)
              << "\n";
  }
  write_csv_file(a.csv_out, {"lambda_nm", "t_fiber"}, rows);
  return 0;
}

// --------------------------------------------------------------------- fit

int cmd_fit_g2(const std::string& input, double rep_period_ns) {
  evc::Table t = evc::read_csv(input);
  evc::G2Histogram h;
  h.tau_ns = t.column("tau_ns");
  h.counts = t.column("counts");
  h.rep_period_ns = rep_period_ns;
  auto r = evc::fit_g2(h);
  std::cout << "g2_zero = " << format_double(r.g2_zero) << " +- "
            << format_double(r.g2_zero_ci95) << " (95 %)\n"
            << "g2_zero_area = "
            << (std::isfinite(r.g2_zero_area)
                    ? format_double(r.g2_zero_area)
                    : std::string("unavailable (span too short)"))
            << "\n"
            << "blinking_amplitude = " << format_double(r.blinking_amplitude)
            << " +- " << format_double(r.blinking_sigma) << "\n"
            << "preparation_efficiency = "
            << format_double(r.preparation_efficiency) << " +- "
            << format_double(r.preparation_sigma) << "\n"
            << "tau_peak_ns = " << format_double(r.params.tau_peak_ns) << "\n"
            << "tau_blink_ns = " << format_double(r.params.tau_blink_ns) << "\n"
            << "background = " << format_double(r.params.background) << "\n";
  write_csv_file(
      "fit_g2.csv",
      {"g2_zero", "g2_zero_ci95", "g2_zero_area", "blinking_amplitude",
       "blinking_sigma", "preparation_efficiency", "preparation_sigma",
       "tau_peak_ns", "tau_blink_ns", "a_peak", "background"},
      {{r.g2_zero, r.g2_zero_ci95, r.g2_zero_area, r.blinking_amplitude,
        r.blinking_sigma, r.preparation_efficiency, r.preparation_sigma,
        r.params.tau_peak_ns, r.params.tau_blink_ns, r.params.a_peak,
        r.params.background}});
  return 0;
}

int cmd_fit_saturation(const std::string& input) {
  evc::Table t = evc::read_csv(input);
  auto r = evc::fit_saturation(t.column("power"), t.column("counts"));
  std::cout << "i_max = " << format_double(r.i_max) << " +- "
            << format_double(r.i_max_sigma) << "\n"
            << "p_sat = " << format_double(r.p_sat) << " +- "
            << format_double(r.p_sat_sigma) << "\n";
  write_csv_file("fit_saturation.csv",
                 {"i_max", "i_max_sigma", "p_sat", "p_sat_sigma"},
                 {{r.i_max, r.i_max_sigma, r.p_sat, r.p_sat_sigma}});
  return 0;
}

int cmd_fit_decay(const std::string& input) {
  evc::Table t = evc::read_csv(input);
  auto r = evc::fit_decay(t.column("t_ns"), t.column("counts"));
  std::cout << "rate_per_ns = " << format_double(r.rate_per_ns) << " +- "
            << format_double(r.rate_sigma) << "\n"
            << "lifetime_ns = " << format_double(1.0 / r.rate_per_ns) << "\n"
            << "amplitude = " << format_double(r.amplitude) << "\n"
            << "background = " << format_double(r.background) << "\n";
  write_csv_file("fit_decay.csv",
                 {"rate_per_ns", "rate_sigma", "lifetime_ns", "amplitude",
                  "background"},
                 {{r.rate_per_ns, r.rate_sigma, 1.0 / r.rate_per_ns,
                   r.amplitude, r.background}});
  return 0;
}

// ------------------------------------------------------------------ budget

int cmd_budget(const evc::RunConfig& cfg, bool expected) {
  using evc::Measured;
  auto get = [&](const char* key) -> std::optional<evc::ConfigValue> {
    auto it = cfg.budget_scalars.find(key);
    if (it == cfg.budget_scalars.end()) return std::nullopt;
    return it->second;
  };
  auto as_measured = [](const evc::ConfigValue& v, const std::string& label) {
    return Measured{v.value, v.sigma, label};
  };

  std::string rep;
  std::string csv = "name,value,sigma\n";
  auto csv_row = [&](const std::string& name, double v, double s) {
    csv += name + "," + format_double(v) + "," + format_double(s) + "\n";
  };
  auto pct_line = [&](const std::string& name, double v, double s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "  %-26s %7.2f %%  +- %.2f %%\n",
                  name.c_str(), 100.0 * v, 100.0 * s);
    rep += buf;
    csv_row(name, v, s);
  };
  auto mhz_line = [&](const std::string& name, double v, double s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "  %-26s %7.2f MHz +- %.2f MHz\n",
                  name.c_str(), v, s);
    rep += buf;
    csv_row(name, v, s);
  };

  rep += "single-photon efficiency budget\n";
  rep += "===============================\n";

  std::optional<evc::EfficiencyChain> off, on;
  if (!cfg.stages_offchip.empty()) {
    std::vector<Measured> st;
    for (const auto& s : cfg.stages_offchip)
      st.push_back(as_measured(s.v, s.name));
    off = evc::chain_product(st);
    rep += "\noff-chip detection chain\n";
    for (const auto& s : off->stages) pct_line(s.label, s.value, s.sigma);
    pct_line("offchip_product", off->product.value, off->product.sigma);
  }
  if (!cfg.stages_onchip.empty()) {
    std::vector<Measured> st;
    for (const auto& s : cfg.stages_onchip)
      st.push_back(as_measured(s.v, s.name));
    on = evc::chain_product(st);
    rep += "\non-chip generation chain\n";
    for (const auto& s : on->stages) pct_line(s.label, s.value, s.sigma);
    pct_line("onchip_product", on->product.value, on->product.sigma);
  }

  const auto rep_rate = get("rep_rate_mhz");
  const auto snspd = get("snspd_rate_mhz");
  const auto g2z = get("g2_zero");
  const auto sp_rate = get("single_photon_rate_mhz");
  bool rates_open = false;
  auto rates_header = [&] {
    if (!rates_open) rep += "\nsource rates\n";
    rates_open = true;
  };

  if (const auto two_way = get("fiber_two_way")) {
    rep += "\nfiber calibration\n";
    pct_line("fiber_two_way", two_way->value, two_way->sigma);
    auto ow = evc::one_way_fiber(as_measured(*two_way, "fiber_two_way"));
    pct_line("fiber_one_way", ow.value, ow.sigma);
  }
  {
    const auto pr = get("p_reflected");
    const auto pi = get("p_incident");
    const auto fbs = get("eta_fbs");
    if (pr && pi && fbs) {
      auto r = evc::extract_eta_cf(pr->value, pi->value,
                                   as_measured(*fbs, "eta_fbs"));
      rep += "\nreflection calibration\n";
      pct_line("eta_cf_extracted", r.eta_cf.value, r.eta_cf.sigma);
      if (r.unphysical) rep += "  warning: " + r.warning + "\n";
    }
  }

  if (snspd && g2z) {
    rates_header();
    mhz_line("snspd_rate", snspd->value, snspd->sigma);
    {
      char buf[128];
      std::snprintf(buf, sizeof buf, "  %-26s %7.3f +- %.3f\n", "g2_zero",
                    g2z->value, g2z->sigma);
      rep += buf;
      csv_row("g2_zero", g2z->value, g2z->sigma);
    }
    auto pure = evc::pure_single_photon_rate(as_measured(*snspd, "snspd"),
                                             as_measured(*g2z, "g2_zero"));
    mhz_line("pure_rate_from_g2", pure.value, pure.sigma);
  }

  Measured sp{};
  bool have_sp = false;
  if (sp_rate) {
    sp = as_measured(*sp_rate, "single_photon_rate");
    have_sp = true;
    rates_header();
    mhz_line("single_photon_rate", sp.value, sp.sigma);
  } else if (snspd && g2z) {
    sp = evc::pure_single_photon_rate(as_measured(*snspd, "snspd"),
                                      as_measured(*g2z, "g2_zero"));
    sp.label = "single_photon_rate";
    have_sp = true;
  }

  if (have_sp && off && rep_rate) {
    auto se = evc::source_efficiency(sp, *off, rep_rate->value);
    rates_header();
    mhz_line("photons_in_fiber", se.fiber_rate_mhz.value,
             se.fiber_rate_mhz.sigma);
    pct_line("source_efficiency", se.efficiency.value, se.efficiency.sigma);
  }

  if (expected) {
    const auto eta = get("eta_cf");
    if (!eta || !on || !off || !rep_rate)
      throw std::runtime_error(
          "budget: --expected needs eta_cf, rep_rate_mhz and both stage "
          "chains in the config");
    auto er = evc::expected_detector_rate(*on, as_measured(*eta, "eta_cf"),
                                          *off, rep_rate->value);
    rep += "\nexpected from independent calibrations\n";
    pct_line("eta_cf", eta->value, eta->sigma);
    mhz_line("expected_detector_rate", er.value, er.sigma);
  }

  {
    const auto gt = get("gamma_total_per_ns");
    const auto gr = get("gamma_ref_per_ns");
    if (gt && gr) {
      auto b = evc::beta_factor(as_measured(*gt, "gamma_total"),
                                as_measured(*gr, "gamma_ref"));
      rep += "\nemitter coupling\n";
      pct_line("beta_factor", b.value, b.sigma);
    }
  }

  if (!off && !on && !have_sp)
    throw std::runtime_error(
        "budget: config defines no stages and no rates, nothing to report");

  std::cout << rep;
  evc::write_file_atomic(out_path("budget_report.txt"), rep);
  evc::write_file_atomic(out_path("budget.csv"), csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evanescent fiber-chip coupler design and analysis"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  int threads = 0;
  app.add_option("--config", config_path, "key = value parameter file");
  app.add_option("--out", out_dir, "output directory (created if missing)");
  app.add_option("--threads", threads, "worker threads (0 = all available)");

  ModesArgs ma;
  auto* modes = app.add_subcommand("modes", "guided modes of a cross-section");
  modes->fallthrough();
  auto* mw = modes->add_option("--width", ma.width, "waveguide width in nm");
  modes->add_option("--which", ma.which, "coupled|waveguide|fiber");
  modes->add_flag("--fields", ma.fields, "also write field-component CSVs");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "dispersion vs waveguide width");
  sweep->fallthrough();
  sweep->add_option("--w-min", sa.w_min, "smallest width in nm");
  sweep->add_option("--w-max", sa.w_max, "largest width in nm");
  sweep->add_option("--n-points", sa.n_points, "sweep points");
  sweep->add_flag("--all", sa.all, "coupled, bare waveguide and bare fiber");
  sweep->add_option("--which", sa.which, "family when not --all");
  sweep->add_option("--dispersion-out", sa.dispersion_out,
                    "also write a width_nm,n_wg,n1,n2 table (needs --all)");

  auto* taper = app.add_subcommand("taper", "taper design and propagation");
  taper->require_subcommand(1);
  taper->fallthrough();

  TaperDesignArgs tda;
  auto* tdes = taper->add_subcommand("design", "integrate a width profile");
  tdes->fallthrough();
  tdes->add_option("--dispersion", tda.dispersion, "width_nm,n_wg,n1,n2 CSV")
      ->required();
  auto* ows = tdes->add_option("--w-start", tda.w_start, "start width nm");
  auto* owt = tdes->add_option("--w-tip", tda.w_tip, "tip width nm");
  auto* oal = tdes->add_option("--alpha", tda.alpha, "adiabatic safety factor");
  auto* ole = tdes->add_option("--length", tda.length,
                               "target length in um (picks alpha)");
  tdes->add_option("--samples", tda.samples, "integration samples");
  tdes->add_option("--profile-out", tda.profile_out, "profile CSV name");

  TaperCheckArgs tca;
  auto* tchk = taper->add_subcommand("check", "adiabaticity of a profile");
  tchk->fallthrough();
  tchk->add_option("--dispersion", tca.dispersion, "width_nm,n_wg,n1,n2 CSV")
      ->required();
  tchk->add_option("--profile", tca.profile, "y_um,w_nm CSV")->required();
  tchk->add_option("--report-out", tca.report_out, "ratio CSV name");

  TaperPropArgs tpa;
  auto* tpro = taper->add_subcommand("propagate",
                                     "eigenmode-expansion transfer");
  tpro->fallthrough();
  tpro->add_option("--profile", tpa.profile, "y_um,w_nm CSV")->required();
  tpro->add_option("--launch", tpa.launch, "wg|fundamental");
  tpro->add_option("--sections", tpa.sections, "propagation sections");
  tpro->add_option("--modes", tpa.modes, "modes per section");
  tpro->add_option("--resolution", tpa.resolution, "solver resolution nm");
  tpro->add_option("--sections-out", tpa.sections_out, "per-section CSV name");

  TaperLambdaArgs tla;
  auto* tlam = taper->add_subcommand("sweep-lambda",
                                     "fiber transfer vs wavelength");
  tlam->fallthrough();
  tlam->add_option("--profile", tla.profile, "y_um,w_nm CSV")->required();
  tlam->add_option("range", tla.range, "min:max:step in nm")->required();
  tlam->add_option("--launch", tla.launch, "wg|fundamental");
  tlam->add_option("--sections", tla.sections, "propagation sections");
  tlam->add_option("--modes", tla.modes, "modes per section");
  tlam->add_option("--resolution", tla.resolution, "solver resolution nm");
  tlam->add_option("--csv-out", tla.csv_out, "transfer CSV name");

  auto* fit = app.add_subcommand("fit", "least-squares data analysis");
  fit->require_subcommand(1);
  fit->fallthrough();
  std::string g2_in, sat_in, dec_in;
  double rep_period = 1000.0 / 76.0;
  auto* fg2 = fit->add_subcommand("g2", "pulsed autocorrelation histogram");
  fg2->fallthrough();
  fg2->add_option("input", g2_in, "tau_ns,counts CSV")->required();
  fg2->add_option("--rep-period-ns", rep_period, "pulse period in ns");
  auto* fsat = fit->add_subcommand("saturation", "count rate vs pump power");
  fsat->fallthrough();
  fsat->add_option("input", sat_in, "power,counts CSV")->required();
  auto* fdec = fit->add_subcommand("decay", "exponential lifetime trace");
  fdec->fallthrough();
  fdec->add_option("input", dec_in, "t_ns,counts CSV")->required();

  bool expected = false;
  auto* budget = app.add_subcommand("budget", "efficiency budget report");
  budget->fallthrough();
  budget->add_flag("--expected", expected,
                   "also compute the calibration-predicted detector rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    evc::RunConfig cfg;
    if (!config_path.empty()) cfg = evc::load_config(config_path);
    g_out_dir = out_dir;
    if (threads > 0) evc::set_threads(threads);

    ma.has_width = mw->count() > 0;
    tda.has_w_start = ows->count() > 0;
    tda.has_w_tip = owt->count() > 0;
    tda.has_alpha = oal->count() > 0;
    tda.has_length = ole->count() > 0;

    if (app.got_subcommand(modes)) return cmd_modes(cfg, ma);
    if (app.got_subcommand(sweep)) return cmd_sweep(cfg, sa);
    if (app.got_subcommand(taper)) {
      if (taper->got_subcommand(tdes)) return cmd_taper_design(cfg, tda);
      if (taper->got_subcommand(tchk)) return cmd_taper_check(cfg, tca);
      if (taper->got_subcommand(tpro)) return cmd_taper_propagate(cfg, tpa);
      if (taper->got_subcommand(tlam)) return cmd_taper_lambda(cfg, tla);
    }
    if (app.got_subcommand(fit)) {
      if (fit->got_subcommand(fg2)) return cmd_fit_g2(g2_in, rep_period);
      if (fit->got_subcommand(fsat)) return cmd_fit_saturation(sat_in);
      if (fit->got_subcommand(fdec)) return cmd_fit_decay(dec_in);
    }
    if (app.got_subcommand(budget)) return cmd_budget(cfg, expected);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
