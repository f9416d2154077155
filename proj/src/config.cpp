#include "evcoupler/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <stdexcept>

#include "evcoupler/csv.hpp"

namespace evc {

const char* const kBudgetScalarKeys[] = {
    "rep_rate_mhz",    "snspd_rate_mhz", "g2_zero",
    "single_photon_rate_mhz", "eta_cf",  "eta_fbs",
    "p_reflected",     "p_incident",     "gamma_total_per_ns",
    "gamma_ref_per_ns", "fiber_two_way",  nullptr};

namespace {

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& origin, const std::string& what) {
  throw std::runtime_error(origin + ": " + what);
}

double parse_number(const std::string& s, const std::string& origin,
                    const std::string& key) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    bad(origin, "key '" + key + "': not a number: '" + s + "'");
  return v;
}

// "<value>" or "<value> ± <sigma>" (also "+-")
ConfigValue parse_value_sigma(std::string s, const std::string& origin,
                              const std::string& key) {
  ConfigValue cv;
  size_t pm = s.find("\xc2\xb1");  // UTF-8 ±
  size_t pmlen = 2;
  if (pm == std::string::npos) {
    pm = s.find("+-");
    pmlen = 2;
  }
  if (pm == std::string::npos) {
    cv.value = parse_number(trim(s), origin, key);
    return cv;
  }
  cv.value = parse_number(trim(s.substr(0, pm)), origin, key);
  cv.sigma = parse_number(trim(s.substr(pm + pmlen)), origin, key);
  if (cv.sigma < 0) bad(origin, "key '" + key + "': negative sigma");
  return cv;
}

bool is_budget_scalar(const std::string& key) {
  for (int i = 0; kBudgetScalarKeys[i]; ++i)
    if (key == kBudgetScalarKeys[i]) return true;
  return false;
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key,
                      const std::string& value, const std::string& origin) {
  auto num = [&] { return parse_number(value, origin, key); };
  auto numint = [&] {
    const double v = parse_number(value, origin, key);
    if (v != double(long(v))) bad(origin, "key '" + key + "': expected integer");
    return int(v);
  };

  if (key == "wg_width_nm") cfg.geometry.wg_width_nm = num();
  else if (key == "wg_thickness_nm") cfg.geometry.wg_thickness_nm = num();
  else if (key == "fiber_diameter_nm") cfg.geometry.fiber_diameter_nm = num();
  else if (key == "gap_nm") cfg.geometry.gap_nm = num();
  else if (key == "fiber_offset_nm") cfg.geometry.fiber_offset_nm = num();
  else if (key == "wavelength_nm") cfg.geometry.wavelength_nm = num();
  else if (key == "n_wg") cfg.materials.n_wg = num();
  else if (key == "n_fiber") cfg.materials.n_fiber = num();
  else if (key == "n_bg") cfg.materials.n_bg = num();
  else if (key == "resolution_nm") cfg.resolution_nm = num();
  else if (key == "padding_nm") cfg.padding_nm = num();
  else if (key == "solver.n_modes") cfg.n_modes = numint();
  else if (key == "solver.guess") cfg.n_eff_guess = num();
  else if (key == "solver.krylov") cfg.krylov = numint();
  else if (key == "solver.symmetry") {
    if (value == "te-even") cfg.full_domain = false;
    else if (value == "full") cfg.full_domain = true;
    else bad(origin, "key 'solver.symmetry': expected te-even or full");
  } else if (key == "taper.alpha") cfg.taper_alpha = num();
  else if (key == "taper.w_start_nm") cfg.taper_w_start_nm = num();
  else if (key == "taper.w_tip_nm") cfg.taper_w_tip_nm = num();
  else if (key == "taper.sections") cfg.eme_sections = numint();
  else if (key == "taper.modes") cfg.eme_modes = numint();
  else if (key == "taper.resolution_nm") cfg.eme_resolution_nm = num();
  else if (key.rfind("stage.offchip.", 0) == 0) {
    cfg.stages_offchip.push_back(
        {key.substr(14), parse_value_sigma(value, origin, key)});
  } else if (key.rfind("stage.onchip.", 0) == 0) {
    cfg.stages_onchip.push_back(
        {key.substr(13), parse_value_sigma(value, origin, key)});
  } else if (is_budget_scalar(key)) {
    cfg.budget_scalars[key] = parse_value_sigma(value, origin, key);
  } else {
    bad(origin, "unknown key '" + key + "'");
  }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    const std::string where = origin + ": line " + std::to_string(lineno);
    if (eq == std::string::npos) bad(where, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) bad(where, "empty key");
    apply_config_key(cfg, key, value, where);
  }
  cfg.source_path = origin;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

}  // namespace evc
