#pragma once
#include <map>
#include <string>
#include <vector>

#include "evcoupler/geometry.hpp"

namespace evc {

// A budget stage or scalar read from config: value with optional one-sigma
// uncertainty ("0.821 ± 0.018"; "+-" accepted as an ASCII spelling).
struct ConfigValue {
  double value = 0.0;
  double sigma = 0.0;
};

struct ConfigStage {
  std::string name;
  ConfigValue v;
};

// Every runtime parameter after defaulting. Unknown keys are rejected at
// parse time; flags layered on top by the CLI take precedence over the file.
struct RunConfig {
  CouplerGeometry geometry;
  MaterialSet materials;
  double resolution_nm = 10.0;
  double padding_nm = 1000.0;

  // solver
  int n_modes = 2;
  double n_eff_guess = 0.0;  // 0 = per-selection default
  int krylov = 0;
  bool full_domain = false;  // solver.symmetry = te-even (default) | full

  // taper / eigenmode expansion
  double taper_alpha = 0.1;
  double taper_w_start_nm = 300.0;
  double taper_w_tip_nm = 140.0;
  int eme_sections = 60;
  int eme_modes = 4;
  double eme_resolution_nm = 15.0;

  // budget: ordered stage lists plus named scalars
  std::vector<ConfigStage> stages_offchip, stages_onchip;
  std::map<std::string, ConfigValue> budget_scalars;

  std::string source_path;  // provenance
};

// budget scalar keys accepted in config files
extern const char* const kBudgetScalarKeys[];

// Line-oriented `key = value` parser; '#' starts a comment. Errors carry the
// file name and 1-based line number.
RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config(const std::string& path);

// Applies one `key=value` assignment (used for flag overrides); throws on
// unknown key or malformed value, naming the key.
void apply_config_key(RunConfig& cfg, const std::string& key,
                      const std::string& value, const std::string& origin);

}  // namespace evc
