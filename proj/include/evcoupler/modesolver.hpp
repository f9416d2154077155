#pragma once
#include <string>
#include <vector>

#include "evcoupler/geometry.hpp"

namespace evc {

// One guided eigenmode of a cross-section at fixed wavelength.
//
// Fields live on staggered grids inside the PEC-walled window of the source
// cross-section (nx x ny cells, spacing dx x dy). Along each axis there are
// two 1D sample sets: n "half" points at (i+1/2)*d and n-1 interior vertex
// points at i*d (the wall vertices are dropped; tangential E and normal H
// vanish there, which is what truncates the operator). Components combine
// them as
//   Hx, Ey : (nx-1) x ny   -- vertex in x, half in y
//   Hy, Ex : nx x (ny-1)   -- half in x, vertex in y
// stored x-major. Ex/Hy and Ey/Hx are co-located, so the propagating power
//   P = 1/2 * sum(Ex*Hy - Ey*Hx) * dx * dy
// needs no interpolation. E is in units where the wave impedance of the
// background is absorbed into H; only products and ratios of the stored
// fields are meaningful.
struct GuidedMode {
  double n_eff = 0.0;
  double wavelength_nm = 0.0;
  int nx = 0, ny = 0;
  double dx_nm = 0.0, dy_nm = 0.0;
  bool half_domain = false;
  std::vector<double> hx, hy, ex, ey;

  double te_fraction = 0.0;   // sum Ex^2 / (sum Ex^2 + sum Ey^2)
  double residual = 0.0;      // ||A v - lambda v|| / |lambda|, v unit
  double boundary_decay = 0.0;  // max |field| on outermost cells / overall max
  bool boundary_converged = false;  // boundary_decay < 1e-3

  double power() const;
};

struct SolveOptions {
  int n_modes = 2;
  // Effective-index shift for the shift-invert solve. 0 picks a default by
  // guide selection (waveguide 3.0, fiber 1.3, coupled 2.0).
  double n_eff_guess = 0.0;
  int krylov = 0;             // Arnoldi subspace size; 0 = auto from n_modes
  double residual_tol = 1e-8;
};

// Computes the n_modes guided modes of highest effective index (n_bg < n_eff
// <= max material index). Returns fewer if the cross-section guides fewer;
// throws if it guides none, or if the eigensolve fails to converge.
// Deterministic: fixed-seed start vector, no time-dependent state.
// Returned modes are power-normalized (power() == +1) and sorted by
// descending n_eff.
std::vector<GuidedMode> solve_modes(const CrossSection& cs,
                                    const SolveOptions& opts = {});

// Rescales fields so power() == +1. Throws on zero/non-finite power.
void normalize(GuidedMode& m);

// Power-coupling fraction |S_ab|^2 / (S_aa * S_bb) built from the cross power
//   S_ab = 1/2 * sum(Ex_a*Hy_b - Ey_a*Hx_b + Ex_b*Hy_a - Ey_b*Hx_a) * dx*dy.
// Both modes must share one grid (same nx, ny, spacing, half_domain flag).
// In [0, 1]; 0 for distinct modes of one cross-section (discrete exactness).
double mode_overlap(const GuidedMode& a, const GuidedMode& b);

// Signed normalized cross power S_ab / sqrt(S_aa * S_bb); the EME projection
// coefficient. mode_overlap is its square.
double overlap_coefficient(const GuidedMode& a, const GuidedMode& b);

// One dispersion branch traced through a width sweep: a maximal run of
// consecutive sweep points whose modes connect by field continuity.
struct DispersionBranch {
  int id = 0;
  std::vector<double> width_nm;
  std::vector<double> n_eff;
  std::vector<double> te_fraction;
};

// Tracking decisions too close to call (two candidate continuations whose
// overlaps differ by < 0.01). The winner is the one closer in n_eff.
struct TrackAmbiguity {
  double width_nm = 0.0;
  int branch_id = 0;
  std::string note;
};

struct SweepResult {
  std::vector<DispersionBranch> branches;
  std::vector<TrackAmbiguity> ambiguities;
  std::vector<double> resolution_nm;  // per sweep point, after clamping
};

// Connects per-point mode lists into branches by greedy best-overlap matching
// between consecutive points. A pairing with overlap < 0.5 ends the branch
// and opens a new one. When two points were solved on different grids
// (per-point resolution clamping), matching falls back to nearest n_eff.
// widths.size() must equal modes.size().
SweepResult track_branches(const std::vector<double>& widths,
                           const std::vector<std::vector<GuidedMode>>& modes);

// Solves every width in `widths_nm` (geometry `base` with the width replaced)
// and traces branches. The per-point resolution is clamped down where the
// requested one would violate the 8-cells-per-feature guard. Symmetric
// cross-sections solve on the half domain unless full_domain is set.
SweepResult sweep_width(const CouplerGeometry& base, const MaterialSet& m,
                        GuideSelection which,
                        const std::vector<double>& widths_nm,
                        double resolution_nm, const SolveOptions& opts = {},
                        bool full_domain = false, Exec exec = Exec::serial);

}  // namespace evc
