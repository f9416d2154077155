#pragma once
#include <string>
#include <vector>

#include "evcoupler/parallel.hpp"

namespace evc {

// Refractive indices of the three materials in a coupler cross-section.
struct MaterialSet {
  double n_wg = 3.46;     // waveguide core (GaAs at 940 nm)
  double n_fiber = 1.45;  // silica fiber taper
  double n_bg = 1.0;      // background (vacuum)
  void validate() const;
};

// Cross-section geometry of the evanescent coupler. All lengths in nm.
// The waveguide is a w x t rectangle sitting at the bottom of the simulated
// window; the fiber is a disk of diameter d whose surface touches the top of
// the waveguide when gap = 0. x is the lateral (width) axis, y is vertical.
struct CouplerGeometry {
  double wg_width_nm = 300.0;
  double wg_thickness_nm = 160.0;
  double fiber_diameter_nm = 1000.0;
  double gap_nm = 0.0;            // surface-to-surface fiber/waveguide spacing
  double fiber_offset_nm = 0.0;   // lateral fiber displacement off the waveguide axis
  double wavelength_nm = 940.0;
  void validate() const;  // throws std::runtime_error on non-physical values
};

enum class GuideSelection { waveguide_only, fiber_only, coupled };

// Rasterized permittivity map. Cells are dx x dy rectangles, x-major storage
// (ix*ny + iy). The simulated window is surrounded by perfect electric
// conductor walls; `padding_nm` of background separates every dielectric
// surface from the walls.
//
// When `half_domain` is true the map covers x in [center, center + W/2] of the
// mirror-symmetric full window and the x=0 edge of the map is the symmetry
// plane. Solving with a PEC wall there selects the mode family whose Ex is
// even across the plane (the TE-like branches); odd-Ex families need the full
// window. Requires fiber_offset = 0.
struct CrossSection {
  CouplerGeometry geometry;
  MaterialSet materials;
  GuideSelection which = GuideSelection::coupled;
  int nx = 0, ny = 0;
  double dx_nm = 0.0, dy_nm = 0.0;
  double padding_nm = 1000.0;
  bool half_domain = false;
  std::vector<double> eps;  // relative permittivity n^2 per cell, size nx*ny

  double eps_at(int ix, int iy) const { return eps[size_t(ix) * ny + iy]; }
  double domain_width_nm() const { return nx * dx_nm; }
  double domain_height_nm() const { return ny * dy_nm; }
  // Integral of (n^2 - n_bg^2) over the window; grid-refinement invariant of
  // the area-weighted smoothing.
  double dielectric_area() const;
};

// Smallest feature size (nm) that the resolution guard measures against for a
// given guide selection: min of waveguide width/thickness and fiber diameter,
// restricted to the guides present.
double smallest_feature_nm(const CouplerGeometry& g, GuideSelection which);

// Rasterizes the cross-section at the given cell size. Boundary cells get
// area-weighted n^2 (16x16 subsampling), so the map converges smoothly under
// refinement. Throws if the resolution leaves fewer than 8 cells across the
// smallest selected feature, if resolution > 20 nm, or if half_domain is
// requested for an off-axis fiber.
CrossSection build_cross_section(const CouplerGeometry& g, const MaterialSet& m,
                                 GuideSelection which, double resolution_nm,
                                 double padding_nm = 1000.0,
                                 bool half_domain = false,
                                 Exec exec = Exec::serial);

}  // namespace evc
