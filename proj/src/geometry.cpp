#include "evcoupler/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evcoupler/parallel.hpp"

namespace evc {

namespace {

void fail(const std::string& msg) { throw std::runtime_error(msg); }

// Fraction of the cell [x0,x0+dx] x [y0,y0+dy] covered by the disk of radius
// r centred at (cx,cy). Exact for cells fully inside/outside; 16x16 midpoint
// subsampling otherwise.
double disk_cell_fraction(double x0, double y0, double dx, double dy,
                          double cx, double cy, double r) {
  const double x1 = x0 + dx, y1 = y0 + dy;
  // bounding-box reject
  if (x1 < cx - r || x0 > cx + r || y1 < cy - r || y0 > cy + r) return 0.0;
  const double r2 = r * r;
  auto inside = [&](double x, double y) {
    const double ux = x - cx, uy = y - cy;
    return ux * ux + uy * uy <= r2;
  };
  int n_in = 0;
  for (int c = 0; c < 4; ++c)
    n_in += inside(c & 1 ? x1 : x0, c & 2 ? y1 : y0);
  if (n_in == 4) {
    // corners inside and box not straddling the centre vertically/horizontally
    // beyond the radius: still need the edge check only when the disk edge
    // could dip into the box between corners, which cannot happen for a convex
    // disk with all corners inside.
    return 1.0;
  }
  if (n_in == 0) {
    // All corners outside. The disk can still poke into the cell through an
    // edge (e.g. cell straddling the topmost point), so only reject when the
    // centre row/column does not cross the cell.
    const bool x_straddle = cx >= x0 && cx <= x1;
    const bool y_straddle = cy >= y0 && cy <= y1;
    if (!x_straddle && !y_straddle) return 0.0;
  }
  const int k = 16;
  int hit = 0;
  for (int i = 0; i < k; ++i) {
    const double x = x0 + (i + 0.5) * dx / k;
    for (int j = 0; j < k; ++j)
      hit += inside(x, y0 + (j + 0.5) * dy / k);
  }
  return double(hit) / (k * k);
}

// Overlap fraction of [x0,x0+dx] with [a,b], in 1D.
double seg_fraction(double x0, double dx, double a, double b) {
  const double lo = std::max(x0, a), hi = std::min(x0 + dx, b);
  return hi > lo ? (hi - lo) / dx : 0.0;
}

}  // namespace

void MaterialSet::validate() const {
  if (!(n_wg >= 1.0) || !(n_fiber >= 1.0) || !(n_bg >= 1.0))
    fail("materials: refractive indices must be >= 1");
  if (n_wg <= n_bg && n_fiber <= n_bg)
    fail("materials: no guiding contrast (n_wg and n_fiber <= n_bg)");
}

void CouplerGeometry::validate() const {
  if (!(wg_width_nm > 0)) fail("geometry: wg_width_nm must be positive");
  if (!(wg_thickness_nm > 0)) fail("geometry: wg_thickness_nm must be positive");
  if (!(fiber_diameter_nm > 0))
    fail("geometry: fiber_diameter_nm must be positive");
  if (gap_nm < 0) fail("geometry: gap_nm must be >= 0");
  if (!(wavelength_nm > 0)) fail("geometry: wavelength_nm must be positive");
  if (!std::isfinite(wg_width_nm + wg_thickness_nm + fiber_diameter_nm +
                     gap_nm + fiber_offset_nm + wavelength_nm))
    fail("geometry: non-finite value");
}

double smallest_feature_nm(const CouplerGeometry& g, GuideSelection which) {
  const double wg = std::min(g.wg_width_nm, g.wg_thickness_nm);
  switch (which) {
    case GuideSelection::waveguide_only: return wg;
    case GuideSelection::fiber_only: return g.fiber_diameter_nm;
    case GuideSelection::coupled: return std::min(wg, g.fiber_diameter_nm);
  }
  return wg;
}

double CrossSection::dielectric_area() const {
  const double nbg2 = materials.n_bg * materials.n_bg;
  double s = 0.0;
  for (double e : eps) s += e - nbg2;
  return s * dx_nm * dy_nm;
}

CrossSection build_cross_section(const CouplerGeometry& g, const MaterialSet& m,
                                 GuideSelection which, double resolution_nm,
                                 double padding_nm, bool half_domain, Exec exec) {
  g.validate();
  m.validate();
  if (!(resolution_nm > 0)) fail("cross-section: resolution must be positive");
  if (resolution_nm > 20.0)
    fail("cross-section: resolution " + std::to_string(resolution_nm) +
         " nm too coarse (limit 20 nm)");
  const double feat = smallest_feature_nm(g, which);
  if (feat / resolution_nm < 8.0 - 1e-9)
    fail("cross-section: resolution " + std::to_string(resolution_nm) +
         " nm leaves fewer than 8 cells across the smallest feature (" +
         std::to_string(feat) + " nm)");
  if (padding_nm < 2.0 * resolution_nm) fail("cross-section: padding too small");
  if (half_domain && g.fiber_offset_nm != 0.0)
    fail("cross-section: half-domain solve requires a centred fiber");

  const bool has_wg = which != GuideSelection::fiber_only;
  const bool has_fib = which != GuideSelection::waveguide_only;
  const double d = resolution_nm;
  const double w = g.wg_width_nm, t = g.wg_thickness_nm;
  const double rad = g.fiber_diameter_nm / 2.0;

  // Horizontal extent from the waveguide axis, each side.
  const double ext_l = std::max(w / 2.0, rad - g.fiber_offset_nm);
  const double ext_r = std::max(w / 2.0, rad + g.fiber_offset_nm);
  // Grid counts; ceil so padding is never undercut.
  const int n_pad = int(std::ceil(padding_nm / d));
  const int n_l = n_pad + int(std::ceil(ext_l / d));
  const int n_r = n_pad + int(std::ceil(ext_r / d));
  const double height = t + g.gap_nm + g.fiber_diameter_nm;
  const int ny = 2 * n_pad + int(std::ceil(height / d));

  CrossSection cs;
  cs.geometry = g;
  cs.materials = m;
  cs.which = which;
  cs.dx_nm = d;
  cs.dy_nm = d;
  cs.padding_nm = padding_nm;
  cs.half_domain = half_domain;
  cs.ny = ny;
  cs.nx = half_domain ? n_r : n_l + n_r;

  // Coordinates: x measured from the waveguide axis; cell ix spans
  // [x_left + ix*d, ...]. Half domain keeps only x >= 0.
  const double x_left = half_domain ? 0.0 : -double(n_l) * d;
  const double y_wg0 = n_pad * d;          // waveguide bottom
  const double y_wg1 = y_wg0 + t;          // waveguide top
  const double cy = y_wg1 + g.gap_nm + rad;  // fiber centre
  const double cx = g.fiber_offset_nm;

  const double n2_bg = m.n_bg * m.n_bg;
  const double n2_wg = m.n_wg * m.n_wg;
  const double n2_fib = m.n_fiber * m.n_fiber;

  cs.eps.assign(size_t(cs.nx) * ny, n2_bg);
  std::vector<double>& eps = cs.eps;
  const int nyv = ny;
  parallel_for(exec, cs.nx, [&](int ix) {
    const double x0 = x_left + ix * d;
    for (int iy = 0; iy < nyv; ++iy) {
      const double y0 = iy * d;
      double val = n2_bg;
      if (has_wg) {
        const double f = seg_fraction(x0, d, -w / 2.0, w / 2.0) *
                         seg_fraction(y0, d, y_wg0, y_wg1);
        val += f * (n2_wg - n2_bg);
      }
      if (has_fib) {
        const double f = disk_cell_fraction(x0, y0, d, d, cx, cy, rad);
        val += f * (n2_fib - n2_bg);
      }
      eps[size_t(ix) * nyv + iy] = val;
    }
  });
  return cs;
}

}  // namespace evc
