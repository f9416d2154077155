#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "evcoupler/geometry.hpp"

using namespace evc;

namespace {

bool throws_containing(const std::function<void()>& fn, const std::string& sub) {
  try {
    fn();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(sub) != std::string::npos;
  }
  return false;
}

int count_cells_near(const CrossSection& cs, double value, double tol = 1e-9) {
  int n = 0;
  for (double e : cs.eps)
    if (std::abs(e - value) < tol) ++n;
  return n;
}

}  // namespace

TEST_CASE("standard coupled cross-section rasterizes to the expected cell counts") {
  CouplerGeometry g;  // 300 x 160 waveguide, 1000 fiber, gap 0
  MaterialSet m;
  CrossSection cs = build_cross_section(g, m, GuideSelection::coupled, 10.0);

  const double eps_wg = m.n_wg * m.n_wg;
  const double eps_f = m.n_fiber * m.n_fiber;

  // the waveguide edges land on grid lines at 10 nm, so exactly 30 x 16 cells
  // carry the full core permittivity
  CHECK(count_cells_near(cs, eps_wg) == 30 * 16);

  // disk interior: area pi*(500 nm)^2 = 7854 cells minus a boundary ring
  const int disk_cells = count_cells_near(cs, eps_f);
  CHECK(disk_cells > 7300);
  CHECK(disk_cells < 7854);

  // vertical diameter of the disk spans 100 cells in the columns adjacent to
  // the symmetry axis (cells more fiber than background)
  const int mid = cs.nx / 2;
  const double half_eps = 0.5 * (eps_f + m.n_bg * m.n_bg);
  for (int ix : {mid - 1, mid}) {
    int run = 0;
    for (int iy = 0; iy < cs.ny; ++iy)
      if (cs.eps_at(ix, iy) >= half_eps && cs.eps_at(ix, iy) < eps_wg - 1e-9)
        ++run;
    CHECK(run == 100);
  }

  // every cell is one of the three materials or a boundary-averaged mix
  const auto [emin, emax] = std::minmax_element(cs.eps.begin(), cs.eps.end());
  CHECK(*emin >= m.n_bg * m.n_bg - 1e-12);
  CHECK(*emax <= eps_wg + 1e-12);
}

TEST_CASE("fiber-only selection contains no waveguide material") {
  CouplerGeometry g;
  MaterialSet m;
  CrossSection cs = build_cross_section(g, m, GuideSelection::fiber_only, 10.0);
  const double em = *std::max_element(cs.eps.begin(), cs.eps.end());
  CHECK(em <= m.n_fiber * m.n_fiber + 1e-12);
}

TEST_CASE("aligned bare waveguide rasterizes without smoothing") {
  CouplerGeometry g;
  g.wg_width_nm = 160.0;
  MaterialSet m;
  CrossSection cs =
      build_cross_section(g, m, GuideSelection::waveguide_only, 10.0);
  const double eps_wg = m.n_wg * m.n_wg;
  CHECK(count_cells_near(cs, eps_wg) == 16 * 16);
  // edges on grid lines: every cell is either pure core or pure background
  int mixed = 0;
  for (double e : cs.eps)
    if (e > 1.0 + 1e-9 && e < eps_wg - 1e-9) ++mixed;
  CHECK(mixed == 0);
}

TEST_CASE("centered geometries produce mirror-symmetric maps") {
  CouplerGeometry g;
  g.gap_nm = 50.0;
  MaterialSet m;
  CrossSection cs = build_cross_section(g, m, GuideSelection::coupled, 10.0);
  for (int ix = 0; ix < cs.nx / 2; ++ix)
    for (int iy = 0; iy < cs.ny; ++iy) {
      if (cs.eps_at(ix, iy) != cs.eps_at(cs.nx - 1 - ix, iy)) {
        CAPTURE(ix);
        CAPTURE(iy);
        CHECK(cs.eps_at(ix, iy) == cs.eps_at(cs.nx - 1 - ix, iy));
        return;
      }
    }
  CHECK(true);
}

TEST_CASE("half-domain map equals the right half of the full map") {
  CouplerGeometry g;
  MaterialSet m;
  CrossSection full = build_cross_section(g, m, GuideSelection::coupled, 10.0);
  CrossSection half =
      build_cross_section(g, m, GuideSelection::coupled, 10.0, 1000.0, true);
  REQUIRE(half.nx == full.nx / 2);
  REQUIRE(half.ny == full.ny);
  for (int ix = 0; ix < half.nx; ++ix)
    for (int iy = 0; iy < half.ny; ++iy)
      if (half.eps_at(ix, iy) != full.eps_at(full.nx / 2 + ix, iy)) {
        CAPTURE(ix);
        CAPTURE(iy);
        REQUIRE(half.eps_at(ix, iy) == full.eps_at(full.nx / 2 + ix, iy));
        return;
      }
  CHECK(true);
}

TEST_CASE("dielectric area is stable under grid refinement") {
  CouplerGeometry g;
  g.gap_nm = 30.0;
  MaterialSet m;
  CrossSection coarse = build_cross_section(g, m, GuideSelection::coupled, 10.0);
  CrossSection fine = build_cross_section(g, m, GuideSelection::coupled, 5.0);
  const double a0 = coarse.dielectric_area();
  const double a1 = fine.dielectric_area();
  CHECK(std::abs(a0 - a1) / a1 < 0.01);
}

TEST_CASE("off-axis fiber shifts the map instead of mirroring it") {
  CouplerGeometry g;
  g.fiber_offset_nm = 200.0;
  MaterialSet m;
  CrossSection cs = build_cross_section(g, m, GuideSelection::coupled, 10.0);
  bool symmetric = true;
  for (int ix = 0; ix < cs.nx / 2 && symmetric; ++ix)
    for (int iy = 0; iy < cs.ny; ++iy)
      if (cs.eps_at(ix, iy) != cs.eps_at(cs.nx - 1 - ix, iy)) {
        symmetric = false;
        break;
      }
  CHECK_FALSE(symmetric);
}

TEST_CASE("geometry validation names the offending parameter") {
  MaterialSet m;
  CouplerGeometry g;
  g.wg_width_nm = -5.0;
  CHECK(throws_containing([&] { g.validate(); }, "wg_width_nm"));
  g = CouplerGeometry{};
  g.wg_thickness_nm = 0.0;
  CHECK(throws_containing([&] { g.validate(); }, "wg_thickness_nm"));
  g = CouplerGeometry{};
  g.fiber_diameter_nm = -1.0;
  CHECK(throws_containing([&] { g.validate(); }, "fiber_diameter_nm"));
  g = CouplerGeometry{};
  g.gap_nm = -10.0;
  CHECK(throws_containing([&] { g.validate(); }, "gap_nm"));
  g = CouplerGeometry{};
  g.wavelength_nm = 0.0;
  CHECK(throws_containing([&] { g.validate(); }, "wavelength_nm"));
}

TEST_CASE("resolution and padding guards reject unusable grids") {
  CouplerGeometry g;
  MaterialSet m;
  // absolute cap at 20 nm
  CHECK_THROWS_AS(build_cross_section(g, m, GuideSelection::coupled, 25.0),
                  std::runtime_error);
  // 50 nm width at 20 nm resolution leaves only 2.5 cells across the feature
  g.wg_width_nm = 50.0;
  CHECK(throws_containing(
      [&] { build_cross_section(g, m, GuideSelection::coupled, 20.0); },
      "8"));
  // the same width is fine when the waveguide is excluded
  CHECK_NOTHROW(build_cross_section(g, m, GuideSelection::fiber_only, 20.0));
  // padding must cover at least two cells
  g = CouplerGeometry{};
  CHECK_THROWS_AS(
      build_cross_section(g, m, GuideSelection::coupled, 10.0, 15.0),
      std::runtime_error);
  // half-domain solves require the mirror symmetry to actually hold
  g.fiber_offset_nm = 100.0;
  CHECK_THROWS_AS(
      build_cross_section(g, m, GuideSelection::coupled, 10.0, 1000.0, true),
      std::runtime_error);
}

TEST_CASE("smallest feature follows the guide selection") {
  CouplerGeometry g;
  g.wg_width_nm = 120.0;
  CHECK(smallest_feature_nm(g, GuideSelection::waveguide_only) == 120.0);
  CHECK(smallest_feature_nm(g, GuideSelection::fiber_only) == 1000.0);
  CHECK(smallest_feature_nm(g, GuideSelection::coupled) == 120.0);
  g.wg_width_nm = 2000.0;
  CHECK(smallest_feature_nm(g, GuideSelection::waveguide_only) == 160.0);
}

TEST_CASE("parallel rasterization matches serial exactly") {
  CouplerGeometry g;
  g.gap_nm = 25.0;
  MaterialSet m;
  CrossSection a =
      build_cross_section(g, m, GuideSelection::coupled, 10.0, 1000.0, false,
                          Exec::serial);
  CrossSection b =
      build_cross_section(g, m, GuideSelection::coupled, 10.0, 1000.0, false,
                          Exec::par);
  REQUIRE(a.eps.size() == b.eps.size());
  CHECK(std::equal(a.eps.begin(), a.eps.end(), b.eps.begin()));
}
