// Times the OpenMP execution path against the serial reference for the
// data-parallel kernels: cross-section rasterization, width-sweep points,
// and wavelength points. Results also double as a sanity check that both
// paths agree, which the unit tests assert more strictly.
#include <chrono>
#include <cstdio>
#include <vector>

#include "evcoupler/geometry.hpp"
#include "evcoupler/modesolver.hpp"
#include "evcoupler/parallel.hpp"
#include "evcoupler/taper.hpp"

using namespace evc;

namespace {

template <class F>
double time_of(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

void row(const char* name, double ser, double par) {
  std::printf("%-28s %9.3f s %9.3f s %8.2fx\n", name, ser, par,
              par > 0 ? ser / par : 0.0);
}

}  // namespace

int main() {
  CouplerGeometry g;
  MaterialSet m;

  std::printf("%-28s %11s %11s %9s\n", "kernel", "serial", "openmp",
              "speedup");
  std::printf("threads available: %d\n", max_threads());

  {
    auto run = [&](Exec e) {
      for (int i = 0; i < 4; ++i)
        build_cross_section(g, m, GuideSelection::coupled, 5.0, 1000.0, false,
                            e);
    };
    const double ts = time_of([&] { run(Exec::serial); });
    const double tp = time_of([&] { run(Exec::par); });
    row("rasterize 5 nm x4", ts, tp);
  }

  {
    std::vector<double> widths;
    for (int i = 0; i < 6; ++i) widths.push_back(180.0 + 20.0 * i);
    auto run = [&](Exec e) {
      sweep_width(g, m, GuideSelection::coupled, widths, 25.0, {}, false, e);
    };
    const double ts = time_of([&] { run(Exec::serial); });
    const double tp = time_of([&] { run(Exec::par); });
    row("width sweep 6 pts @25 nm", ts, tp);
  }

  {
    TaperProfile prof;
    for (int i = 0; i <= 8; ++i) {
      prof.y_um.push_back(2.0 * i);
      prof.w_nm.push_back(300.0 - 10.0 * i);
    }
    EmeOptions opts;
    opts.n_sections = 4;
    opts.n_modes = 2;
    opts.resolution_nm = 25.0;
    std::vector<double> lams = {930.0, 935.0, 940.0, 945.0};
    auto run = [&](Exec e) {
      EmeOptions o = opts;
      o.exec = e;
      sweep_wavelength(prof, g, m, lams, o);
    };
    const double ts = time_of([&] { run(Exec::serial); });
    const double tp = time_of([&] { run(Exec::par); });
    row("wavelength sweep 4 pts", ts, tp);
  }

  return 0;
}
