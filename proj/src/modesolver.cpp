#include "evcoupler/modesolver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>

// Formulation notes.
//
// The solver works in the two transverse H components on a staggered grid.
// With the longitudinal dependence exp(i beta z) factored out and lengths in
// nm, Maxwell's curl equations reduce to first-order relations
//     bt * e = P h,      bt * h = Q e,        bt = beta / k0,
// where e = [Ex; Ey], h = [Hx; Hy] and P, Q contain the transverse
// derivatives and the permittivity samples. Eliminating e gives
//     (Q P) h = bt^2 h,
// so the eigenvalue is n_eff^2 directly. Guided solutions satisfy
// n_bg^2 < n_eff^2 <= max(eps); everything else is radiation-box spectrum.
//
// Grid truncation: the window is walled with perfect electric conductor.
// Per component that means tangential E and normal H samples on a wall are
// identically zero and simply dropped from the unknown vector, which is what
// produces the (n-1)-point interior vertex sets. A uniform-in-x slab mode is
// then represented exactly (the x-derivative matrices annihilate it), which
// is what makes the side walls invisible in the slab limit.
//
// The discrete structure gives exact mode orthogonality under the cross
// power S_ab (see mode_overlap): C*Q and C'*P are symmetric for the
// appropriate signature matrices, so eigenvectors of QP with distinct
// eigenvalues have S_ab = 0 to rounding, not just to discretization error.

namespace evc {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;
using Vec = Eigen::VectorXd;

// 1D forward difference, half grid (n points) -> interior vertices (n-1).
SpMat diff_half_to_vertex(int n, double d) {
  SpMat A(n - 1, n);
  std::vector<Trip> t;
  t.reserve(2 * size_t(n - 1));
  for (int r = 0; r < n - 1; ++r) {
    t.emplace_back(r, r, -1.0 / d);
    t.emplace_back(r, r + 1, 1.0 / d);
  }
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

SpMat kron(const SpMat& A, const SpMat& B) {
  SpMat C(A.rows() * B.rows(), A.cols() * B.cols());
  std::vector<Trip> t;
  t.reserve(size_t(A.nonZeros()) * B.nonZeros());
  for (int ka = 0; ka < A.outerSize(); ++ka)
    for (SpMat::InnerIterator ia(A, ka); ia; ++ia)
      for (int kb = 0; kb < B.outerSize(); ++kb)
        for (SpMat::InnerIterator ib(B, kb); ib; ++ib)
          t.emplace_back(ia.row() * B.rows() + ib.row(),
                         ia.col() * B.cols() + ib.col(),
                         ia.value() * ib.value());
  C.setFromTriplets(t.begin(), t.end());
  return C;
}

SpMat speye(int n) {
  SpMat I(n, n);
  I.setIdentity();
  return I;
}

SpMat diag_of(const Vec& v) {
  SpMat D(v.size(), v.size());
  std::vector<Trip> t;
  t.reserve(size_t(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) t.emplace_back(i, i, v[i]);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

struct AssembledOp {
  SpMat A;  // QP; eigenvalue is n_eff^2
  SpMat P;  // e = P h / n_eff
  int nx = 0, ny = 0;
  int n1 = 0;  // Hx / Ey block size, (nx-1)*ny
  int n2 = 0;  // Hy / Ex block size, nx*(ny-1)
};

AssembledOp assemble(const CrossSection& cs) {
  const int nx = cs.nx, ny = cs.ny;
  if (nx < 3 || ny < 3) throw std::runtime_error("modesolver: grid too small");
  const double k0 = 2.0 * M_PI / cs.geometry.wavelength_nm;
  const double ik02 = 1.0 / (k0 * k0);

  SpMat Ax = diff_half_to_vertex(nx, cs.dx_nm);
  SpMat Ay = diff_half_to_vertex(ny, cs.dy_nm);
  SpMat AxT = SpMat(Ax.transpose());
  SpMat AyT = SpMat(Ay.transpose());

  // Permittivity on the component sample points: plain two/four cell averages
  // of the cell map, the standard tensor smoothing for a staggered grid.
  Vec exx(size_t(nx) * (ny - 1)), eyy(size_t(nx - 1) * ny),
      ezz_inv(size_t(nx - 1) * (ny - 1));
  for (int ix = 0; ix < nx; ++ix)
    for (int j = 1; j < ny; ++j)
      exx[size_t(ix) * (ny - 1) + (j - 1)] =
          0.5 * (cs.eps_at(ix, j - 1) + cs.eps_at(ix, j));
  for (int i = 1; i < nx; ++i)
    for (int iy = 0; iy < ny; ++iy)
      eyy[size_t(i - 1) * ny + iy] = 0.5 * (cs.eps_at(i - 1, iy) + cs.eps_at(i, iy));
  for (int i = 1; i < nx; ++i)
    for (int j = 1; j < ny; ++j)
      ezz_inv[size_t(i - 1) * (ny - 1) + (j - 1)] =
          1.0 / (0.25 * (cs.eps_at(i - 1, j - 1) + cs.eps_at(i - 1, j) +
                         cs.eps_at(i, j - 1) + cs.eps_at(i, j)));

  SpMat Ezz_inv = diag_of(ezz_inv);
  SpMat I_ny = speye(ny), I_nx = speye(nx);
  SpMat I_nym1 = speye(ny - 1), I_nxm1 = speye(nx - 1);

  SpMat DxHy = kron(Ax, I_nym1);   // Hy(half,vert) -> Ez grid (vert,vert)
  SpMat DyHx = kron(I_nxm1, Ay);   // Hx(vert,half) -> Ez grid
  SpMat DxEz = kron(AxT, I_nym1);  // Ez grid -> Ex grid
  SpMat DyEz = kron(I_nxm1, AyT);  // Ez grid -> Ey grid

  SpMat P11 = ik02 * SpMat(DxEz * SpMat(Ezz_inv * DyHx));
  SpMat P12 = -ik02 * SpMat(DxEz * SpMat(Ezz_inv * DxHy));
  for (int i = 0; i < P12.rows(); ++i) P12.coeffRef(i, i) += 1.0;
  SpMat P21 = ik02 * SpMat(DyEz * SpMat(Ezz_inv * DyHx));
  for (int i = 0; i < P21.rows(); ++i) P21.coeffRef(i, i) += -1.0;
  SpMat P22 = -ik02 * SpMat(DyEz * SpMat(Ezz_inv * DxHy));

  SpMat Q11 = -ik02 * kron(Ax, AyT);
  SpMat Q12 = ik02 * kron(SpMat(Ax * AxT), I_ny);
  Q12 -= diag_of(eyy);
  SpMat Q21 = -ik02 * kron(I_nx, SpMat(Ay * AyT));
  Q21 += diag_of(exx);
  SpMat Q22 = ik02 * kron(AxT, Ay);

  const int sz1 = (nx - 1) * ny;
  const int sz2 = nx * (ny - 1);
  SpMat P(sz2 + sz1, sz1 + sz2), Q(sz1 + sz2, sz2 + sz1);
  {
    std::vector<Trip> t;
    auto add = [&t](const SpMat& M, int r0, int c0) {
      for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
          t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
    };
    // P rows [Ex; Ey], cols [Hx; Hy]
    add(P11, 0, 0);
    add(P12, 0, sz1);
    add(P21, sz2, 0);
    add(P22, sz2, sz1);
    P.setFromTriplets(t.begin(), t.end());
    t.clear();
    // Q rows [Hx; Hy], cols [Ex; Ey]
    add(Q11, 0, 0);
    add(Q12, 0, sz2);
    add(Q21, sz1, 0);
    add(Q22, sz1, sz2);
    Q.setFromTriplets(t.begin(), t.end());
  }

  AssembledOp op;
  op.A = SpMat(Q * P);
  op.P = std::move(P);
  op.nx = nx;
  op.ny = ny;
  op.n1 = sz1;
  op.n2 = sz2;
  return op;
}

struct RitzMode {
  double lam = 0.0;  // n_eff^2
  Vec v;             // unit h vector
  double resid = 0.0;
};

struct ArnoldiOutcome {
  std::vector<RitzMode> guided;  // converged, lam > n_bg^2, descending lam
  // True when a converged Ritz value at or below the background line exists:
  // with the shift above the whole physical branch the transformed spectrum
  // is ordered like n_eff, so convergence past the line means every guided
  // eigenvalue above it has been captured.
  bool reached_background = false;
};

// One Arnoldi run of subspace size m on (A - sigma I)^-1, starting from a
// fixed-seed vector so results are bit-reproducible.
ArnoldiOutcome arnoldi(const Eigen::UmfPackLU<SpMat>& lu, const AssembledOp& op,
                       double sigma, int m, double tol, double nbg2) {
  const Eigen::Index N = op.A.rows();
  m = int(std::min<Eigen::Index>(m, N - 1));

  std::mt19937 rng(12345);
  std::normal_distribution<double> nd;
  Vec v0(N);
  for (Eigen::Index i = 0; i < N; ++i) v0[i] = nd(rng);
  v0.normalize();

  Eigen::MatrixXd V(N, m + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  V.col(0) = v0;
  int m_used = m;
  for (int j = 0; j < m; ++j) {
    Vec w = lu.solve(V.col(j));
    // two-pass classical Gram-Schmidt: cheap and numerically adequate here
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd c = V.leftCols(j + 1).transpose() * w;
      w -= V.leftCols(j + 1) * c;
      for (int i = 0; i <= j; ++i) H(i, j) += c[i];
    }
    H(j + 1, j) = w.norm();
    if (H(j + 1, j) < 1e-12) {
      m_used = j + 1;  // invariant subspace; Ritz values are exact
      break;
    }
    V.col(j + 1) = w / H(j + 1, j);
  }

  Eigen::MatrixXd Hm = H.topLeftCorner(m_used, m_used);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Hm);

  ArnoldiOutcome out;
  struct Cand {
    double lam;
    Eigen::VectorXd y;
  };
  std::vector<Cand> cands;
  for (int i = 0; i < m_used; ++i) {
    const std::complex<double> th = es.eigenvalues()[i];
    if (std::abs(th) < 1e-14) continue;
    const std::complex<double> lam = sigma + 1.0 / th;
    if (std::abs(lam.imag()) > 1e-8 * std::abs(lam)) continue;
    Eigen::VectorXd y(m_used);
    for (int k = 0; k < m_used; ++k) y[k] = es.eigenvectors().col(i)[k].real();
    if (y.norm() < 1e-12) continue;
    cands.push_back({lam.real(), y});
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.lam > b.lam; });

  for (auto& c : cands) {
    Vec v = V.leftCols(m_used) * c.y;
    const double nrm = v.norm();
    if (nrm < 1e-12) continue;
    v /= nrm;
    const double resid = (op.A * v - c.lam * v).norm() / std::abs(c.lam);
    const bool converged = resid < tol;
    if (c.lam > nbg2 + 1e-9) {
      if (converged) out.guided.push_back({c.lam, std::move(v), resid});
    } else {
      if (converged) out.reached_background = true;
      break;  // below the line; nothing guided further down
    }
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double GuidedMode::power() const {
  double s = 0.0;
  for (size_t i = 0; i < ex.size(); ++i) s += ex[i] * hy[i];
  for (size_t i = 0; i < ey.size(); ++i) s -= ey[i] * hx[i];
  return 0.5 * s * dx_nm * dy_nm;
}

void normalize(GuidedMode& m) {
  double p = m.power();
  if (!std::isfinite(p) || std::abs(p) < 1e-300)
    throw std::runtime_error("normalize: mode has zero or non-finite power");
  if (p < 0) {
    // backward-propagating sign convention; flip E to make the mode forward
    for (double& v : m.ex) v = -v;
    for (double& v : m.ey) v = -v;
    p = -p;
  }
  const double f = 1.0 / std::sqrt(p);
  for (double& v : m.ex) v *= f;
  for (double& v : m.ey) v *= f;
  for (double& v : m.hx) v *= f;
  for (double& v : m.hy) v *= f;
}

static void require_same_grid(const GuidedMode& a, const GuidedMode& b) {
  if (a.nx != b.nx || a.ny != b.ny || a.dx_nm != b.dx_nm ||
      a.dy_nm != b.dy_nm || a.half_domain != b.half_domain)
    throw std::runtime_error("mode_overlap: modes live on different grids");
}

static double cross_power(const GuidedMode& a, const GuidedMode& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.ex.size(); ++i)
    s += a.ex[i] * b.hy[i] + b.ex[i] * a.hy[i];
  for (size_t i = 0; i < a.ey.size(); ++i)
    s -= a.ey[i] * b.hx[i] + b.ey[i] * a.hx[i];
  return 0.25 * s * a.dx_nm * a.dy_nm;  // 1/2 for power, 1/2 for symmetrization
}

double overlap_coefficient(const GuidedMode& a, const GuidedMode& b) {
  require_same_grid(a, b);
  const double saa = cross_power(a, a), sbb = cross_power(b, b);
  if (!(saa > 0) || !(sbb > 0))
    throw std::runtime_error("mode_overlap: mode with non-positive power");
  return cross_power(a, b) / std::sqrt(saa * sbb);
}

double mode_overlap(const GuidedMode& a, const GuidedMode& b) {
  const double c = overlap_coefficient(a, b);
  return c * c;
}

std::vector<GuidedMode> solve_modes(const CrossSection& cs,
                                    const SolveOptions& opts) {
  if (opts.n_modes < 1) throw std::runtime_error("solve_modes: n_modes < 1");
  if (cs.eps.size() != size_t(cs.nx) * cs.ny || cs.nx < 3 || cs.ny < 3)
    throw std::runtime_error("solve_modes: malformed cross-section");
  const MaterialSet& mat = cs.materials;
  const double nbg2 = mat.n_bg * mat.n_bg;

  double guess = opts.n_eff_guess;
  if (guess <= 0) {
    switch (cs.which) {
      case GuideSelection::waveguide_only: guess = 3.0; break;
      case GuideSelection::fiber_only: guess = 1.3; break;
      case GuideSelection::coupled: guess = 2.0; break;
    }
  }
  double sigma = guess * guess;

  AssembledOp op = assemble(cs);
  Eigen::UmfPackLU<SpMat> lu;
  SpMat As;  // must outlive lu: the factorization keeps a reference
  auto factor = [&](double s) {
    As = op.A;
    for (Eigen::Index i = 0; i < As.rows(); ++i) As.coeffRef(i, i) -= s;
    As.makeCompressed();
    lu.compute(As);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("solve_modes: sparse factorization failed");
  };
  factor(sigma);

  const bool fixed_m = opts.krylov > 0;
  const int m0 = fixed_m ? opts.krylov : std::max(32, 16 + 8 * opts.n_modes);
  int m = m0;
  bool recentered = false;
  ArnoldiOutcome out;  // pool merged across attempts
  for (;;) {
    ArnoldiOutcome att = arnoldi(lu, op, sigma, m, opts.residual_tol, nbg2);
    out.reached_background |= att.reached_background;
    for (auto& rm : att.guided) {
      bool dup = false;
      for (const auto& have : out.guided)
        if (std::abs(have.lam - rm.lam) <= 1e-10 * std::abs(have.lam)) {
          dup = true;
          break;
        }
      if (!dup) out.guided.push_back(std::move(rm));
    }
    std::sort(out.guided.begin(), out.guided.end(),
              [](const RitzMode& a, const RitzMode& b) { return a.lam > b.lam; });

    const bool enough = int(out.guided.size()) >= opts.n_modes;
    if (enough || out.reached_background || fixed_m) break;
    if (m >= 120) {
      if (!recentered && !out.guided.empty()) {
        // The shift sits far above a weakly guided spectrum: the remaining
        // guided eigenvalues and the background edge form one tight Ritz
        // cluster. Re-centering between the edge and the lowest converged
        // eigenvalue turns both into well-separated extremes, so the
        // completeness witness (a converged value at the edge) comes cheap.
        recentered = true;
        sigma = 0.5 * (nbg2 + out.guided.back().lam);
        factor(sigma);
        m = m0;
        continue;
      }
      throw std::runtime_error(
          "solve_modes: eigensolver did not converge (subspace " +
          std::to_string(m) + ", " + std::to_string(out.guided.size()) +
          " modes resolved)");
    }
    m = std::min(120, (m * 3) / 2);
  }
  if (out.guided.empty())
    throw std::runtime_error(
        "solve_modes: no guided mode (all eigenvalues at or below the "
        "background index)");

  const int n_keep = std::min<int>(opts.n_modes, int(out.guided.size()));
  std::vector<GuidedMode> modes;
  modes.reserve(n_keep);
  for (int k = 0; k < n_keep; ++k) {
    RitzMode& rm = out.guided[k];
    GuidedMode md;
    md.n_eff = std::sqrt(rm.lam);
    md.wavelength_nm = cs.geometry.wavelength_nm;
    md.nx = cs.nx;
    md.ny = cs.ny;
    md.dx_nm = cs.dx_nm;
    md.dy_nm = cs.dy_nm;
    md.half_domain = cs.half_domain;
    md.residual = rm.resid;

    Vec e = op.P * rm.v / md.n_eff;
    md.hx.assign(rm.v.data(), rm.v.data() + op.n1);
    md.hy.assign(rm.v.data() + op.n1, rm.v.data() + op.n1 + op.n2);
    md.ex.assign(e.data(), e.data() + op.n2);
    md.ey.assign(e.data() + op.n2, e.data() + op.n2 + op.n1);

    const double ex2 = e.head(op.n2).squaredNorm();
    const double ey2 = e.tail(op.n1).squaredNorm();
    md.te_fraction = ex2 / (ex2 + ey2);

    normalize(md);

    // field magnitude on the outer wall cells relative to the global peak;
    // the mirror-plane edge of a half-domain solve is not an outer wall
    const int nx1 = cs.nx - 1, ny0 = cs.ny, ny1 = cs.ny - 1;
    auto edge_ratio = [&](const std::vector<double>& f, int ncx, int ncy,
                          bool skip_left) {
      double peak = max_abs(f);
      if (peak == 0) return 0.0;
      double edge = 0.0;
      for (int ix = 0; ix < ncx; ++ix) {
        edge = std::max(edge, std::abs(f[size_t(ix) * ncy]));
        edge = std::max(edge, std::abs(f[size_t(ix) * ncy + ncy - 1]));
      }
      for (int iy = 0; iy < ncy; ++iy) {
        if (!skip_left) edge = std::max(edge, std::abs(f[size_t(iy)]));
        edge = std::max(edge, std::abs(f[size_t(ncx - 1) * ncy + iy]));
      }
      return edge / peak;
    };
    const bool skip = cs.half_domain;
    md.boundary_decay =
        std::max(std::max(edge_ratio(md.hx, nx1, ny0, skip),
                          edge_ratio(md.hy, cs.nx, ny1, skip)),
                 std::max(edge_ratio(md.ex, cs.nx, ny1, skip),
                          edge_ratio(md.ey, nx1, ny0, skip)));
    md.boundary_converged = md.boundary_decay < 1e-3;
    modes.push_back(std::move(md));
  }
  return modes;
}

SweepResult track_branches(const std::vector<double>& widths,
                           const std::vector<std::vector<GuidedMode>>& modes) {
  if (widths.size() != modes.size())
    throw std::runtime_error("track_branches: widths/modes size mismatch");
  SweepResult res;
  if (widths.empty()) return res;

  struct Active {
    int id;
    const GuidedMode* last;
  };
  std::vector<Active> active;
  int next_id = 0;

  auto open_branch = [&](double w, const GuidedMode& m) -> Active {
    DispersionBranch b;
    b.id = next_id++;
    b.width_nm.push_back(w);
    b.n_eff.push_back(m.n_eff);
    b.te_fraction.push_back(m.te_fraction);
    res.branches.push_back(std::move(b));
    return {res.branches.back().id, &m};
  };
  auto extend_branch = [&](int id, double w, const GuidedMode& m) {
    for (auto& b : res.branches)
      if (b.id == id) {
        b.width_nm.push_back(w);
        b.n_eff.push_back(m.n_eff);
        b.te_fraction.push_back(m.te_fraction);
        return;
      }
  };

  {
    // seed: modes of the first point, highest n_eff first
    std::vector<const GuidedMode*> first;
    for (const auto& m : modes[0]) first.push_back(&m);
    std::sort(first.begin(), first.end(),
              [](auto* a, auto* b) { return a->n_eff > b->n_eff; });
    for (auto* m : first) active.push_back(open_branch(widths[0], *m));
  }

  for (size_t p = 1; p < modes.size(); ++p) {
    const auto& cur = modes[p];
    std::vector<bool> taken(cur.size(), false);
    std::vector<Active> survivors;

    const bool same_grid =
        !cur.empty() && !active.empty() &&
        cur[0].nx == active[0].last->nx && cur[0].ny == active[0].last->ny &&
        cur[0].dx_nm == active[0].last->dx_nm &&
        cur[0].dy_nm == active[0].last->dy_nm &&
        cur[0].half_domain == active[0].last->half_domain;

    if (same_grid) {
      // greedy best-overlap pairing; ambiguous winners decided by n_eff
      std::vector<std::vector<double>> ov(active.size(),
                                          std::vector<double>(cur.size(), 0.0));
      for (size_t a = 0; a < active.size(); ++a)
        for (size_t c = 0; c < cur.size(); ++c)
          ov[a][c] = mode_overlap(*active[a].last, cur[c]);

      std::vector<bool> done(active.size(), false);
      for (size_t step = 0; step < std::min(active.size(), cur.size()); ++step) {
        double best = -1.0;
        size_t ba = 0, bc = 0;
        for (size_t a = 0; a < active.size(); ++a) {
          if (done[a]) continue;
          for (size_t c = 0; c < cur.size(); ++c) {
            if (taken[c]) continue;
            if (ov[a][c] > best) {
              best = ov[a][c];
              ba = a;
              bc = c;
            }
          }
        }
        if (best < 0.5) break;  // nothing left that continues a branch
        // near-tie: another candidate within 0.01 of the winner
        size_t pick = bc;
        for (size_t c = 0; c < cur.size(); ++c) {
          if (taken[c] || c == bc) continue;
          if (best - ov[ba][c] < 0.01) {
            TrackAmbiguity amb;
            amb.width_nm = widths[p];
            amb.branch_id = active[ba].id;
            amb.note = "overlap near-tie; resolved by effective-index distance";
            res.ambiguities.push_back(amb);
            if (std::abs(cur[c].n_eff - active[ba].last->n_eff) <
                std::abs(cur[pick].n_eff - active[ba].last->n_eff))
              pick = c;
          }
        }
        done[ba] = true;
        taken[pick] = true;
        extend_branch(active[ba].id, widths[p], cur[pick]);
        survivors.push_back({active[ba].id, &cur[pick]});
      }
    } else {
      // grid changed between points (resolution clamp): match nearest n_eff
      std::vector<bool> done(active.size(), false);
      for (size_t step = 0; step < std::min(active.size(), cur.size()); ++step) {
        double best = 1e300;
        size_t ba = 0, bc = 0;
        for (size_t a = 0; a < active.size(); ++a) {
          if (done[a]) continue;
          for (size_t c = 0; c < cur.size(); ++c) {
            if (taken[c]) continue;
            const double d = std::abs(active[a].last->n_eff - cur[c].n_eff);
            if (d < best) {
              best = d;
              ba = a;
              bc = c;
            }
          }
        }
        done[ba] = true;
        taken[bc] = true;
        extend_branch(active[ba].id, widths[p], cur[bc]);
        survivors.push_back({active[ba].id, &cur[bc]});
      }
    }

    // unmatched current modes open new branches; branches with no
    // continuation simply end here
    for (size_t c = 0; c < cur.size(); ++c)
      if (!taken[c]) survivors.push_back(open_branch(widths[p], cur[c]));
    active = std::move(survivors);
  }

  std::sort(res.branches.begin(), res.branches.end(),
            [](const DispersionBranch& a, const DispersionBranch& b) {
              return a.id < b.id;
            });
  return res;
}

SweepResult sweep_width(const CouplerGeometry& base, const MaterialSet& m,
                        GuideSelection which,
                        const std::vector<double>& widths_nm,
                        double resolution_nm, const SolveOptions& opts,
                        bool full_domain, Exec exec) {
  if (widths_nm.empty()) throw std::runtime_error("sweep_width: empty width list");
  const int np = int(widths_nm.size());
  std::vector<std::vector<GuidedMode>> per_point(np);
  std::vector<double> res_used(np, 0.0);
  const bool half = !full_domain && base.fiber_offset_nm == 0.0;

  parallel_for(exec, np, [&](int i) {
    try {
      CouplerGeometry g = base;
      g.wg_width_nm = widths_nm[i];
      double r = resolution_nm;
      const double feat = smallest_feature_nm(g, which);
      if (feat / r < 8.0) r = feat / 8.0;  // clamp to keep the feature resolved
      res_used[i] = r;
      CrossSection cs = build_cross_section(g, m, which, r, 1000.0, half);
      per_point[i] = solve_modes(cs, opts);
    } catch (const std::exception& e) {
      throw std::runtime_error("sweep_width: width " +
                               std::to_string(widths_nm[i]) + " nm: " +
                               e.what());
    }
  });

  SweepResult res = track_branches(widths_nm, per_point);
  res.resolution_nm = std::move(res_used);
  return res;
}

}  // namespace evc
