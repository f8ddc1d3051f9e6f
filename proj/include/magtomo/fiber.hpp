#pragma once

#include <memory>
#include <vector>

#include "magtomo/fields.hpp"
#include "magtomo/flow.hpp"

namespace magtomo {

struct GridSpec {
  int nx = 129;
  int ny = 129;
  int ntheta = 64;  // power of two
};

// Radix-2 FFT working data for one fiber size.
class FftPlan {
 public:
  explicit FftPlan(int n);
  int n() const { return n_; }
  // In-place, unnormalized forward transform (X_k = sum x_t e^{-2pi i k t / n}).
  void forward(Complex* data) const;
  // In-place inverse with 1/n normalization.
  void inverse(Complex* data) const;

 private:
  void run(Complex* data, bool inverse) const;
  int n_ = 0;
  std::vector<int> bitrev_;
  std::vector<Complex> twiddle_;  // forward twiddles per stage
};

// Cartesian grid over [-1,1]^2 clipped to the unit disk, with fiber angles
// uniform on [0, 2pi).  Caches the coefficient planes every operator needs
// plus quadrature weights (cells at the rim weighted by their inside area).
class GridGeometry {
 public:
  GridGeometry(const MagneticSystem& system, GridSpec spec);

  const GridSpec& spec() const { return spec_; }
  const MagneticSystem& system() const { return system_; }
  double x(int i) const { return xs_[i]; }
  double y(int j) const { return ys_[j]; }
  double theta(int t) const { return thetas_[t]; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  bool masked(int i, int j) const { return mask_[j * spec_.nx + i] != 0; }
  double weight(int i, int j) const { return weight_[j * spec_.nx + i]; }  // area
  double plane(const std::vector<double>& p, int i, int j) const { return p[j * spec_.nx + i]; }

  const std::vector<double>& em_phi() const { return em_phi_; }    // e^{-phi}
  const std::vector<double>& e2_phi() const { return e2_phi_; }    // e^{2 phi}
  const std::vector<double>& phi_x() const { return phi_x_; }
  const std::vector<double>& phi_y() const { return phi_y_; }
  const std::vector<double>& lam() const { return lam_; }
  const std::vector<double>& lam_x() const { return lam_x_; }
  const std::vector<double>& lam_y() const { return lam_y_; }
  const std::vector<double>& gauss() const { return gauss_; }      // curvature

  const std::vector<double>& cos_theta() const { return cos_t_; }
  const std::vector<double>& sin_theta() const { return sin_t_; }

  struct Run {
    int fixed;  // row: j, column: i
    int begin;
    int end;  // inclusive
  };
  const std::vector<Run>& row_runs() const { return row_runs_; }
  const std::vector<Run>& col_runs() const { return col_runs_; }

  const FftPlan& fft() const { return fft_; }
  const std::vector<std::pair<int, int>>& mask_nodes() const { return mask_nodes_; }

 private:
  MagneticSystem system_;
  GridSpec spec_;
  double hx_ = 0, hy_ = 0;
  std::vector<double> xs_, ys_, thetas_, cos_t_, sin_t_;
  std::vector<unsigned char> mask_;
  std::vector<double> weight_;
  std::vector<double> em_phi_, e2_phi_, phi_x_, phi_y_, lam_, lam_x_, lam_y_, gauss_;
  std::vector<Run> row_runs_, col_runs_;
  std::vector<std::pair<int, int>> mask_nodes_;
  FftPlan fft_;
};

using GeomPtr = std::shared_ptr<const GridGeometry>;

// C^n-valued samples over (x, y, theta); theta is the fastest index.
struct FiberGrid {
  GeomPtr geom;
  int n = 1;
  std::vector<Complex> values;

  static FiberGrid zeros(GeomPtr geom, int n = 1);
  static FiberGrid sample(GeomPtr geom, const FiberExpansion& fe);

  std::size_t fiber_offset(int c, int i, int j) const {
    const auto& s = geom->spec();
    return ((static_cast<std::size_t>(c) * s.ny + j) * s.nx + i) * s.ntheta;
  }
  Complex at(int c, int i, int j, int t) const { return values[fiber_offset(c, i, j) + t]; }
  Complex& at(int c, int i, int j, int t) { return values[fiber_offset(c, i, j) + t]; }
};

// Fiber Fourier coefficients; layer index l = k + ntheta/2 for
// k in [-ntheta/2, ntheta/2).
struct FourierStack {
  GeomPtr geom;
  int n = 1;
  std::vector<Complex> coeff;

  static FourierStack zeros(GeomPtr geom, int n = 1);
  int kmin() const { return -geom->spec().ntheta / 2; }
  int kmax() const { return geom->spec().ntheta / 2 - 1; }
  std::size_t layer_offset(int c, int i, int j) const {
    const auto& s = geom->spec();
    return ((static_cast<std::size_t>(c) * s.ny + j) * s.nx + i) * s.ntheta;
  }
  Complex at(int c, int i, int j, int k) const {
    return coeff[layer_offset(c, i, j) + (k - kmin())];
  }
  Complex& at(int c, int i, int j, int k) {
    return coeff[layer_offset(c, i, j) + (k - kmin())];
  }
};

// Frame vector fields; spatial derivatives are 4th-order finite differences
// along mask runs (one-sided at the rim), the fiber derivative is spectral.
FiberGrid apply_V(const FiberGrid& u);
FiberGrid apply_X(const FiberGrid& u);
FiberGrid apply_Xperp(const FiberGrid& u);

FourierStack fourier_decompose(const FiberGrid& u);
FiberGrid fourier_reconstruct(const FourierStack& s);

void hilbert_transform_inplace(FourierStack& s);
FiberGrid hilbert_transform(const FiberGrid& u);
// (Id + iH) u = u_0 + 2 sum_{k>0} u_k; strict variant only zeroes k < 0.
FiberGrid holomorphic_projection(const FiberGrid& u, bool strict = false);
// (Id - iH) u = u_0 + 2 sum_{k<0} u_k; strict variant only zeroes k > 0.
FiberGrid antiholomorphic_projection(const FiberGrid& u, bool strict = false);

// Fiber mean broadcast back over theta.
FiberGrid mean_mode(const FiberGrid& u);

// Weighted inner product over the disk: e^{2 phi} dx dy dtheta.
Complex inner_product(const FiberGrid& a, const FiberGrid& b);
double norm2(const FiberGrid& a);
double sup_norm(const FiberGrid& a, double max_radius = 1.0);

FiberGrid operator+(const FiberGrid& a, const FiberGrid& b);
FiberGrid operator-(const FiberGrid& a, const FiberGrid& b);
FiberGrid scaled(const FiberGrid& a, Complex s);

// Pointwise attenuation matrices sampled on the grid.
struct AttenuationPlanes {
  GeomPtr geom;
  int n = 1;
  // row-major n x n matrices per node
  std::vector<Complex> ax, ay, phi;
  // star pieces: star F_A per node, and the coordinate components of
  // d Phi + [A, Phi]
  std::vector<Complex> star_f, dphi_x, dphi_y;
};

AttenuationPlanes make_attenuation_planes(GeomPtr geom, const AttenuationPair& pair);

// A(x, v) u + Phi u
FiberGrid apply_attenuation(const AttenuationPlanes& planes, const FiberGrid& u);
// star A applied as a multiplication operator: A(x, v_perp) u.
FiberGrid apply_star_attenuation(const AttenuationPlanes& planes, const FiberGrid& u);
// (X + lambda V) u, optionally plus the attenuation term.
FiberGrid apply_transport(const FiberGrid& u, const AttenuationPlanes* planes = nullptr);

// sup norm over interior nodes of
// [H, X + lambda V + A + Phi] u - (Xperp + *A) u_0 - {(Xperp + *A) u}_0.
double commutator_residual(const AttenuationPlanes& planes, const FiberGrid& u);

struct EnergyIdentityTerms {
  double lhs = 0, rhs = 0, residual = 0;  // residual = |lhs-rhs| / (|lhs|+|rhs|)
};
EnergyIdentityTerms energy_identity_residual(const AttenuationPlanes& planes, const FiberGrid& u);

struct IntegratingFactorResult {
  FourierStack omega;
  double relative_residual = 0.0;  // |L w + a| / |a| over mask nodes
  int iterations = 0;
  bool converged = false;
};

// Least-squares holomorphic (layers 0..k_max) or antiholomorphic
// (-k_max..0) solution of (X + lambda V) w = -a by preconditioned CG on the
// normal equations.
IntegratingFactorResult solve_integrating_factor(GeomPtr geom, const FiberExpansion& attenuation,
                                                 bool holomorphic, int k_max,
                                                 double tol = 1e-10, long max_iter = -1);

}  // namespace magtomo
