#include "magtomo/fields.hpp"

#include <cmath>

#include "magtomo/errors.hpp"

namespace magtomo {

namespace {

const Complex kI(0.0, 1.0);

std::vector<Vec2> sample_points(bool boundary) {
  std::vector<Vec2> pts;
  const double golden = 2.39996322972865332;
  if (boundary) {
    for (int k = 0; k < 64; ++k) {
      double b = 2.0 * M_PI * k / 64.0;
      pts.push_back({std::cos(b), std::sin(b)});
    }
  } else {
    for (int k = 0; k < 48; ++k) {
      double r = std::sqrt((k + 0.5) / 48.0);
      double a = golden * k;
      pts.push_back({r * std::cos(a), r * std::sin(a)});
    }
  }
  return pts;
}

long binomial(int n, int k) {
  long r = 1;
  for (int j = 1; j <= k; ++j) r = r * (n - j + 1) / j;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// MatrixField

MatrixField::MatrixField(int n, std::vector<ExprPtr> entries) : n_(n), entries_(std::move(entries)) {
  if (static_cast<int>(entries_.size()) != n_ * n_) {
    throw ValidationError("matrix field entry count does not match rank");
  }
  compile();
}

void MatrixField::compile() {
  dx_.resize(entries_.size());
  dy_.resize(entries_.size());
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    dx_[k] = diff(entries_[k], 0);
    dy_[k] = diff(entries_[k], 1);
  }
  tape_ = ExprTape::compile(entries_);
  tape_dx_ = ExprTape::compile(dx_);
  tape_dy_ = ExprTape::compile(dy_);
}

MatrixField MatrixField::zero(int n) {
  std::vector<ExprPtr> e(n * n, make_const(0.0));
  return MatrixField(n, std::move(e));
}

MatrixField MatrixField::identity(int n) {
  std::vector<ExprPtr> e(n * n, make_const(0.0));
  for (int r = 0; r < n; ++r) e[r * n + r] = make_const(1.0);
  return MatrixField(n, std::move(e));
}

MatrixField MatrixField::from_strings(const std::vector<std::vector<std::string>>& rows) {
  int n = static_cast<int>(rows.size());
  std::vector<ExprPtr> e;
  e.reserve(n * n);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n) throw ValidationError("matrix field rows must be square");
    for (const auto& text : row) e.push_back(parse_expression(text));
  }
  return MatrixField(n, std::move(e));
}

void MatrixField::eval(double x, double y, MatrixC& out, EvalScratch& scratch) const {
  out.resize(n_, n_);
  tape_.eval(x, y, out.data(), scratch);
  out.transposeInPlace();  // tape writes row-major
}

void MatrixField::eval_dx(double x, double y, MatrixC& out, EvalScratch& scratch) const {
  out.resize(n_, n_);
  tape_dx_.eval(x, y, out.data(), scratch);
  out.transposeInPlace();
}

void MatrixField::eval_dy(double x, double y, MatrixC& out, EvalScratch& scratch) const {
  out.resize(n_, n_);
  tape_dy_.eval(x, y, out.data(), scratch);
  out.transposeInPlace();
}

MatrixField MatrixField::derivative(int var) const {
  std::vector<ExprPtr> e;
  e.reserve(entries_.size());
  for (const auto& f : entries_) e.push_back(diff(f, var));
  return MatrixField(n_, std::move(e));
}

MatrixField MatrixField::conjugate_transpose() const {
  std::vector<ExprPtr> e(entries_.size());
  for (int r = 0; r < n_; ++r) {
    for (int c = 0; c < n_; ++c) e[r * n_ + c] = conj_expr(entries_[c * n_ + r]);
  }
  return MatrixField(n_, std::move(e));
}

MatrixField MatrixField::scaled(const ExprPtr& s) const {
  std::vector<ExprPtr> e;
  e.reserve(entries_.size());
  for (const auto& f : entries_) e.push_back(mul(s, f));
  return MatrixField(n_, std::move(e));
}

MatrixField operator+(const MatrixField& a, const MatrixField& b) {
  std::vector<ExprPtr> e(a.entries_.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = add(a.entries_[k], b.entries_[k]);
  return MatrixField(a.n_, std::move(e));
}

MatrixField operator-(const MatrixField& a, const MatrixField& b) {
  std::vector<ExprPtr> e(a.entries_.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = sub(a.entries_[k], b.entries_[k]);
  return MatrixField(a.n_, std::move(e));
}

MatrixField operator*(const MatrixField& a, const MatrixField& b) {
  int n = a.n_;
  std::vector<ExprPtr> e(n * n, make_const(0.0));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      ExprPtr acc = make_const(0.0);
      for (int k = 0; k < n; ++k) acc = add(acc, mul(a.entries_[r * n + k], b.entries_[k * n + c]));
      e[r * n + c] = acc;
    }
  }
  return MatrixField(n, std::move(e));
}

MatrixField MatrixField::commutator(const MatrixField& a, const MatrixField& b) {
  return a * b - b * a;
}

double MatrixField::skew_hermitian_defect() const {
  EvalScratch scratch;
  MatrixC m;
  double worst = 0.0;
  for (const Vec2& p : sample_points(false)) {
    eval(p.x, p.y, m, scratch);
    worst = std::max(worst, (m + m.adjoint().eval()).cwiseAbs().maxCoeff());
  }
  return worst;
}

double MatrixField::unitarity_defect() const {
  EvalScratch scratch;
  MatrixC m;
  double worst = 0.0;
  MatrixC id = MatrixC::Identity(n_, n_);
  for (const Vec2& p : sample_points(false)) {
    eval(p.x, p.y, m, scratch);
    worst = std::max(worst, (m.adjoint() * m - id).cwiseAbs().maxCoeff());
  }
  return worst;
}

double MatrixField::boundary_identity_defect() const {
  EvalScratch scratch;
  MatrixC m;
  double worst = 0.0;
  MatrixC id = MatrixC::Identity(n_, n_);
  for (const Vec2& p : sample_points(true)) {
    eval(p.x, p.y, m, scratch);
    worst = std::max(worst, (m - id).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// AttenuationPair

AttenuationPair::AttenuationPair(MatrixField a_x, MatrixField a_y, MatrixField phi,
                                 double skew_tol)
    : n_(a_x.n()), a_x_(std::move(a_x)), a_y_(std::move(a_y)), phi_(std::move(phi)) {
  if (a_y_.n() != n_ || phi_.n() != n_) throw ValidationError("attenuation ranks disagree");
  if (n_ < 1 || n_ > 3) throw ValidationError("supported bundle ranks are 1..3");
  double defect = skew_hermitian_defect();
  if (defect > skew_tol) {
    throw ValidationError("connection and Higgs entries must be skew-Hermitian (defect " +
                          std::to_string(defect) + ")");
  }
}

AttenuationPair AttenuationPair::zero(int n) {
  return AttenuationPair(MatrixField::zero(n), MatrixField::zero(n), MatrixField::zero(n));
}

double AttenuationPair::skew_hermitian_defect() const {
  return std::max({a_x_.skew_hermitian_defect(), a_y_.skew_hermitian_defect(),
                   phi_.skew_hermitian_defect()});
}

void AttenuationPair::attenuation_at(const Surface& surface, double x, double y, double theta,
                                     MatrixC& out, EvalScratch& scratch) const {
  static thread_local MatrixC ax, ay, ph;
  a_x_.eval(x, y, ax, scratch);
  a_y_.eval(x, y, ay, scratch);
  phi_.eval(x, y, ph, scratch);
  double em = std::exp(-surface.phi(x, y));
  out = em * (std::cos(theta) * ax + std::sin(theta) * ay) + ph;
}

AttenuationPair gauge_transform(const AttenuationPair& pair, const MatrixField& Q,
                                double boundary_tol) {
  double u_defect = Q.unitarity_defect();
  if (u_defect > 1e-9) {
    throw ValidationError("gauge field is not unitary (defect " + std::to_string(u_defect) + ")");
  }
  double b_defect = Q.boundary_identity_defect();
  if (b_defect > boundary_tol) {
    throw ValidationError("gauge field must equal the identity on the boundary (defect " +
                          std::to_string(b_defect) + ")");
  }
  MatrixField qinv = Q.conjugate_transpose();
  MatrixField ax = qinv * Q.derivative(0) + qinv * pair.A_x() * Q;
  MatrixField ay = qinv * Q.derivative(1) + qinv * pair.A_y() * Q;
  MatrixField ph = qinv * pair.Phi() * Q;
  // Symbolic products keep skew-Hermitian-ness only up to roundoff.
  return AttenuationPair(std::move(ax), std::move(ay), std::move(ph), 1e-9);
}

MatrixField star_curvature(const Surface& surface, const AttenuationPair& pair) {
  MatrixField f = pair.A_y().derivative(0) - pair.A_x().derivative(1) +
                  MatrixField::commutator(pair.A_x(), pair.A_y());
  ExprPtr inv_area = exp_expr(mul(make_const(-2.0), surface.phi_expr()));
  return f.scaled(inv_area);
}

CovariantHiggsDerivative covariant_higgs_derivative(const AttenuationPair& pair) {
  CovariantHiggsDerivative d;
  d.sx = pair.Phi().derivative(0) + MatrixField::commutator(pair.A_x(), pair.Phi());
  d.sy = pair.Phi().derivative(1) + MatrixField::commutator(pair.A_y(), pair.Phi());
  return d;
}

// ---------------------------------------------------------------------------
// FiberExpansion

FiberExpansion FiberExpansion::scalar_mode(int k, ExprPtr coefficient) {
  FiberExpansion fe(1);
  fe.set_mode(k, {std::move(coefficient)});
  return fe;
}

int FiberExpansion::degree() const {
  int d = 0;
  for (const auto& [k, comps] : modes_) d = std::max(d, std::abs(k));
  return d;
}

const std::vector<ExprPtr>* FiberExpansion::mode(int k) const {
  auto it = modes_.find(k);
  return it == modes_.end() ? nullptr : &it->second;
}

void FiberExpansion::add_to_mode(int k, int component, const ExprPtr& e) {
  auto& comps = modes_[k];
  if (comps.empty()) comps.assign(n_, make_const(0.0));
  comps[component] = add(comps[component], e);
  compiled_ = false;
}

void FiberExpansion::set_mode(int k, std::vector<ExprPtr> comps) {
  if (static_cast<int>(comps.size()) != n_) throw ValidationError("mode component count mismatch");
  modes_[k] = std::move(comps);
  compiled_ = false;
}

void FiberExpansion::compile() {
  std::vector<ExprPtr> outs;
  tape_modes_.clear();
  for (const auto& [k, comps] : modes_) {
    tape_modes_.push_back(k);
    for (const auto& c : comps) outs.push_back(c);
  }
  tape_ = ExprTape::compile(outs);
  compiled_ = true;
}

VectorC FiberExpansion::eval(double x, double y, double theta, EvalScratch& scratch) const {
  if (!compiled_) const_cast<FiberExpansion*>(this)->compile();
  static thread_local std::vector<Complex> coeffs;
  coeffs.resize(tape_.n_outputs());
  tape_.eval(x, y, coeffs.data(), scratch);
  VectorC out = VectorC::Zero(n_);
  for (std::size_t m = 0; m < tape_modes_.size(); ++m) {
    Complex phase = std::exp(Complex(0.0, tape_modes_[m] * theta));
    for (int c = 0; c < n_; ++c) out(c) += phase * coeffs[m * n_ + c];
  }
  return out;
}

FiberExpansion fe_add(const FiberExpansion& a, const FiberExpansion& b) {
  FiberExpansion out(a.n());
  for (const auto& [k, comps] : a.modes()) out.set_mode(k, comps);
  for (const auto& [k, comps] : b.modes()) {
    for (int c = 0; c < b.n(); ++c) out.add_to_mode(k, c, comps[c]);
  }
  return out;
}

FiberExpansion fe_scale(const ExprPtr& s, const FiberExpansion& a) {
  FiberExpansion out(a.n());
  for (const auto& [k, comps] : a.modes()) {
    std::vector<ExprPtr> scaled;
    scaled.reserve(comps.size());
    for (const auto& c : comps) scaled.push_back(mul(s, c));
    out.set_mode(k, std::move(scaled));
  }
  return out;
}

FiberExpansion fe_mul(const FiberExpansion& a, const FiberExpansion& b) {
  if (a.n() != 1 || b.n() != 1) throw ValidationError("fiber product requires scalar expansions");
  FiberExpansion out(1);
  for (const auto& [ka, ca] : a.modes()) {
    for (const auto& [kb, cb] : b.modes()) {
      out.add_to_mode(ka + kb, 0, mul(ca[0], cb[0]));
    }
  }
  return out;
}

FiberExpansion apply_V_sym(const FiberExpansion& u) {
  FiberExpansion out(u.n());
  for (const auto& [k, comps] : u.modes()) {
    std::vector<ExprPtr> scaled;
    scaled.reserve(comps.size());
    for (const auto& c : comps) scaled.push_back(mul(make_const(Complex(0.0, k)), c));
    out.set_mode(k, std::move(scaled));
  }
  return out;
}

namespace {

// Mode-raising / lowering coefficient operators of the horizontal frame
// fields.  Raising sends layer k to k+1 with
//   (e^{-phi}/2) [ (d_x - i d_y) c - k (phi_x - i phi_y) c ],
// lowering sends k to k-1 with the conjugate-sign expression.
struct FrameOps {
  ExprPtr half_em;   // e^{-phi}/2
  ExprPtr px_m_ipy;  // phi_x - i phi_y
  ExprPtr px_p_ipy;  // phi_x + i phi_y

  explicit FrameOps(const Surface& s) {
    half_em = mul(make_const(0.5), exp_expr(neg(s.phi_expr())));
    px_m_ipy = sub(s.phi_x_expr(), mul(make_const(kI), s.phi_y_expr()));
    px_p_ipy = add(s.phi_x_expr(), mul(make_const(kI), s.phi_y_expr()));
  }

  ExprPtr raise(int k, const ExprPtr& c) const {
    ExprPtr d = sub(diff(c, 0), mul(make_const(kI), diff(c, 1)));
    return mul(half_em, sub(d, mul(make_const(static_cast<double>(k)), mul(px_m_ipy, c))));
  }
  ExprPtr lower(int k, const ExprPtr& c) const {
    ExprPtr d = add(diff(c, 0), mul(make_const(kI), diff(c, 1)));
    return mul(half_em, add(d, mul(make_const(static_cast<double>(k)), mul(px_p_ipy, c))));
  }
};

}  // namespace

FiberExpansion apply_X_sym(const Surface& surface, const FiberExpansion& u) {
  FrameOps ops(surface);
  FiberExpansion out(u.n());
  for (const auto& [k, comps] : u.modes()) {
    for (int c = 0; c < u.n(); ++c) {
      out.add_to_mode(k + 1, c, ops.raise(k, comps[c]));
      out.add_to_mode(k - 1, c, ops.lower(k, comps[c]));
    }
  }
  return out;
}

FiberExpansion apply_Xperp_sym(const Surface& surface, const FiberExpansion& u) {
  FrameOps ops(surface);
  const ExprPtr minus_i = make_const(-kI);
  const ExprPtr plus_i = make_const(kI);
  FiberExpansion out(u.n());
  for (const auto& [k, comps] : u.modes()) {
    for (int c = 0; c < u.n(); ++c) {
      out.add_to_mode(k + 1, c, mul(minus_i, ops.raise(k, comps[c])));
      out.add_to_mode(k - 1, c, mul(plus_i, ops.lower(k, comps[c])));
    }
  }
  return out;
}

FiberExpansion apply_flow_sym(const MagneticSystem& system, const FiberExpansion& u) {
  FiberExpansion xv = apply_X_sym(system.surface(), u);
  for (const auto& [k, comps] : u.modes()) {
    ExprPtr ikl = mul(make_const(Complex(0.0, k)), system.lambda_expr());
    for (int c = 0; c < u.n(); ++c) xv.add_to_mode(k, c, mul(ikl, comps[c]));
  }
  return xv;
}

FiberExpansion apply_attenuation_sym(const Surface& surface, const AttenuationPair& pair,
                                     const FiberExpansion& u) {
  const int n = pair.n();
  ExprPtr half_em = mul(make_const(0.5), exp_expr(neg(surface.phi_expr())));
  // a_plus = (e^{-phi}/2)(A_x - i A_y), a_minus = (e^{-phi}/2)(A_x + i A_y)
  FiberExpansion out(n);
  for (const auto& [k, comps] : u.modes()) {
    for (int r = 0; r < n; ++r) {
      ExprPtr up = make_const(0.0), dn = make_const(0.0), ph = make_const(0.0);
      for (int c = 0; c < n; ++c) {
        ExprPtr ax = pair.A_x().entry(r, c);
        ExprPtr ay = pair.A_y().entry(r, c);
        up = add(up, mul(sub(ax, mul(make_const(kI), ay)), comps[c]));
        dn = add(dn, mul(add(ax, mul(make_const(kI), ay)), comps[c]));
        ph = add(ph, mul(pair.Phi().entry(r, c), comps[c]));
      }
      out.add_to_mode(k + 1, r, mul(half_em, up));
      out.add_to_mode(k - 1, r, mul(half_em, dn));
      out.add_to_mode(k, r, ph);
    }
  }
  return out;
}

FiberExpansion apply_transport_sym(const MagneticSystem& system, const AttenuationPair& pair,
                                   const FiberExpansion& u) {
  return fe_add(apply_flow_sym(system, u),
                apply_attenuation_sym(system.surface(), pair, u));
}

// ---------------------------------------------------------------------------
// Symmetric tensors

FiberExpansion tensor_to_sm_function(const Surface& surface, const SymmetricTensor& tensor) {
  if (static_cast<int>(tensor.comp.size()) != tensor.order + 1) {
    throw ValidationError("tensor component count must be order + 1");
  }
  if (tensor.order == 0) {
    return FiberExpansion::scalar_mode(0, tensor.comp[0]);
  }
  ExprPtr em = exp_expr(neg(surface.phi_expr()));
  // v^1 and v^2 as scalar expansions: e^{-phi} cos/sin theta.
  FiberExpansion v1(1), v2(1);
  v1.set_mode(1, {mul(make_const(0.5), em)});
  v1.add_to_mode(-1, 0, mul(make_const(0.5), em));
  v2.set_mode(1, {mul(make_const(Complex(0.0, -0.5)), em)});
  v2.add_to_mode(-1, 0, mul(make_const(Complex(0.0, 0.5)), em));

  FiberExpansion total(1);
  for (int j = 0; j <= tensor.order; ++j) {
    FiberExpansion term = FiberExpansion::scalar_mode(
        0, mul(make_const(static_cast<double>(binomial(tensor.order, j))), tensor.comp[j]));
    for (int a = 0; a < tensor.order - j; ++a) term = fe_mul(term, v1);
    for (int b = 0; b < j; ++b) term = fe_mul(term, v2);
    total = fe_add(total, term);
  }
  return total;
}

SymmetricTensor symmetric_inner_derivative(const Surface& surface, const SymmetricTensor& h) {
  const int m = h.order + 1;  // output order
  const ExprPtr px = surface.phi_x_expr();
  const ExprPtr py = surface.phi_y_expr();

  // Christoffel symbols of e^{2 phi} delta.
  // G^x_{xx}=px  G^x_{xy}=py  G^x_{yy}=-px
  // G^y_{xx}=-py G^y_{xy}=px  G^y_{yy}=py
  auto comp = [&](int i) -> ExprPtr {
    // 0 <= i <= h.order: count of y indices
    return h.comp[i];
  };

  // Covariant derivative slot j in {x, y} against a symmetric block with i
  // y-indices out of (m - 1) total.
  auto nabla = [&](int j, int i) -> ExprPtr {
    int nx = (m - 1) - i;  // x indices in the block
    ExprPtr out = diff(comp(i), j);
    if (j == 0) {
      if (nx > 0) {
        out = sub(out, mul(make_const(static_cast<double>(nx)),
                           add(mul(px, comp(i)), mul(neg(py), comp(i + 1)))));
      }
      if (i > 0) {
        out = sub(out, mul(make_const(static_cast<double>(i)),
                           add(mul(py, comp(i - 1)), mul(px, comp(i)))));
      }
    } else {
      if (nx > 0) {
        out = sub(out, mul(make_const(static_cast<double>(nx)),
                           add(mul(py, comp(i)), mul(px, comp(i + 1)))));
      }
      if (i > 0) {
        out = sub(out, mul(make_const(static_cast<double>(i)),
                           add(mul(neg(px), comp(i - 1)), mul(py, comp(i)))));
      }
    }
    return out;
  };

  SymmetricTensor out;
  out.order = m;
  out.comp.resize(m + 1);
  for (int b = 0; b <= m; ++b) {
    // b y-indices among m; average the slot choices.
    ExprPtr acc = make_const(0.0);
    if (m - b > 0) acc = add(acc, mul(make_const(static_cast<double>(m - b)), nabla(0, b)));
    if (b > 0) acc = add(acc, mul(make_const(static_cast<double>(b)), nabla(1, b - 1)));
    out.comp[b] = div_expr(acc, make_const(static_cast<double>(m)));
  }
  return out;
}

KernelElement make_kernel_element(const Surface& surface, const AttenuationPair& pair,
                                  const std::vector<ExprPtr>& p, double boundary_tol) {
  const int n = pair.n();
  if (static_cast<int>(p.size()) != n) throw ValidationError("kernel seed size must equal rank");

  EvalScratch scratch;
  ExprTape ptape = ExprTape::compile(p);
  std::vector<Complex> vals(n);
  for (const Vec2& q : sample_points(true)) {
    ptape.eval(q.x, q.y, vals.data(), scratch);
    for (const Complex& v : vals) {
      if (std::abs(v) > boundary_tol) {
        throw ValidationError("kernel seed must vanish on the boundary circle");
      }
    }
  }

  KernelElement ke;
  ke.F.resize(n);
  ke.sigma_x.resize(n);
  ke.sigma_y.resize(n);
  for (int r = 0; r < n; ++r) {
    ExprPtr f = make_const(0.0), sx = diff(p[r], 0), sy = diff(p[r], 1);
    for (int c = 0; c < n; ++c) {
      f = add(f, mul(pair.Phi().entry(r, c), p[c]));
      sx = add(sx, mul(pair.A_x().entry(r, c), p[c]));
      sy = add(sy, mul(pair.A_y().entry(r, c), p[c]));
    }
    ke.F[r] = f;
    ke.sigma_x[r] = sx;
    ke.sigma_y[r] = sy;
  }

  ExprPtr half_em = mul(make_const(0.5), exp_expr(neg(surface.phi_expr())));
  FiberExpansion fe(n);
  for (int r = 0; r < n; ++r) {
    fe.add_to_mode(0, r, ke.F[r]);
    fe.add_to_mode(1, r, mul(half_em, sub(ke.sigma_x[r], mul(make_const(kI), ke.sigma_y[r]))));
    fe.add_to_mode(-1, r, mul(half_em, add(ke.sigma_x[r], mul(make_const(kI), ke.sigma_y[r]))));
  }
  ke.as_function = std::move(fe);
  return ke;
}

}  // namespace magtomo
