#include "scenfilter/qp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace scenfilter {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Index = Eigen::Index;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Problem after fixed-variable substitution and column permutation. Columns
// [0, num_elim) form the block whose Newton matrix is diagonal and is
// eliminated by a Schur complement; the remaining columns are factored densely.
struct StandardForm {
  SpMat Q, Aeq, Ain;
  Vector c, beq, bin, lower, upper;
  std::vector<unsigned char> has_lower, has_upper;
  Index num_elim = 0;
};

// Greedy choice of variables whose block of Q + Ain' D Ain is diagonal for any
// positive D: no off-diagonal Q entry and no inequality row shared with
// another chosen variable.
std::vector<Index> choose_eliminated(const SpMat& Q, const SpMat& Ain, const std::vector<unsigned char>& has_lower,
                                     const std::vector<unsigned char>& has_upper) {
  const Index m = Q.cols();
  std::vector<unsigned char> eligible(m, 1);
  for (Index j = 0; j < m; ++j) {
    for (SpMat::InnerIterator it(Q, j); it; ++it) {
      if (it.row() != j && it.value() != 0.0) eligible[j] = 0;
    }
  }
  std::vector<Index> row_count(m, 0);
  for (Index j = 0; j < m; ++j) row_count[j] = Ain.col(j).nonZeros();
  for (Index j = 0; j < m; ++j) {
    double qjj = 0.0;
    for (SpMat::InnerIterator it(Q, j); it; ++it) {
      if (it.row() == j) qjj = it.value();
    }
    if (qjj <= 0.0 && !has_lower[j] && !has_upper[j] && row_count[j] == 0) eligible[j] = 0;
  }
  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return row_count[a] < row_count[b]; });

  std::vector<unsigned char> row_taken(Ain.rows(), 0);
  std::vector<Index> chosen;
  for (Index j : order) {
    if (!eligible[j]) continue;
    bool clash = false;
    for (SpMat::InnerIterator it(Ain, j); it; ++it) {
      if (row_taken[it.row()]) {
        clash = true;
        break;
      }
    }
    if (clash) continue;
    for (SpMat::InnerIterator it(Ain, j); it; ++it) row_taken[it.row()] = 1;
    chosen.push_back(j);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

struct IpmResult {
  QpStatus status = QpStatus::NumericalFailure;
  Vector v, y, lam, zl, zu;
  int iterations = 0;
  bool suspect_infeasible = false;
  std::string message;
};

class InteriorPoint {
 public:
  InteriorPoint(const StandardForm& sf, const QpOptions& opt) : sf_(sf), opt_(opt) {
    m_ = sf_.c.size();
    me_ = sf_.Aeq.rows();
    mi_ = sf_.Ain.rows();
    ne_ = sf_.num_elim;
    nr_ = m_ - ne_;
    AinE_ = sf_.Ain.leftCols(ne_);
    AinR_ = sf_.Ain.rightCols(nr_);
    AeqE_ = sf_.Aeq.leftCols(ne_);
    AeqR_ = sf_.Aeq.rightCols(nr_);
    QRE_ = sf_.Q.block(ne_, 0, nr_, ne_);
    QRR_ = Matrix(sf_.Q.block(ne_, ne_, nr_, nr_));
    qdiagE_ = Vector::Zero(ne_);
    for (Index j = 0; j < ne_; ++j) qdiagE_(j) = sf_.Q.coeff(j, j);
    AinT_ = sf_.Ain.transpose();
    AeqT_ = sf_.Aeq.transpose();
    num_lower_ = std::count(sf_.has_lower.begin(), sf_.has_lower.end(), 1);
    num_upper_ = std::count(sf_.has_upper.begin(), sf_.has_upper.end(), 1);
    lmask_ = Vector::Zero(m_);
    umask_ = Vector::Zero(m_);
    for (Index j = 0; j < m_; ++j) {
      if (sf_.has_lower[j]) lmask_(j) = 1.0;
      if (sf_.has_upper[j]) umask_(j) = 1.0;
    }
    double bnorm = std::max(inf_norm(sf_.beq), inf_norm(sf_.bin));
    for (Index j = 0; j < m_; ++j) {
      if (sf_.has_lower[j]) bnorm = std::max(bnorm, std::abs(sf_.lower(j)));
      if (sf_.has_upper[j]) bnorm = std::max(bnorm, std::abs(sf_.upper(j)));
    }
    pscale_ = 1.0 + bnorm;
    dscale_ = 1.0 + inf_norm(sf_.c);
  }

  IpmResult run(const std::optional<Vector>& warm) {
    IpmResult res;
    initialize(warm);
    const Index nc = mi_ + num_lower_ + num_upper_;
    double best_merit = kInf;
    int stall = 0;

    for (int iter = 0; iter <= opt_.max_iterations; ++iter) {
      res.iterations = iter;
      residuals();
      const double mu = nc > 0 ? complementarity() / static_cast<double>(nc) : 0.0;
      const double pinf = primal_infeasibility() / pscale_;
      const double dinf = inf_norm(rd_) / dscale_;
      const double pobj = 0.5 * v_.dot(sf_.Q * v_) + sf_.c.dot(v_);
      const double rgap = static_cast<double>(nc) * mu / (1.0 + std::abs(pobj));

      if (pinf <= opt_.feasibility_tol && dinf <= opt_.feasibility_tol && rgap <= opt_.gap_tol) {
        res.status = QpStatus::Optimal;
        break;
      }
      const double merit = std::max({pinf, dinf, rgap});
      if (merit < 0.5 * best_merit) {
        best_merit = merit;
        stall = 0;
      } else if (++stall >= 12) {
        res.status = merit <= opt_.fallback_tol ? QpStatus::Optimal : QpStatus::NumericalFailure;
        res.message = "progress stalled";
        res.suspect_infeasible = pinf > opt_.fallback_tol;
        break;
      }
      if (iter == opt_.max_iterations) {
        res.status = merit <= opt_.fallback_tol ? QpStatus::Optimal : QpStatus::IterationLimit;
        res.suspect_infeasible = pinf > opt_.fallback_tol;
        break;
      }
      const double dual_size = std::max({inf_norm(lam_), inf_norm(zl_), inf_norm(zu_), inf_norm(y_)});
      if (dual_size > 1e12 * dscale_ && pinf > opt_.fallback_tol) {
        res.status = QpStatus::NumericalFailure;
        res.suspect_infeasible = true;
        res.message = "dual iterates diverged";
        break;
      }

      if (!factor()) {
        res.status = merit <= opt_.fallback_tol ? QpStatus::Optimal : QpStatus::NumericalFailure;
        res.message = "singular Newton system";
        res.suspect_infeasible = pinf > opt_.fallback_tol;
        break;
      }

      // Predictor.
      Direction aff = direction(Vector::Zero(mi_), Vector::Zero(m_), Vector::Zero(m_), 0.0);
      const double alpha_aff = max_step(aff);
      double mu_aff = mu;
      if (nc > 0) {
        mu_aff = complementarity_after(aff, alpha_aff) / static_cast<double>(nc);
      }
      const double sigma = mu > 0.0 ? std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0) : 0.0;

      // Corrector with second-order terms.
      Direction d = direction(aff.ds.cwiseProduct(aff.dlam), aff.dwl.cwiseProduct(aff.dzl).cwiseProduct(lmask_),
                              aff.dwu.cwiseProduct(aff.dzu).cwiseProduct(umask_), sigma * mu);
      double alpha = std::min(1.0, 0.995 * max_step(d));
      if (nc > 0 && complementarity_after(d, alpha) > complementarity()) {
        // The second-order term can drive the iterates in circles; take the
        // plain centered step when the corrected one fails to reduce complementarity.
        d = direction(Vector::Zero(mi_), Vector::Zero(m_), Vector::Zero(m_), sigma * mu);
        alpha = std::min(1.0, 0.995 * max_step(d));
      }
      if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        res.status = merit <= opt_.fallback_tol ? QpStatus::Optimal : QpStatus::NumericalFailure;
        res.message = "zero step length";
        res.suspect_infeasible = pinf > opt_.fallback_tol;
        break;
      }
      v_ += alpha * d.dv;
      y_ += alpha * d.dy;
      s_ += alpha * d.ds;
      lam_ += alpha * d.dlam;
      wl_ += alpha * d.dwl.cwiseProduct(lmask_);
      zl_ += alpha * d.dzl.cwiseProduct(lmask_);
      wu_ += alpha * d.dwu.cwiseProduct(umask_);
      zu_ += alpha * d.dzu.cwiseProduct(umask_);
    }
    res.v = v_;
    res.y = y_;
    res.lam = lam_;
    res.zl = zl_.cwiseProduct(lmask_);
    res.zu = zu_.cwiseProduct(umask_);
    return res;
  }

 private:
  struct Direction {
    Vector dv, dy, ds, dlam, dwl, dzl, dwu, dzu;
  };

  void initialize(const std::optional<Vector>& warm) {
    v_ = Vector::Zero(m_);
    if (warm && warm->size() == m_) v_ = *warm;
    for (Index j = 0; j < m_; ++j) {
      const bool hl = sf_.has_lower[j], hu = sf_.has_upper[j];
      const double l = sf_.lower(j), u = sf_.upper(j);
      if (hl && hu) {
        const double margin = std::min(1.0, 0.25 * (u - l));
        v_(j) = std::clamp(v_(j), l + margin, u - margin);
      } else if (hl) {
        v_(j) = std::max(v_(j), l + 1.0);
      } else if (hu) {
        v_(j) = std::min(v_(j), u - 1.0);
      }
    }
    y_ = Vector::Zero(me_);
    const Vector ax = sf_.Ain * v_ - sf_.bin;
    s_ = ax.cwiseMax(1.0);
    lam_ = Vector::Ones(mi_);
    wl_ = Vector::Ones(m_);
    wu_ = Vector::Ones(m_);
    for (Index j = 0; j < m_; ++j) {
      if (sf_.has_lower[j]) wl_(j) = std::max(v_(j) - sf_.lower(j), 1e-2);
      if (sf_.has_upper[j]) wu_(j) = std::max(sf_.upper(j) - v_(j), 1e-2);
    }
    zl_ = lmask_;
    zu_ = umask_;
  }

  void residuals() {
    rd_ = sf_.Q * v_ + sf_.c - AeqT_ * y_ - AinT_ * lam_ - zl_.cwiseProduct(lmask_) + zu_.cwiseProduct(umask_);
    req_ = sf_.Aeq * v_ - sf_.beq;
    rin_ = sf_.Ain * v_ - s_ - sf_.bin;
    rl_ = (v_ - wl_ - sf_.lower.cwiseProduct(lmask_)).cwiseProduct(lmask_);
    ru_ = (v_ + wu_ - sf_.upper.cwiseProduct(umask_)).cwiseProduct(umask_);
  }

  double complementarity() const {
    return s_.dot(lam_) + lmask_.dot(wl_.cwiseProduct(zl_)) + umask_.dot(wu_.cwiseProduct(zu_));
  }

  double complementarity_after(const Direction& d, double alpha) const {
    return (s_ + alpha * d.ds).dot(lam_ + alpha * d.dlam) +
           lmask_.dot(((wl_ + alpha * d.dwl).array() * (zl_ + alpha * d.dzl).array()).matrix()) +
           umask_.dot(((wu_ + alpha * d.dwu).array() * (zu_ + alpha * d.dzu).array()).matrix());
  }

  double primal_infeasibility() const {
    return std::max({inf_norm(req_), inf_norm(rin_), inf_norm(rl_), inf_norm(ru_)});
  }

  bool factor() {
    const double rho = 1e-12, delta = 1e-12;
    din_ = lam_.cwiseQuotient(s_);
    bdiag_ = Vector::Zero(m_);
    for (Index j = 0; j < m_; ++j) {
      if (sf_.has_lower[j]) bdiag_(j) += zl_(j) / wl_(j);
      if (sf_.has_upper[j]) bdiag_(j) += zu_(j) / wu_(j);
    }
    // Diagonal of the eliminated block.
    hE_ = qdiagE_ + bdiag_.head(ne_);
    for (Index j = 0; j < ne_; ++j) {
      for (SpMat::InnerIterator it(AinE_, j); it; ++it) hE_(j) += din_(it.row()) * it.value() * it.value();
    }
    hE_.array() += rho;
    const Vector hinv = hE_.cwiseInverse();

    const SpMat DAinE = din_.asDiagonal() * AinE_;
    const SpMat HRE = QRE_ + SpMat(AinR_.transpose() * DAinE);
    Matrix HRR = QRR_ + Matrix(AinR_.transpose() * (din_.asDiagonal() * AinR_));
    HRR.diagonal() += bdiag_.tail(nr_);
    HRR.diagonal().array() += rho;

    const Index ns = nr_ + me_;
    Matrix S(ns, ns);
    S.topLeftCorner(nr_, nr_) = HRR - Matrix(HRE * hinv.asDiagonal() * HRE.transpose());
    const Matrix SRe = Matrix(AeqR_.transpose()) - Matrix(HRE * hinv.asDiagonal() * AeqE_.transpose());
    S.topRightCorner(nr_, me_) = SRe;
    S.bottomLeftCorner(me_, nr_) = SRe.transpose();
    S.bottomRightCorner(me_, me_) = -Matrix(AeqE_ * hinv.asDiagonal() * AeqE_.transpose());
    S.bottomRightCorner(me_, me_).diagonal().array() -= delta;
    HRE_ = HRE;
    hinv_ = hinv;
    if (ns > 0) {
      lu_.compute(S);
      if (!std::isfinite(lu_.rcond()) || lu_.rcond() < 1e-20) return false;
    }
    return true;
  }

  // Solves [H Aeq'; Aeq 0] [dv; w] = [rv; re] through the Schur complement.
  void schur_solve(const Vector& rv, const Vector& re, Vector& dv, Vector& w) const {
    const Vector rE = rv.head(ne_);
    Vector red(nr_ + me_);
    const Vector t = hinv_.cwiseProduct(rE);
    red.head(nr_) = rv.tail(nr_) - HRE_ * t;
    red.tail(me_) = re - AeqE_ * t;
    Vector sol = red.size() > 0 ? Vector(lu_.solve(red)) : Vector(red);
    dv.resize(m_);
    dv.tail(nr_) = sol.head(nr_);
    w = sol.tail(me_);
    dv.head(ne_) = hinv_.cwiseProduct(rE - HRE_.transpose() * sol.head(nr_) - AeqE_.transpose() * w);
  }

  Vector apply_h(const Vector& x) const {
    return sf_.Q * x + AinT_ * din_.cwiseProduct(sf_.Ain * x) + bdiag_.cwiseProduct(x);
  }

  void kkt_solve(const Vector& rv, const Vector& re, Vector& dv, Vector& w) const {
    schur_solve(rv, re, dv, w);
    for (int k = 0; k < 3; ++k) {
      const Vector ev = rv - apply_h(dv) - AeqT_ * w;
      const Vector ee = re - sf_.Aeq * dv;
      if (std::max(inf_norm(ev), inf_norm(ee)) <= 1e-15 * (1.0 + std::max(inf_norm(rv), inf_norm(re)))) break;
      Vector cv, cw;
      schur_solve(ev, ee, cv, cw);
      dv += cv;
      w += cw;
    }
  }

  Direction direction(const Vector& corr_in, const Vector& corr_l, const Vector& corr_u, double target) const {
    const Vector rsl = (s_.cwiseProduct(lam_) + corr_in).array() - target;
    const Vector rlc = ((wl_.cwiseProduct(zl_) + corr_l).array() - target).matrix().cwiseProduct(lmask_);
    const Vector ruc = ((wu_.cwiseProduct(zu_) + corr_u).array() - target).matrix().cwiseProduct(umask_);

    Vector rhs = -rd_ - AinT_ * (rsl + lam_.cwiseProduct(rin_)).cwiseQuotient(s_);
    rhs -= (rlc + zl_.cwiseProduct(rl_)).cwiseQuotient(wl_).cwiseProduct(lmask_);
    rhs += (ruc - zu_.cwiseProduct(ru_)).cwiseQuotient(wu_).cwiseProduct(umask_);

    Direction d;
    Vector w;
    kkt_solve(rhs, -req_, d.dv, w);
    d.dy = -w;
    d.ds = sf_.Ain * d.dv + rin_;
    d.dlam = -(rsl + lam_.cwiseProduct(d.ds)).cwiseQuotient(s_);
    d.dwl = (d.dv + rl_).cwiseProduct(lmask_);
    d.dzl = -(rlc + zl_.cwiseProduct(d.dwl)).cwiseQuotient(wl_).cwiseProduct(lmask_);
    d.dwu = (-d.dv - ru_).cwiseProduct(umask_);
    d.dzu = -(ruc + zu_.cwiseProduct(d.dwu)).cwiseQuotient(wu_).cwiseProduct(umask_);
    return d;
  }

  static double ratio_test(const Vector& x, const Vector& dx, double alpha) {
    for (Index i = 0; i < x.size(); ++i) {
      if (dx(i) < 0.0) alpha = std::min(alpha, -x(i) / dx(i));
    }
    return alpha;
  }

  double max_step(const Direction& d) const {
    double a = 1.0;
    a = ratio_test(s_, d.ds, a);
    a = ratio_test(lam_, d.dlam, a);
    a = ratio_test(wl_, d.dwl, a);
    a = ratio_test(zl_, d.dzl, a);
    a = ratio_test(wu_, d.dwu, a);
    a = ratio_test(zu_, d.dzu, a);
    return a;
  }

  const StandardForm& sf_;
  const QpOptions& opt_;
  Index m_ = 0, me_ = 0, mi_ = 0, ne_ = 0, nr_ = 0;
  Index num_lower_ = 0, num_upper_ = 0;
  double pscale_ = 1.0, dscale_ = 1.0;
  SpMat AinE_, AinR_, AeqE_, AeqR_, QRE_, AinT_, AeqT_, HRE_;
  Matrix QRR_;
  Vector qdiagE_, lmask_, umask_;

  Vector v_, y_, s_, lam_, wl_, zl_, wu_, zu_;
  Vector rd_, req_, rin_, rl_, ru_;
  Vector din_, bdiag_, hE_, hinv_;
  Eigen::PartialPivLU<Matrix> lu_;
};

// Variables are kept where lower < upper; equal bounds fix the variable.
struct Reduction {
  std::vector<Index> free_cols;
  std::vector<Index> eq_rows, in_rows;
  Vector fixed_values;  // full length, only meaningful at fixed columns
};

SpMat to_sparse(const Matrix& m) { return m.sparseView(0.0, 0.0); }

QpSolution infeasible_solution(ConstraintClass cls, double violation, std::string message) {
  QpSolution sol;
  sol.status = QpStatus::Infeasible;
  sol.infeasible_class = cls;
  sol.phase_one_violation = violation;
  sol.message = std::move(message);
  return sol;
}

QpSolution solve_impl(const QuadraticProgram& input, const QpOptions& options, bool classify);

// Minimizes the total violation of the general constraints with bounds kept hard.
QpSolution phase_one(const QuadraticProgram& qp) {
  const Index m = qp.num_variables(), me = qp.Aeq.rows(), mi = qp.Ain.rows();
  const Index total = m + 2 * me + mi;
  QuadraticProgram p1 = QuadraticProgram::with_variables(total);
  p1.c.tail(2 * me + mi).setOnes();
  p1.lower.head(m) = qp.lower;
  p1.upper.head(m) = qp.upper;
  p1.lower.tail(2 * me + mi).setZero();
  p1.Aeq = Matrix::Zero(me, total);
  p1.Aeq.leftCols(m) = qp.Aeq;
  p1.Aeq.block(0, m, me, me) = Matrix::Identity(me, me);
  p1.Aeq.block(0, m + me, me, me) = -Matrix::Identity(me, me);
  p1.beq = qp.beq;
  p1.Ain = Matrix::Zero(mi, total);
  p1.Ain.leftCols(m) = qp.Ain;
  p1.Ain.rightCols(mi) = Matrix::Identity(mi, mi);
  p1.bin = qp.bin;
  QpOptions opt;
  opt.feasibility_tol = 1e-9;
  opt.gap_tol = 1e-9;
  opt.fallback_tol = 1e-7;
  return solve_impl(p1, opt, false);
}

// Classifies a failed solve by running phase one.
QpSolution classify_failure(const QuadraticProgram& qp, QpSolution failed) {
  const QpSolution p1 = phase_one(qp);
  if (!p1.optimal()) {
    failed.message += "; phase one did not converge";
    return failed;
  }
  const Index m = qp.num_variables(), me = qp.Aeq.rows(), mi = qp.Ain.rows();
  const double eq_violation = p1.v.segment(m, 2 * me).sum();
  const double in_violation = p1.v.tail(mi).sum();
  const double scale = 1.0 + std::max(inf_norm(qp.beq), inf_norm(qp.bin));
  if (eq_violation + in_violation > 1e-7 * scale) {
    return infeasible_solution(eq_violation >= in_violation ? ConstraintClass::Equality : ConstraintClass::Inequality,
                               eq_violation + in_violation, "phase one found a positive minimum violation");
  }
  return failed;
}

}  // namespace

QuadraticProgram QuadraticProgram::with_variables(Eigen::Index m) {
  QuadraticProgram qp;
  qp.Q = Matrix::Zero(m, m);
  qp.c = Vector::Zero(m);
  qp.Aeq = Matrix::Zero(0, m);
  qp.beq = Vector::Zero(0);
  qp.Ain = Matrix::Zero(0, m);
  qp.bin = Vector::Zero(0);
  qp.lower = Vector::Constant(m, -kInf);
  qp.upper = Vector::Constant(m, kInf);
  return qp;
}

void QuadraticProgram::validate() const {
  const Eigen::Index m = c.size();
  if (Q.rows() != m || Q.cols() != m) throw InputError("Q must be m x m with m = size(c)");
  if (Aeq.cols() != m || Aeq.rows() != beq.size()) throw InputError("inconsistent equality dimensions");
  if (Ain.cols() != m || Ain.rows() != bin.size()) throw InputError("inconsistent inequality dimensions");
  if (lower.size() != m || upper.size() != m) throw InputError("bound vectors must have length m");
  if (m > 0 && (Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InputError("Q is not symmetric");
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(lower(j) <= upper(j))) throw InputError("lower bound exceeds upper bound at " + std::to_string(j));
    if (lower(j) == kInf || upper(j) == -kInf) throw InputError("bound is infinite on the wrong side");
  }
  if (!Q.allFinite() || !c.allFinite() || !Aeq.allFinite() || !beq.allFinite() || !Ain.allFinite() ||
      !bin.allFinite()) {
    throw InputError("quadratic program has non-finite data");
  }
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::NumericalFailure: return "NumericalFailure";
    case QpStatus::IterationLimit: return "IterationLimit";
  }
  return "Unknown";
}

namespace {

std::mutex observer_mutex;
QpObserver observer;

}  // namespace

void set_qp_observer(QpObserver fn) {
  std::lock_guard<std::mutex> lock(observer_mutex);
  observer = std::move(fn);
}

QpSolution solve_qp(const QuadraticProgram& qp, const QpOptions& options) {
  QpSolution sol = solve_impl(qp, options, true);
  QpObserver current;
  {
    std::lock_guard<std::mutex> lock(observer_mutex);
    current = observer;
  }
  if (current) current(qp, sol);
  return sol;
}

namespace {

QpSolution solve_impl(const QuadraticProgram& input, const QpOptions& options, bool classify) {
  input.validate();
  const Index m = input.num_variables();

  // PSD check, restricted to variables that carry off-diagonal curvature.
  QuadraticProgram qp = input;
  std::vector<Index> coupled;
  double min_diag = 0.0;
  for (Index j = 0; j < m; ++j) {
    bool off = false;
    for (Index i = 0; i < m && !off; ++i) off = (i != j && qp.Q(i, j) != 0.0);
    if (off) {
      coupled.push_back(j);
    } else {
      min_diag = std::min(min_diag, qp.Q(j, j));
      if (qp.Q(j, j) < 0.0 && qp.Q(j, j) > -options.psd_tol) qp.Q(j, j) = 0.0;
    }
  }
  double min_eig = min_diag;
  if (!coupled.empty()) {
    const Index k = static_cast<Index>(coupled.size());
    Matrix block(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) block(a, b) = qp.Q(coupled[a], coupled[b]);
    Eigen::SelfAdjointEigenSolver<Matrix> es(block);
    if (es.info() != Eigen::Success) {
      QpSolution sol;
      sol.message = "eigendecomposition of Q failed";
      return sol;
    }
    const double lo = es.eigenvalues().minCoeff();
    min_eig = std::min(min_eig, lo);
    if (lo < 0.0 && lo > -options.psd_tol) {
      const Matrix clipped =
          es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
      for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) qp.Q(coupled[a], coupled[b]) = 0.5 * (clipped(a, b) + clipped(b, a));
    }
  }
  if (min_eig <= -options.psd_tol) {
    QpSolution sol;
    sol.status = QpStatus::NumericalFailure;
    sol.min_eigenvalue = min_eig;
    sol.message = "Q is indefinite (smallest eigenvalue " + std::to_string(min_eig) + ")";
    return sol;
  }

  // Substitute fixed variables and drop constraint rows that become empty.
  Reduction red;
  red.fixed_values = Vector::Zero(m);
  for (Index j = 0; j < m; ++j) {
    if (qp.lower(j) == qp.upper(j)) {
      red.fixed_values(j) = qp.lower(j);
    } else {
      red.free_cols.push_back(j);
    }
  }
  const Vector beq_shift = qp.beq - qp.Aeq * red.fixed_values;
  const Vector bin_shift = qp.bin - qp.Ain * red.fixed_values;
  const Index nf = static_cast<Index>(red.free_cols.size());
  auto row_empty = [&](const Matrix& A, Index r) {
    for (Index j : red.free_cols)
      if (A(r, j) != 0.0) return false;
    return true;
  };
  const double tol_empty = 1e-9 * (1.0 + std::max(inf_norm(qp.beq), inf_norm(qp.bin)));
  for (Index r = 0; r < qp.Aeq.rows(); ++r) {
    if (row_empty(qp.Aeq, r)) {
      if (std::abs(beq_shift(r)) > tol_empty)
        return infeasible_solution(ConstraintClass::Equality, std::abs(beq_shift(r)),
                                   "equality row " + std::to_string(r) + " is violated by fixed variables");
    } else {
      red.eq_rows.push_back(r);
    }
  }
  for (Index r = 0; r < qp.Ain.rows(); ++r) {
    if (row_empty(qp.Ain, r)) {
      if (bin_shift(r) > tol_empty)
        return infeasible_solution(ConstraintClass::Inequality, bin_shift(r),
                                   "inequality row " + std::to_string(r) + " is violated by fixed variables");
    } else {
      red.in_rows.push_back(r);
    }
  }

  Matrix Qf(nf, nf), Aeqf(red.eq_rows.size(), nf), Ainf(red.in_rows.size(), nf);
  Vector cf(nf), lf(nf), uf(nf), beqf(red.eq_rows.size()), binf(red.in_rows.size());
  const Vector c_shift = qp.c + qp.Q * red.fixed_values;
  for (Index a = 0; a < nf; ++a) {
    const Index j = red.free_cols[a];
    cf(a) = c_shift(j);
    lf(a) = qp.lower(j);
    uf(a) = qp.upper(j);
    for (Index b = 0; b < nf; ++b) Qf(a, b) = qp.Q(j, red.free_cols[b]);
    for (Index r = 0; r < Aeqf.rows(); ++r) Aeqf(r, a) = qp.Aeq(red.eq_rows[r], j);
    for (Index r = 0; r < Ainf.rows(); ++r) Ainf(r, a) = qp.Ain(red.in_rows[r], j);
  }
  for (Index r = 0; r < beqf.size(); ++r) beqf(r) = beq_shift(red.eq_rows[r]);
  for (Index r = 0; r < binf.size(); ++r) binf(r) = bin_shift(red.in_rows[r]);

  // Permute eliminable columns first.
  StandardForm sf;
  std::vector<unsigned char> hl(nf), hu(nf);
  for (Index a = 0; a < nf; ++a) {
    hl[a] = std::isfinite(lf(a));
    hu[a] = std::isfinite(uf(a));
  }
  const SpMat Qs = to_sparse(Qf), Ains = to_sparse(Ainf);
  const std::vector<Index> elim = choose_eliminated(Qs, Ains, hl, hu);
  std::vector<Index> perm;
  {
    std::vector<unsigned char> in_elim(nf, 0);
    for (Index j : elim) in_elim[j] = 1;
    perm = elim;
    for (Index j = 0; j < nf; ++j)
      if (!in_elim[j]) perm.push_back(j);
  }
  // Column k of the permuted problem is original free column perm[k].
  Matrix Qp(nf, nf), Aeqp(Aeqf.rows(), nf), Ainp(Ainf.rows(), nf);
  for (Index k = 0; k < nf; ++k) {
    Aeqp.col(k) = Aeqf.col(perm[k]);
    Ainp.col(k) = Ainf.col(perm[k]);
    for (Index l = 0; l < nf; ++l) Qp(k, l) = Qf(perm[k], perm[l]);
  }
  sf.Q = to_sparse(Qp);
  sf.Aeq = to_sparse(Aeqp);
  sf.Ain = to_sparse(Ainp);
  sf.c.resize(nf);
  sf.lower.resize(nf);
  sf.upper.resize(nf);
  sf.has_lower.resize(nf);
  sf.has_upper.resize(nf);
  for (Index k = 0; k < nf; ++k) {
    sf.c(k) = cf(perm[k]);
    sf.lower(k) = std::isfinite(lf(perm[k])) ? lf(perm[k]) : 0.0;
    sf.upper(k) = std::isfinite(uf(perm[k])) ? uf(perm[k]) : 0.0;
    sf.has_lower[k] = hl[perm[k]];
    sf.has_upper[k] = hu[perm[k]];
  }
  sf.beq = beqf;
  sf.bin = binf;
  sf.num_elim = static_cast<Index>(elim.size());

  std::optional<Vector> warm;
  if (options.warm_start && options.warm_start->size() == m) {
    Vector w(nf);
    for (Index k = 0; k < nf; ++k) w(k) = (*options.warm_start)(red.free_cols[perm[k]]);
    warm = w;
  }

  InteriorPoint ipm(sf, options);
  const IpmResult r = ipm.run(warm);

  QpSolution sol;
  sol.status = r.status;
  sol.iterations = r.iterations;
  sol.message = r.message;
  sol.v = red.fixed_values;
  sol.y_eq = Vector::Zero(qp.Aeq.rows());
  sol.y_in = Vector::Zero(qp.Ain.rows());
  sol.z_lower = Vector::Zero(m);
  sol.z_upper = Vector::Zero(m);
  for (Index k = 0; k < nf; ++k) {
    const Index j = red.free_cols[perm[k]];
    sol.v(j) = r.v(k);
    sol.z_lower(j) = r.zl(k);
    sol.z_upper(j) = r.zu(k);
  }
  for (std::size_t a = 0; a < red.eq_rows.size(); ++a) sol.y_eq(red.eq_rows[a]) = r.y(a);
  for (std::size_t a = 0; a < red.in_rows.size(); ++a) sol.y_in(red.in_rows[a]) = r.lam(a);
  // Multipliers of fixed variables from stationarity.
  if (nf < m) {
    const Vector g = qp.Q * sol.v + qp.c - qp.Aeq.transpose() * sol.y_eq - qp.Ain.transpose() * sol.y_in;
    for (Index j = 0; j < m; ++j) {
      if (qp.lower(j) != qp.upper(j)) continue;
      if (g(j) >= 0.0) {
        sol.z_lower(j) = g(j);
      } else {
        sol.z_upper(j) = -g(j);
      }
    }
  }
  sol.objective = input.objective(sol.v);

  if (classify && sol.status != QpStatus::Optimal && (r.suspect_infeasible || sol.status == QpStatus::IterationLimit)) {
    return classify_failure(qp, std::move(sol));
  }
  return sol;
}

}  // namespace

double KktReport::max() const { return std::max({stationarity, primal, dual, complementarity}); }

KktReport check_kkt(const QuadraticProgram& qp, const QpSolution& sol) {
  KktReport rep;
  const Index m = qp.num_variables();
  const Vector& v = sol.v;
  const Vector g = qp.Q * v + qp.c - qp.Aeq.transpose() * sol.y_eq - qp.Ain.transpose() * sol.y_in - sol.z_lower +
                   sol.z_upper;
  rep.stationarity = inf_norm(g);

  double primal = inf_norm(qp.Aeq * v - qp.beq);
  const Vector slack = qp.Ain * v - qp.bin;
  for (Index r = 0; r < slack.size(); ++r) {
    primal = std::max(primal, -slack(r));
    rep.complementarity = std::max(rep.complementarity, std::abs(sol.y_in(r) * slack(r)));
    rep.dual = std::max(rep.dual, -sol.y_in(r));
  }
  for (Index j = 0; j < m; ++j) {
    if (std::isfinite(qp.lower(j))) {
      primal = std::max(primal, qp.lower(j) - v(j));
      rep.complementarity = std::max(rep.complementarity, std::abs(sol.z_lower(j) * (v(j) - qp.lower(j))));
      rep.dual = std::max(rep.dual, -sol.z_lower(j));
    } else {
      rep.dual = std::max(rep.dual, std::abs(sol.z_lower(j)));
    }
    if (std::isfinite(qp.upper(j))) {
      primal = std::max(primal, v(j) - qp.upper(j));
      rep.complementarity = std::max(rep.complementarity, std::abs(sol.z_upper(j) * (qp.upper(j) - v(j))));
      rep.dual = std::max(rep.dual, -sol.z_upper(j));
    } else {
      rep.dual = std::max(rep.dual, std::abs(sol.z_upper(j)));
    }
  }
  rep.primal = std::max(primal, 0.0);
  return rep;
}

double dual_objective(const QuadraticProgram& qp, const QpSolution& sol) {
  double d = -0.5 * sol.v.dot(qp.Q * sol.v) + qp.beq.dot(sol.y_eq) + qp.bin.dot(sol.y_in);
  for (Index j = 0; j < qp.num_variables(); ++j) {
    if (std::isfinite(qp.lower(j))) d += qp.lower(j) * sol.z_lower(j);
    if (std::isfinite(qp.upper(j))) d -= qp.upper(j) * sol.z_upper(j);
  }
  return d;
}

}  // namespace scenfilter
