#include "lyl/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lyl {

const char* feature_expansion_name(FeatureExpansion fm) {
  switch (fm) {
    case FeatureExpansion::mains: return "mains";
    case FeatureExpansion::mains_treatment: return "mains_treatment";
    case FeatureExpansion::mains_treatment_interactions:
      return "mains_treatment_interactions";
  }
  return "?";
}

std::size_t feature_dim(FeatureExpansion fm, std::size_t d) {
  switch (fm) {
    case FeatureExpansion::mains: return d;
    case FeatureExpansion::mains_treatment: return d + 1;
    case FeatureExpansion::mains_treatment_interactions: return 2 * d + 1;
  }
  return 0;
}

void expand_features(FeatureExpansion fm, int a, const double* x,
                     std::size_t d, double* out) {
  for (std::size_t c = 0; c < d; ++c) out[c] = x[c];
  if (fm == FeatureExpansion::mains) return;
  out[d] = static_cast<double>(a);
  if (fm == FeatureExpansion::mains_treatment) return;
  for (std::size_t c = 0; c < d; ++c) out[d + 1 + c] = a * x[c];
}

double CoxFit::risk_score(int a, const double* x, std::size_t d) const {
  const std::size_t p = feature_dim(fmap, d);
  Eigen::VectorXd z(p);
  expand_features(fmap, a, x, d, z.data());
  return std::exp(beta.dot(z));
}

StepFn CoxFit::predict(int a, const double* x, std::size_t d) const {
  return baseline.scaled(risk_score(a, x, d));
}

namespace {

// Shared per-fit workspace: expanded design matrix and rows sorted by time.
struct CoxWorkspace {
  Eigen::MatrixXd Z;              // n x p, row i = features of observation i
  std::vector<int> status;        // 1 if the row has the modeled event
  std::vector<double> time;
  std::vector<std::size_t> order; // ascending time
  std::size_t n_events = 0;

  CoxWorkspace(const SurvivalDataset& data, int cause, FeatureExpansion fm) {
    const std::size_t n = data.n(), d = data.d();
    const std::size_t p = feature_dim(fm, d);
    Z.resize(n, p);
    status.resize(n);
    time.resize(n);
    std::vector<double> z(p);
    for (std::size_t i = 0; i < n; ++i) {
      expand_features(fm, data.treatment(i), data.x_row(i), d, z.data());
      for (std::size_t c = 0; c < p; ++c) Z(i, c) = z[c];
      status[i] = data.event(i) == cause ? 1 : 0;
      time[i] = data.time(i);
      n_events += static_cast<std::size_t>(status[i]);
    }
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return time[a] < time[b];
    });
  }

  std::size_t p() const { return static_cast<std::size_t>(Z.cols()); }
  std::size_t n() const { return static_cast<std::size_t>(Z.rows()); }
};

// One sweep from the latest time backwards, accumulating the risk-set sums
// S0 = sum exp(eta), S1 = sum z exp(eta), S2 = sum z z^T exp(eta).  Breslow
// ties: every event in a tied group shares the full risk-set sums at that
// time.  Fills loglik/grad and, when `hess` is non-null, the negative
// Hessian (observed information).
void cox_sweep(const CoxWorkspace& w, const Eigen::VectorXd& beta,
               double* loglik, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  const std::size_t n = w.n(), p = w.p();
  Eigen::VectorXd eta = w.Z * beta;
  // guard exp overflow: risk scores enter only through ratios, but the
  // running sums themselves can overflow for wild beta during halving
  const double eta_max = eta.maxCoeff();
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2;
  if (hess) s2 = Eigen::MatrixXd::Zero(p, p);

  double ll = 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd h;
  if (hess) h = Eigen::MatrixXd::Zero(p, p);

  std::size_t k = n;
  while (k > 0) {
    // pull in all rows with time >= current tied group's time
    std::size_t grp_end = k;  // exclusive
    const double t = w.time[w.order[k - 1]];
    while (k > 0 && w.time[w.order[k - 1]] == t) --k;
    for (std::size_t r = k; r < grp_end; ++r) {
      const std::size_t i = w.order[r];
      const double e = std::exp(eta[i] - eta_max);
      s0 += e;
      s1.noalias() += e * w.Z.row(i).transpose();
      if (hess)
        s2.noalias() += e * w.Z.row(i).transpose() * w.Z.row(i);
    }
    // events in the group contribute with the completed risk set
    for (std::size_t r = k; r < grp_end; ++r) {
      const std::size_t i = w.order[r];
      if (!w.status[i]) continue;
      ll += eta[i] - (std::log(s0) + eta_max);
      g.noalias() += w.Z.row(i).transpose() - s1 / s0;
      if (hess) {
        h.noalias() += s2 / s0 - (s1 / s0) * (s1 / s0).transpose();
      }
    }
  }
  if (loglik) *loglik = ll;
  if (grad) *grad = g;
  if (hess) *hess = h;
}

// Breslow baseline at beta: jumps d(t)/S0(t) at event times.
StepFn breslow_baseline(const CoxWorkspace& w, const Eigen::VectorXd& beta) {
  const std::size_t n = w.n();
  Eigen::VectorXd eta = w.Z * beta;
  std::vector<double> times, sizes;
  double s0 = 0.0;
  std::size_t k = n;
  while (k > 0) {
    std::size_t grp_end = k;
    const double t = w.time[w.order[k - 1]];
    while (k > 0 && w.time[w.order[k - 1]] == t) --k;
    int d_t = 0;
    for (std::size_t r = k; r < grp_end; ++r) {
      const std::size_t i = w.order[r];
      s0 += std::exp(eta[i]);
      d_t += w.status[i];
    }
    if (d_t > 0) {
      times.push_back(t);
      sizes.push_back(d_t / s0);
    }
  }
  return StepFn(std::move(times), std::move(sizes));
}

}  // namespace

double cox_partial_loglik(const SurvivalDataset& data, int cause,
                          FeatureExpansion fm, const Eigen::VectorXd& beta) {
  CoxWorkspace w(data, cause, fm);
  double ll;
  cox_sweep(w, beta, &ll, nullptr, nullptr);
  return ll;
}

Eigen::VectorXd cox_partial_gradient(const SurvivalDataset& data, int cause,
                                     FeatureExpansion fm,
                                     const Eigen::VectorXd& beta) {
  CoxWorkspace w(data, cause, fm);
  Eigen::VectorXd g(w.p());
  cox_sweep(w, beta, nullptr, &g, nullptr);
  return g;
}

CoxFit fit_cox_cause_specific(const SurvivalDataset& data, int cause,
                              FeatureExpansion fm) {
  if (cause < 0 || cause > 2)
    throw Error(ErrorKind::InputError, "cox: cause must be 0, 1, or 2");
  CoxWorkspace w(data, cause, fm);
  const std::size_t p = w.p();
  if (w.n_events == 0)
    throw Error(ErrorKind::NoEvents,
                std::string("cox: no events of code ") + std::to_string(cause));
  {
    // column-rank check on the expanded design
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(w.Z);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < p)
      throw Error(ErrorKind::SingularDesign,
                  "cox: design matrix is rank deficient after expansion");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll;
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd info(p, p);
  cox_sweep(w, beta, &ll, &grad, &info);

  const double tol = 1e-8;
  const int cap = 100;
  int it = 0;
  while (grad.norm() > tol) {
    if (++it > cap)
      throw Error(ErrorKind::NonConvergence,
                  "cox: Newton failed to reach gradient tolerance in 100 "
                  "iterations");
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Error(ErrorKind::SingularDesign,
                  "cox: information matrix not positive definite");
    Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd beta_new;
    double ll_new;
    // acceptance slack scales with |ll|: near the optimum a full Newton
    // step moves the likelihood by less than its floating-point
    // resolution, and must not be rejected as a decrease
    const double slack = 1e-8 * (1.0 + std::abs(ll));
    for (int half = 0;; ++half) {
      beta_new = beta + scale * step;
      cox_sweep(w, beta_new, &ll_new, nullptr, nullptr);
      if (std::isfinite(ll_new) && ll_new >= ll - slack) break;
      if (half >= 40)
        throw Error(ErrorKind::NonConvergence,
                    "cox: step halving failed to improve the likelihood");
      scale *= 0.5;
    }
    beta = beta_new;
    cox_sweep(w, beta, &ll, &grad, &info);
  }

  CoxFit fit;
  fit.cause = cause;
  fit.fmap = fm;
  fit.beta = beta;
  fit.iterations = it;
  fit.grad_norm = grad.norm();
  fit.loglik = ll;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Eigen::MatrixXd cov =
        ldlt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                             static_cast<Eigen::Index>(p)));
    fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    fit.se = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p),
                                       std::numeric_limits<double>::quiet_NaN());
  }
  fit.baseline = breslow_baseline(w, beta);
  return fit;
}

}  // namespace lyl
