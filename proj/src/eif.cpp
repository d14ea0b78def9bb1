#include "lyl/eif.hpp"

#include <cmath>

namespace lyl {

namespace {

void require(bool ok, ErrorKind kind, const char* msg) {
  if (!ok) throw Error(kind, msg);
}

// S_C(s-) with the context's flooring policy applied
double cens_left(const ArmCurves& curves, double s, const EifContext& ctx) {
  const NuisanceFit& nu = *ctx.nu;
  const double g = curves.cens_surv.value_left(s);
  if (!std::isfinite(g))
    throw Error(ErrorKind::PositivityBreach,
                "eif: censoring survival is not finite");
  if (ctx.floor_denominators) return nu.floor_surv(g, nu.clips->cens);
  if (!(g >= nu.eta))
    throw Error(ErrorKind::PositivityBreach,
                "eif: censoring survival below eta");
  return g;
}

}  // namespace

double martingale_correction(const ObservationRecord& o, const EifContext& ctx,
                             const ArmCurves& curves) {
  require(ctx.nu != nullptr, ErrorKind::InputError, "eif: null nuisance bundle");
  require(ctx.tstar > 0.0, ErrorKind::InputError, "eif: horizon must be > 0");
  const NuisanceFit& nu = *ctx.nu;
  const CauseSystem& sys = curves.system;
  std::atomic<std::uint64_t>* hclip =
      ctx.floor_denominators ? &nu.clips->surv : nullptr;

  const double tcap = std::min(o.time, ctx.tstar);
  double val = 0.0;

  // compensator: -sum over hazard atoms s <= min(T~, t*), closed at T~
  const std::vector<double>& grid = sys.grid();
  for (std::size_t k = 0; k < grid.size() && grid[k] <= tcap; ++k) {
    for (int i = 1; i <= 2; ++i) {
      const double dl = sys.hazard_jump(i, k);
      if (dl == 0.0) continue;
      const double h = h_kernel(sys, i, ctx.j, grid[k], ctx.tstar, nu.eta,
                                ctx.floor_denominators, hclip);
      val -= h * dl / cens_left(curves, grid[k], ctx);
    }
  }

  // counting-process jump at an observed event inside the horizon
  if (o.event != 0 && o.time <= ctx.tstar) {
    const double h = h_kernel(sys, o.event, ctx.j, o.time, ctx.tstar, nu.eta,
                              ctx.floor_denominators, hclip);
    val += h / cens_left(curves, o.time, ctx);
  }
  return val;
}

double martingale_correction(const ObservationRecord& o, const EifContext& ctx,
                             int a) {
  require(ctx.nu != nullptr, ErrorKind::InputError, "eif: null nuisance bundle");
  const ArmCurves curves =
      predict_arm_curves(*ctx.nu, a, o.x.data(), o.x.size());
  return martingale_correction(o, ctx, curves);
}

EifValues eif_values(const ObservationRecord& o, const EifContext& ctx) {
  require(ctx.nu != nullptr, ErrorKind::InputError, "eif: null nuisance bundle");
  const NuisanceFit& nu = *ctx.nu;
  const double* x = o.x.data();
  const std::size_t d = o.x.size();

  const ArmCurves c0 = predict_arm_curves(nu, 0, x, d);
  const ArmCurves c1 = predict_arm_curves(nu, 1, x, d);

  EifValues v;
  v.tau = years_lost(c1.system, ctx.j, ctx.tstar).value -
          years_lost(c0.system, ctx.j, ctx.tstar).value;

  const double pi1 = nu.propensity(x, d);
  const double w = o.treatment == 1 ? 1.0 / pi1 : -1.0 / (1.0 - pi1);
  const double mart =
      martingale_correction(o, ctx, o.treatment == 1 ? c1 : c0);
  v.phi = v.tau + w * mart;
  if (!std::isfinite(v.phi))
    throw Error(ErrorKind::NonFiniteValue, "eif: non-finite influence value");

  if (ctx.has_projection) {
    require(ctx.l_col < d, ErrorKind::InputError,
            "eif: projection coordinate out of range");
    const double r = x[ctx.l_col] - ctx.e_proj(x, d);
    v.phi_gamma = (v.phi - ctx.tau_proj(x, d)) * r;
    v.phi_chi = r * r;
  }
  return v;
}

double uncentered_eif_ate(const ObservationRecord& o, const EifContext& ctx) {
  return eif_values(o, ctx).phi;
}

double phi_gamma(const ObservationRecord& o, const EifContext& ctx) {
  require(ctx.has_projection, ErrorKind::InputError,
          "eif: phi_gamma needs a projection in the context");
  return eif_values(o, ctx).phi_gamma;
}

double phi_chi(const ObservationRecord& o, const EifContext& ctx) {
  require(ctx.has_projection, ErrorKind::InputError,
          "eif: phi_chi needs a projection in the context");
  require(ctx.l_col < o.x.size(), ErrorKind::InputError,
          "eif: projection coordinate out of range");
  const double r =
      o.x[ctx.l_col] - ctx.e_proj(o.x.data(), o.x.size());
  return r * r;
}

double omega_contrib(double phi_g, double phi_c, double gamma_hat,
                     double chi_hat, double omega_hat) {
  if (!(chi_hat > 0.0))
    throw Error(ErrorKind::DegenerateDenominator,
                "omega: chi <= 0 (constant covariate coordinate)");
  return (phi_g - gamma_hat - omega_hat * (phi_c - chi_hat)) / chi_hat;
}

double eif_omega_contrib(const ObservationRecord& o, const EifContext& ctx,
                         double gamma_hat, double chi_hat, double omega_hat) {
  require(ctx.has_projection, ErrorKind::InputError,
          "eif: omega contribution needs a projection in the context");
  const EifValues v = eif_values(o, ctx);
  return omega_contrib(v.phi_gamma, v.phi_chi, gamma_hat, chi_hat, omega_hat);
}

}  // namespace lyl
