#pragma once

// The four operator-splitting fixed-point maps (DRS, FBS, FBFS, DYS) on the
// stacked CNC inclusion 0 in P z + Q z (+ R z).

#include "cncaa/linops.hpp"
#include "cncaa/prox.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cncaa {

enum class Scheme { drs, fbs, fbfs, dys };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::drs: return "drs";
    case Scheme::fbs: return "fbs";
    case Scheme::fbfs: return "fbfs";
    case Scheme::dys: return "dys";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "drs") return Scheme::drs;
  if (name == "fbs") return Scheme::fbs;
  if (name == "fbfs") return Scheme::fbfs;
  if (name == "dys") return Scheme::dys;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

struct StepResult {
  StackedPoint z_next;
  /// g = z - z_next
  StackedPoint g;
  /// FBFS only: the forward-backward point J_{mu Q}((I - mu P) z) and z - z_fbs.
  std::optional<StackedPoint> z_fbs;
  std::optional<StackedPoint> g_fbs;
};

namespace detail {

inline StepResult make_step(const StackedPoint& z, StackedPoint next) {
  StackedPoint g = z - next;
  return {std::move(next), std::move(g), std::nullopt, std::nullopt};
}

}  // namespace detail

/// z - J_P z + J_Q(2 J_P z - z)
inline StepResult drs_step(const CncResolvent& jp, const Regularizer& q, const StackedPoint& z) {
  const double mu = jp.mu();
  StackedPoint a = jp(z);
  StackedPoint b = resolvent_q(q, mu, 2.0 * a - z);
  return detail::make_step(z, (z - a) + b);
}

inline StepResult drs_step(const CncOperator& p, const Regularizer& q, double mu,
                           const StackedPoint& z) {
  return drs_step(CncResolvent(p, mu), q, z);
}

/// J_Q((I - mu P) z)
inline StepResult fbs_step(const CncOperator& p, const Regularizer& q, double mu,
                           const StackedPoint& z) {
  StackedPoint forward = z - mu * p.forward(z);
  return detail::make_step(z, resolvent_q(q, mu, forward));
}

/// Tseng: z_F = (I - mu P) z, z_fbs = J_Q z_F, z_next = z - z_F + (I - mu P) z_fbs.
inline StepResult fbfs_step(const CncOperator& p, const Regularizer& q, double mu,
                            const StackedPoint& z) {
  StackedPoint zf = z - mu * p.forward(z);
  StackedPoint zfbs = resolvent_q(q, mu, zf);
  StackedPoint next = (z - zf) + (zfbs - mu * p.forward(zfbs));
  StepResult out = detail::make_step(z, std::move(next));
  out.g_fbs = z - zfbs;
  out.z_fbs = std::move(zfbs);
  return out;
}

/// a = J_R z, b = J_Q(2a - z - mu P a), z_next = z - a + b.
inline StepResult dys_step(const CncOperator& p, const Regularizer& q, const Regularizer& r,
                           double mu, const StackedPoint& z, bool constraint_mode) {
  StackedPoint a = resolvent_r(r, mu, z, constraint_mode);
  StackedPoint b = resolvent_q(q, mu, (2.0 * a - z) - mu * p.forward(a));
  return detail::make_step(z, (z - a) + b);
}

/// Paper defaults: 1.99 beta for FBS/DYS, 0.99 / L for FBFS. DRS has none.
inline double default_step(Scheme scheme, const CncOperator& p) {
  switch (scheme) {
    case Scheme::drs:
      throw std::invalid_argument("drs: no default step size; supply mu");
    case Scheme::fbs:
    case Scheme::dys: {
      const double beta = cocoercivity_beta(p);
      if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument(std::string(to_string(scheme)) +
                                    ": cocoercivity constant is " + std::to_string(beta) +
                                    " (gamma = 1 or A = 0); supply mu");
      }
      return 1.99 * beta;
    }
    case Scheme::fbfs: {
      const double lip = lipschitz_constant(p);
      if (!(lip > 0.0)) throw std::invalid_argument("fbfs: Lipschitz constant is zero; supply mu");
      return 0.99 / lip;
    }
  }
  throw std::logic_error("default_step: unreachable");
}

/// Empty when mu lies in the scheme's convergent range; otherwise a warning.
inline std::optional<std::string> step_size_warning(Scheme scheme, const CncOperator& p,
                                                    double mu) {
  switch (scheme) {
    case Scheme::drs:
      return std::nullopt;
    case Scheme::fbs:
    case Scheme::dys: {
      const double bound = 2.0 * cocoercivity_beta(p);
      if (mu < bound) return std::nullopt;
      return std::string(to_string(scheme)) + ": mu = " + std::to_string(mu) +
             " is outside (0, 2 beta) = (0, " + std::to_string(bound) + ")";
    }
    case Scheme::fbfs: {
      const double bound = 1.0 / lipschitz_constant(p);
      if (mu < bound) return std::nullopt;
      return "fbfs: mu = " + std::to_string(mu) + " is outside (0, 1/L) = (0, " +
             std::to_string(bound) + ")";
    }
  }
  return std::nullopt;
}

/// A configured splitting: scheme, operators and step size. The DRS resolvent
/// is factored once here and shared by copies.
class Splitting {
 public:
  Splitting(Scheme scheme, CncOperator p, Regularizer q, std::optional<Regularizer> r,
            bool constraint_mode, std::optional<double> mu = std::nullopt)
      : scheme_(scheme),
        p_(std::move(p)),
        q_(std::move(q)),
        r_(std::move(r)),
        constraint_mode_(constraint_mode) {
    q_.check_dimension(p_.block_size());
    if (r_) r_->check_dimension(p_.block_size());
    if (constraint_mode_ && !(r_ && r_->is_indicator())) {
      throw std::invalid_argument("Splitting: constraint mode needs a box R");
    }
    if (r_ && !r_->is_none() && scheme_ != Scheme::dys) {
      throw std::invalid_argument(std::string(to_string(scheme_)) +
                                  ": three-operator model requires DYS");
    }
    mu_ = mu ? *mu : default_step(scheme_, p_);
    if (!(mu_ > 0.0)) throw std::invalid_argument("Splitting: mu must be positive");
    warning_ = step_size_warning(scheme_, p_, mu_);
    if (scheme_ == Scheme::drs) jp_ = std::make_shared<const CncResolvent>(p_, mu_);
  }

  Scheme scheme() const { return scheme_; }
  double mu() const { return mu_; }
  const CncOperator& p() const { return p_; }
  const Regularizer& q() const { return q_; }
  const std::optional<Regularizer>& r() const { return r_; }
  bool constraint_mode() const { return constraint_mode_; }
  const std::optional<std::string>& step_warning() const { return warning_; }

  /// Same operator and step, new penalty strengths (reuses any factorization).
  Splitting with_regularizers(Regularizer q, std::optional<Regularizer> r) const {
    Splitting out = *this;
    q.check_dimension(p_.block_size());
    if (r) r->check_dimension(p_.block_size());
    out.q_ = std::move(q);
    out.r_ = std::move(r);
    return out;
  }

  StepResult step(const StackedPoint& z) const {
    switch (scheme_) {
      case Scheme::drs: return drs_step(*jp_, q_, z);
      case Scheme::fbs: return fbs_step(p_, q_, mu_, z);
      case Scheme::fbfs: return fbfs_step(p_, q_, mu_, z);
      case Scheme::dys: return dys_step(p_, q_, r_ ? *r_ : Regularizer::none(), mu_, z,
                                        constraint_mode_);
    }
    throw std::logic_error("Splitting::step: unreachable");
  }

  StackedPoint resolvent_p(const StackedPoint& z) const {
    if (jp_) return (*jp_)(z);
    return CncResolvent(p_, mu_)(z);
  }

 private:
  Scheme scheme_;
  CncOperator p_;
  Regularizer q_;
  std::optional<Regularizer> r_;
  bool constraint_mode_;
  double mu_ = 0.0;
  std::optional<std::string> warning_;
  std::shared_ptr<const CncResolvent> jp_;
};

}  // namespace cncaa
