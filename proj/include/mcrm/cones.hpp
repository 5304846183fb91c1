#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>

namespace mcrm {

enum class ConeKind { Zero, Nonnegative, Exponential, DualExponential };

constexpr std::string_view to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::Zero: return "zero";
    case ConeKind::Nonnegative: return "nonnegative";
    case ConeKind::Exponential: return "exponential";
    case ConeKind::DualExponential: return "dual_exponential";
  }
  return "unknown";
}

/// A contiguous run of rows of the stacked slack vector constrained to one cone.
/// Exponential kinds always span exactly three rows ordered (a1, a2, a3) with
/// a1 >= a2 exp(a3 / a2).
struct ConeBlock {
  ConeKind kind = ConeKind::Zero;
  Eigen::Index dim = 0;
  Eigen::Index offset = 0;

  friend bool operator==(const ConeBlock&, const ConeBlock&) = default;
};

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

namespace detail {

// Exact membership in the closed exponential cone, no tolerance.
template <typename Scalar>
bool in_exp_cone_exact(const Vector3<Scalar>& p) {
  if (p[1] > 0) return p[0] >= p[1] * std::exp(p[2] / p[1]);
  return p[1] == 0 && p[0] >= 0 && p[2] <= 0;
}

// Exact membership in the polar cone -K*_exp.
template <typename Scalar>
bool in_exp_polar_exact(const Vector3<Scalar>& p) {
  // -p in K*: with q = -p, q3 < 0 branch or q3 == 0 face.
  const Scalar q1 = -p[0], q2 = -p[1], q3 = -p[2];
  if (q3 < 0) return q1 >= -q3 * std::exp(q2 / q3 - Scalar(1));
  return q3 == 0 && q1 >= 0 && q2 >= 0;
}

// Point on the smooth boundary ray s * (e^w, 1, w) together with the normal
// multiplier mu along (-e^-w, 1 - w, 1). Both are linear in (p2, p3) once w is
// fixed; the remaining scalar equation in w is the first coordinate.
template <typename Scalar>
struct RayFit {
  Scalar s;
  Scalar mu;
  Scalar residual;
};

template <typename Scalar>
RayFit<Scalar> fit_ray(const Vector3<Scalar>& p, Scalar w) {
  const Scalar det = w * w - w + Scalar(1);
  const Scalar s = (p[1] - (Scalar(1) - w) * p[2]) / det;
  const Scalar mu = (p[2] - w * p[1]) / det;
  return {s, mu, s * std::exp(w) - mu * std::exp(-w) - p[0]};
}

}  // namespace detail

/// Euclidean projection onto the exponential cone
///   K_exp = closure{(a1, a2, a3) : a3 <= a2 ln(a1 / a2), a1 > 0, a2 > 0}.
///
/// Outside the trivial cases the projection lies on the smooth boundary,
/// p = s g(w) + mu n(w) with g(w) = (e^w, 1, w) and n(w) = (-e^-w, 1 - w, 1).
/// For fixed w the pair (s, mu) solves a 2x2 system, which leaves a single
/// monotone root-finding problem in w on the interval where s > 0 and mu > 0.
/// That root is found by Newton steps safeguarded by a shrinking bracket.
template <typename Scalar>
Vector3<Scalar> project_exp_cone(const Vector3<Scalar>& p) {
  using std::abs;
  if (detail::in_exp_cone_exact(p)) return p;
  if (detail::in_exp_polar_exact(p)) return Vector3<Scalar>::Zero();
  if (p[1] <= 0 && p[2] <= 0) {
    return Vector3<Scalar>(std::max(p[0], Scalar(0)), Scalar(0), p[2]);
  }

  // Bracket [lo, hi]: residual is negative at the s = 0 end and positive at the
  // mu = 0 end.
  Scalar lo, hi;
  if (p[1] > 0 && p[2] > 0) {
    lo = Scalar(1) - p[1] / p[2];
    hi = p[2] / p[1];
  } else if (p[1] > 0) {
    hi = p[2] / p[1];
    Scalar step = 1;
    lo = hi - step;
    while (detail::fit_ray(p, lo).residual > 0 && lo > Scalar(-700)) {
      step *= 2;
      lo = hi - step;
    }
  } else {
    lo = Scalar(1) - p[1] / p[2];
    Scalar step = 1;
    hi = lo + step;
    while (detail::fit_ray(p, hi).residual < 0 && hi < Scalar(700)) {
      step *= 2;
      hi = lo + step;
    }
  }

  Scalar w = (lo + hi) / 2;
  Scalar step_old = hi - lo;
  Scalar step = step_old;
  for (int it = 0; it < 100; ++it) {
    const auto fit = detail::fit_ray(p, w);
    if (fit.residual == 0) break;
    if (fit.residual < 0) lo = w; else hi = w;
    if (hi - lo <= std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + abs(w))) break;

    // d/dw of the residual, using d(s)/dw and d(mu)/dw of the 2x2 solve.
    const Scalar det = w * w - w + Scalar(1);
    const Scalar ddet = Scalar(2) * w - Scalar(1);
    const Scalar ds = (p[2] - fit.s * ddet) / det;
    const Scalar dmu = (-p[1] - fit.mu * ddet) / det;
    const Scalar ew = std::exp(w), emw = std::exp(-w);
    const Scalar deriv = (ds + fit.s) * ew - (dmu - fit.mu) * emw;

    // Bisect when Newton leaves the bracket or is not halving the step.
    Scalar next = w - fit.residual / deriv;
    if (!(deriv > 0) || !(next > lo && next < hi) ||
        abs(Scalar(2) * fit.residual) > abs(step_old * deriv)) {
      next = (lo + hi) / 2;
    }
    step_old = step;
    step = next - w;
    w = next;
  }

  // Rebuild from whichever factor is not amplified by e^|w|: the cone ray for
  // w <= 0, the polar normal for w > 0.
  const auto fit = detail::fit_ray(p, w);
  if (w <= 0) {
    const Scalar s = std::max(fit.s, Scalar(0));
    return Vector3<Scalar>(s * std::exp(w), s, s * w);
  }
  const Scalar mu = std::max(fit.mu, Scalar(0));
  const Vector3<Scalar> normal(-std::exp(-w), Scalar(1) - w, Scalar(1));
  Vector3<Scalar> q = p - mu * normal;
  q[1] = std::max(q[1], Scalar(0));
  return q;
}

/// Projection onto K*_exp via Moreau: p = proj_K*(p) - proj_K(-p).
template <typename Scalar>
Vector3<Scalar> project_dual_exp_cone(const Vector3<Scalar>& p) {
  return p + project_exp_cone<Scalar>(-p);
}

template <typename Scalar>
Scalar exp_cone_distance(const Vector3<Scalar>& p) {
  if (detail::in_exp_cone_exact(p)) return Scalar(0);
  return (p - project_exp_cone(p)).norm();
}

template <typename Scalar>
Scalar dual_exp_cone_distance(const Vector3<Scalar>& p) {
  // dist(p, K*) = ||p - proj_K*(p)|| = ||proj_K(-p)||.
  return project_exp_cone<Scalar>(-p).norm();
}

/// True iff p lies within Euclidean distance tol of K_exp.
template <typename Scalar>
bool exp_cone_contains(const Vector3<Scalar>& p, Scalar tol) {
  if (!p.allFinite()) return false;
  return exp_cone_distance(p) <= tol;
}

/// True iff p lies within Euclidean distance tol of
///   K*_exp = closure{a1 >= -a3 e^(a2/a3 - 1), a1 > 0, a3 < 0}.
template <typename Scalar>
bool dual_exp_cone_contains(const Vector3<Scalar>& p, Scalar tol) {
  if (!p.allFinite()) return false;
  if (p[2] < 0 && p[0] >= -p[2] * std::exp(p[1] / p[2] - Scalar(1))) return true;
  if (p[2] == 0 && p[0] >= 0 && p[1] >= 0) return true;
  return dual_exp_cone_distance(p) <= tol;
}

/// Interior margin a1 + a3 e^(a2/a3 - 1) of a point with a3 < 0; positive
/// values are strictly inside K*_exp.
template <typename Scalar>
Scalar dual_exp_cone_margin(const Vector3<Scalar>& p) {
  if (!(p[2] < 0)) return -std::numeric_limits<Scalar>::infinity();
  return p[0] + p[2] * std::exp(p[1] / p[2] - Scalar(1));
}

/// Projects the rows [block.offset, block.offset + block.dim) of y onto the
/// dual of the block's cone, in place. This is the projection the
/// operator-splitting solver applies to dual variables.
template <typename Derived>
void project_onto_dual_block(Eigen::MatrixBase<Derived>& y, const ConeBlock& block) {
  using Scalar = typename Derived::Scalar;
  auto seg = y.segment(block.offset, block.dim);
  switch (block.kind) {
    case ConeKind::Zero:
      break;
    case ConeKind::Nonnegative:
      seg = seg.cwiseMax(Scalar(0));
      break;
    case ConeKind::Exponential:
      seg = project_dual_exp_cone<Scalar>(Vector3<Scalar>(seg));
      break;
    case ConeKind::DualExponential:
      seg = project_exp_cone<Scalar>(Vector3<Scalar>(seg));
      break;
  }
}

}  // namespace mcrm
