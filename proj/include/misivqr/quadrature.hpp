#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace misivqr {

namespace detail {

// Gauss-Kronrod 7-15 nodes/weights on [-1,1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.000000000000000000000000000000000e+00,
    2.077849550078984676006894037732449e-01,
    4.058451513773971669066064120769615e-01,
    5.860872354676911302941448382587296e-01,
    7.415311855993944398638647732807884e-01,
    8.648644233597690727897127886409262e-01,
    9.491079123427585245261896840478513e-01,
    9.914553711208126392068546975263285e-01};

inline constexpr std::array<double, 8> kKronrodWeights = {
    2.094821410847278280129991748917143e-01,
    2.044329400752988924141619992346491e-01,
    1.903505780647854099132564024210137e-01,
    1.690047266392679028265834265985503e-01,
    1.406532597155259187451895905102379e-01,
    1.047900103222501838398763225415180e-01,
    6.309209262997855329070066318920429e-02,
    2.293532201052922496373200805896959e-02};

inline constexpr std::array<double, 4> kGaussWeights = {
    4.179591836734693877551020408163265e-01,
    3.818300505051189449503697754889751e-01,
    2.797053914892766679014677714237796e-01,
    1.294849661688696932706114326790820e-01};

template <typename F>
struct GkResult {
  double integral;
  double error;
};

template <typename F>
GkResult<F> gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = kKronrodWeights[0] * fc;
  double gauss = kGaussWeights[0] * fc;
  for (int j = 1; j < 8; ++j) {
    const double x = h * kKronrodNodes[j];
    const double lo = f(c - x);
    const double hi = f(c + x);
    kron += kKronrodWeights[j] * (lo + hi);
    if (j % 2 == 0) gauss += kGaussWeights[j / 2] * (lo + hi);
  }
  kron *= h;
  gauss *= h;
  return {kron, std::abs(kron - gauss)};
}

template <typename F>
double adaptive_gk(const F& f, double a, double b, double abs_tol, int depth) {
  auto r = gk15(f, a, b);
  if (r.error <= abs_tol || depth <= 0) return r.integral;
  const double m = 0.5 * (a + b);
  return adaptive_gk(f, a, m, 0.5 * abs_tol, depth - 1) +
         adaptive_gk(f, m, b, 0.5 * abs_tol, depth - 1);
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration with an absolute tolerance. Signed
// interval convention: integrate(f, a, b) = -integrate(f, b, a).
template <typename F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10) {
  if (a == b) return 0.0;
  const double sign = a <= b ? 1.0 : -1.0;
  if (sign < 0) std::swap(a, b);
  return sign * detail::adaptive_gk(f, a, b, abs_tol, 48);
}

// Leftmost solution of pred(y) == true on [lo, hi] for a monotone predicate
// (false ... false true ... true). Bisection to x-tolerance.
template <typename Pred>
double bisect_predicate(const Pred& pred, double lo, double hi, double x_tol = 1e-10) {
  if (lo > hi) throw std::invalid_argument("bisect_predicate: empty interval");
  if (pred(lo)) return lo;
  if (!pred(hi)) throw std::runtime_error("bisect_predicate: predicate never true on interval");
  while (hi - lo > x_tol) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid))
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace misivqr
