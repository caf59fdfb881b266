#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace misivqr {

// Structural quantile function q(d,u) on u in [0,1], one of a closed set of
// monotone families so that models serialize into experiment configs.
//   SqrtLinear: q(1,u) = sqrt(u), q(0,u) = u
//   Square:     q(1,u) = u^2,     q(0,u) = u
//   Affine:     q(1,u) = a + b*u, q(0,u) = u   (b > 0)
class QuantileMap {
 public:
  enum class Family { SqrtLinear, Square, Affine };

  QuantileMap() : family_(Family::SqrtLinear) {}
  explicit QuantileMap(Family f, double a = 0.0, double b = 1.0) : family_(f), a_(a), b_(b) {
    if (family_ == Family::Affine && !(b_ > 0.0))
      throw std::invalid_argument("QuantileMap: affine slope must be positive");
  }

  static QuantileMap sqrt_linear() { return QuantileMap(Family::SqrtLinear); }
  static QuantileMap square() { return QuantileMap(Family::Square); }
  static QuantileMap affine(double a, double b) { return QuantileMap(Family::Affine, a, b); }

  Family family() const { return family_; }
  double affine_a() const { return a_; }
  double affine_b() const { return b_; }

  double value(int d_star, double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("QuantileMap: u outside [0,1]");
    if (d_star == 0) return u;
    switch (family_) {
      case Family::SqrtLinear: return std::sqrt(u);
      case Family::Square: return u * u;
      case Family::Affine: return a_ + b_ * u;
    }
    throw std::logic_error("QuantileMap: unknown family");
  }

  double inverse(int d_star, double y) const {
    const double lo = value(d_star, 0.0), hi = value(d_star, 1.0);
    if (!(y >= lo && y <= hi)) throw std::domain_error("QuantileMap: y outside range of q(d,.)");
    if (d_star == 0) return y;
    switch (family_) {
      case Family::SqrtLinear: return y * y;
      case Family::Square: return std::sqrt(y);
      case Family::Affine: return (y - a_) / b_;
    }
    throw std::logic_error("QuantileMap: unknown family");
  }

  // inverse with saturation: 0 below the range, 1 above. CDF compositions
  // need this, the strict version is the public contract.
  double inverse_clamped(int d_star, double y) const {
    if (y <= value(d_star, 0.0)) return 0.0;
    if (y >= value(d_star, 1.0)) return 1.0;
    return inverse(d_star, y);
  }

  // d/dy of inverse(d,y), defined on the open range interior.
  double inverse_derivative(int d_star, double y) const {
    if (d_star == 0) return 1.0;
    switch (family_) {
      case Family::SqrtLinear: return 2.0 * y;
      case Family::Square: return y > 0.0 ? 0.5 / std::sqrt(y) : std::numeric_limits<double>::infinity();
      case Family::Affine: return 1.0 / b_;
    }
    throw std::logic_error("QuantileMap: unknown family");
  }

  double range_min() const { return std::min(value(0, 0.0), value(1, 0.0)); }
  double range_max() const { return std::max(value(0, 1.0), value(1, 1.0)); }

  std::string name() const {
    switch (family_) {
      case Family::SqrtLinear: return "sqrt_linear";
      case Family::Square: return "square";
      case Family::Affine: return "affine";
    }
    return "?";
  }

  static QuantileMap from_name(const std::string& name, double a = 0.0, double b = 1.0) {
    if (name == "sqrt_linear") return sqrt_linear();
    if (name == "square") return square();
    if (name == "affine") return affine(a, b);
    throw std::invalid_argument("QuantileMap: unknown family name '" + name + "'");
  }

 private:
  Family family_;
  double a_ = 0.0;
  double b_ = 1.0;
};

}  // namespace misivqr
