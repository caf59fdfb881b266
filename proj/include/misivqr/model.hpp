#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "misivqr/quantile_map.hpp"

namespace misivqr {

// Data-generating primitive: outcome map q, Gaussian-copula dependence rho
// between outcome rank U and selection rank V, binary instrument with
// propensities pi(z0)=0.5-gamma, pi(z1)=0.5+gamma, and misclassification
// probabilities (p0,p1) for the observed treatment.
struct StructuralModel {
  QuantileMap q;
  double rho = 0.0;
  double gamma = 0.25;
  std::array<double, 2> z_probs = {0.5, 0.5};
  double p0 = 0.0;
  double p1 = 0.0;

  double propensity(int z) const { return z == 0 ? 0.5 - gamma : 0.5 + gamma; }

  void validate() const {
    if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("model: rho must be in (-1,1)");
    if (!(gamma >= -0.5 && gamma <= 0.5))
      throw std::invalid_argument("model: gamma must be in [-0.5,0.5]");
    if (!(p0 >= 0.0 && p0 < 1.0 && p1 >= 0.0 && p1 < 1.0))
      throw std::invalid_argument("model: p0,p1 must be in [0,1)");
    if (!(p0 + p1 < 1.0)) throw std::invalid_argument("model: p0+p1 must be < 1");
    if (!(z_probs[0] >= 0.0 && z_probs[1] >= 0.0 &&
          std::abs(z_probs[0] + z_probs[1] - 1.0) < 1e-12))
      throw std::invalid_argument("model: z_probs must be nonnegative and sum to 1");
    for (int z : {0, 1}) {
      const double pi = propensity(z);
      if (!(pi >= 0.0 && pi <= 1.0))
        throw std::invalid_argument("model: propensity outside [0,1]");
    }
  }

  // Monte Carlo designs from the simulation study; p0=p1=0.25, sqrt-linear map.
  static StructuralModel design(int id) {
    StructuralModel m;
    m.q = QuantileMap::sqrt_linear();
    m.p0 = m.p1 = 0.25;
    switch (id) {
      case 1: m.rho = 0.0; m.gamma = 0.5; break;
      case 2: m.rho = 0.0; m.gamma = 0.25; break;
      case 3: m.rho = 0.5; m.gamma = 0.25; break;
      default: throw std::invalid_argument("design id must be 1, 2 or 3");
    }
    m.validate();
    return m;
  }
};

inline void to_json(nlohmann::json& j, const StructuralModel& m) {
  j = nlohmann::json{{"family", m.q.name()},
                     {"rho", m.rho},
                     {"gamma", m.gamma},
                     {"z_probs", m.z_probs},
                     {"p0", m.p0},
                     {"p1", m.p1}};
  if (m.q.family() == QuantileMap::Family::Affine) {
    j["a"] = m.q.affine_a();
    j["b"] = m.q.affine_b();
  }
}

inline void from_json(const nlohmann::json& j, StructuralModel& m) {
  const std::string family = j.at("family").get<std::string>();
  m.q = QuantileMap::from_name(family, j.value("a", 0.0), j.value("b", 1.0));
  m.rho = j.at("rho").get<double>();
  m.gamma = j.at("gamma").get<double>();
  if (j.contains("z_probs")) m.z_probs = j.at("z_probs").get<std::array<double, 2>>();
  m.p0 = j.at("p0").get<double>();
  m.p1 = j.at("p1").get<double>();
  m.validate();
}

}  // namespace misivqr
