#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "misivqr/model.hpp"
#include "misivqr/normal.hpp"
#include "misivqr/rng.hpp"

namespace misivqr {

struct Observation {
  double y;
  int d;  // observed (possibly misclassified) treatment
  int z;  // instrument index, 0 or 1
};

struct Dataset {
  std::vector<Observation> obs;
  std::uint64_t seed = 0;

  std::size_t size() const { return obs.size(); }
};

// Flips d_star with probability p_{d_star}; u is a uniform draw.
inline int misclassify(int d_star, double p0, double p1, double u) {
  const double p = d_star == 0 ? p0 : p1;
  return u < p ? 1 - d_star : d_star;
}

// Draws observation i from its own substream: order of generation never
// matters. Fixed draw order per observation: z, two normals, flip.
inline Observation sample_observation(const StructuralModel& m, std::uint64_t seed, std::uint64_t i) {
  SplitRng rng(seed, i);
  const int z = rng.next_double() < m.z_probs[1] ? 1 : 0;
  const double n1 = norm_quantile(rng.next_double());
  const double n2 = norm_quantile(rng.next_double());
  const double x2 = m.rho * n1 + std::sqrt((1.0 - m.rho) * (1.0 + m.rho)) * n2;
  const double u = norm_cdf(n1);
  const double v = norm_cdf(x2);
  const int d_star = v <= m.propensity(z) ? 1 : 0;
  const double y = m.q.value(d_star, u);
  const int d = misclassify(d_star, m.p0, m.p1, rng.next_double());
  return {y, d, z};
}

inline Dataset sample_dataset(const StructuralModel& m, std::size_t n, std::uint64_t seed) {
  m.validate();
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Dataset ds;
  ds.seed = seed;
  ds.obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.obs.push_back(sample_observation(m, seed, i));
  return ds;
}

// CSV with header `y,d,z`; y printed with %.17g so values round-trip exactly.
inline std::string dataset_to_csv(const Dataset& ds) {
  std::string out = "y,d,z\n";
  char buf[64];
  for (const auto& o : ds.obs) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%d\n", o.y, o.d, o.z);
    out += buf;
  }
  return out;
}

inline Dataset dataset_from_csv_text(const std::string& text) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "y,d,z")
    throw std::runtime_error("dataset csv: expected header 'y,d,z'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Observation o{};
    char c1, c2;
    std::istringstream row(line);
    if (!(row >> o.y >> c1 >> o.d >> c2 >> o.z) || c1 != ',' || c2 != ',')
      throw std::runtime_error("dataset csv: bad row '" + line + "'");
    if ((o.d != 0 && o.d != 1) || (o.z != 0 && o.z != 1))
      throw std::runtime_error("dataset csv: d and z must be 0/1");
    ds.obs.push_back(o);
  }
  if (ds.obs.empty()) throw std::runtime_error("dataset csv: no rows");
  return ds;
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << dataset_to_csv(ds);
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dataset: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return dataset_from_csv_text(ss.str());
}

}  // namespace misivqr
