#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "misivqr/bounds.hpp"
#include "misivqr/dataset.hpp"
#include "misivqr/identify.hpp"

namespace misivqr {

// Moment system implied by the modified testable implication at a candidate
// (y0, y1, p0, p1):
//   equalities, one per instrument value z:
//     E[ 1{Y<=y_D} - tau - p1(1{Y<=y0}-tau) - p0(1{Y<=y1}-tau) | Z=z ] = 0
//   inequalities, instrumented by outcome-quantile bins x instrument cells:
//     E[ (1{D=1}-p0) 1{Y in bin_j, Z=z} ] >= 0
//     E[ (1{D=0}-p1) 1{Y in bin_j, Z=z} ] >= 0
// Bin edges sit at pooled empirical Y-quantiles j/n_bins, so the system is a
// deterministic function of the dataset. Finitely many bins give an outer
// relaxation of the conditional bounds; n_bins tightens it.
struct MomentSpec {
  double tau = 0.5;
  int n_bins = 4;
  std::vector<double> bin_edges;  // n_bins - 1 strictly increasing values

  int equality_count() const { return 2; }
  int inequality_count() const { return 4 * n_bins; }
  int moment_count() const { return equality_count() + inequality_count(); }

  int bin_of(double y) const {
    int j = 0;
    while (j < static_cast<int>(bin_edges.size()) && y > bin_edges[j]) ++j;
    return j;
  }

  // Row layout: [eq z=0, eq z=1, then for z in {0,1}, bin j, type in {0,1}]
  // where type 0 carries (1{D=1}-p0) and type 1 carries (1{D=0}-p1).
  int inequality_row(int z, int j, int type) const {
    return equality_count() + (z * n_bins + j) * 2 + type;
  }
};

inline MomentSpec build_moment_spec(const Dataset& ds, double tau, int n_bins = 4) {
  QuantileSpec check(tau);
  (void)check;
  if (n_bins < 1) throw std::invalid_argument("build_moment_spec: n_bins must be >= 1");
  MomentSpec spec;
  spec.tau = tau;
  spec.n_bins = n_bins;
  std::vector<double> ys;
  ys.reserve(ds.size());
  for (const auto& o : ds.obs) ys.push_back(o.y);
  std::sort(ys.begin(), ys.end());
  const auto distinct = static_cast<int>(std::unique(ys.begin(), ys.end()) - ys.begin());
  if (distinct < n_bins)
    throw std::runtime_error("build_moment_spec: bin degeneracy (fewer distinct Y values than bins)");
  ys.resize(static_cast<std::size_t>(distinct));
  // re-sort full sample for quantiles (unique() above compacted it)
  ys.clear();
  for (const auto& o : ds.obs) ys.push_back(o.y);
  std::sort(ys.begin(), ys.end());
  for (int j = 1; j < n_bins; ++j) {
    spec.bin_edges.push_back(
        empirical_quantile_sorted(ys, static_cast<double>(j) / static_cast<double>(n_bins)));
  }
  for (std::size_t j = 1; j < spec.bin_edges.size(); ++j)
    if (!(spec.bin_edges[j] > spec.bin_edges[j - 1]))
      throw std::runtime_error("build_moment_spec: bin degeneracy (non-increasing edges)");
  return spec;
}

// Per-observation moment contributions plus their summary statistics. The
// stored contributions are the raw bracket terms (bounded in [-2,2]); the
// reported equality means and sds carry the 1/P(Z=z) conditioning scale.
// Means and sds are computed from integer cell counts, so they are exactly
// invariant to relabeling the observation order.
struct MomentEvaluation {
  std::size_t n = 0;
  int m = 0;
  std::vector<double> contributions;  // row-major n x m
  std::vector<double> means;
  std::vector<double> sds;
  std::vector<bool> is_equality;

  double contribution(std::size_t i, int j) const { return contributions[i * m + j]; }

  int equality_rows() const {
    int c = 0;
    for (bool b : is_equality)
      if (b) ++c;
    return c;
  }
};

inline std::string moment_evaluation_to_csv(const MomentEvaluation& ev) {
  std::string out = "row,kind,mean,sd\n";
  char buf[128];
  for (int j = 0; j < ev.m; ++j) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g\n", j,
                  ev.is_equality[j] ? "equality" : "inequality", ev.means[j], ev.sds[j]);
    out += buf;
  }
  return out;
}

// Modified-method-of-moments statistic: equalities enter squared, inequalities
// only through their negative part.
inline double test_statistic(const MomentEvaluation& ev, std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  double s = 0.0;
  for (int j = 0; j < ev.m; ++j) {
    const double xi = rn * ev.means[j] / ev.sds[j];
    if (ev.is_equality[j])
      s += xi * xi;
    else if (xi < 0.0)
      s += xi * xi;
  }
  return s;
}

namespace detail {

constexpr double kSdFloor = 1e-6;
constexpr double kSdDegenerate = 1e-12;

// sd with the degenerate-column fallback: a column whose contributions are
// constant gets unit scale, otherwise the floor applies.
inline double guard_sd(double sd) {
  if (sd < kSdDegenerate) return 1.0;
  return std::max(sd, kSdFloor);
}

}  // namespace detail

// Count-indexed evaluator for the moment system. All row means/variances are
// exact functions of rank counts within the four (z, d) cells plus fixed bin
// counts, so a point evaluation costs a few binary searches regardless of n.
// The same index powers the multiplier bootstrap through per-cell weight
// prefix sums.
class MomentKernel {
 public:
  MomentKernel(const Dataset& ds, const MomentSpec& spec) : spec_(spec), n_(ds.size()) {
    if (n_ == 0) throw std::invalid_argument("MomentKernel: empty dataset");
    for (int c = 0; c < 4; ++c) cell_order_[c].reserve(n_ / 2);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& o = ds.obs[i];
      cell_order_[cell_of(o.z, o.d)].push_back(i);
    }
    if ((cell_order_[0].size() + cell_order_[1].size()) == 0 ||
        (cell_order_[2].size() + cell_order_[3].size()) == 0)
      throw std::runtime_error("MomentKernel: empty instrument cell");
    for (int c = 0; c < 4; ++c) {
      auto& order = cell_order_[c];
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return ds.obs[a].y < ds.obs[b].y; });
      cell_y_[c].resize(order.size());
      for (std::size_t k = 0; k < order.size(); ++k) cell_y_[c][k] = ds.obs[order[k]].y;
    }
    bin_count_.assign(static_cast<std::size_t>(4 * spec_.n_bins), 0);
    for (const auto& o : ds.obs) ++bin_count_[bin_slot(o.z, spec_.bin_of(o.y), o.d)];
    nz_[0] = cell_order_[0].size() + cell_order_[1].size();
    nz_[1] = cell_order_[2].size() + cell_order_[3].size();
  }

  std::size_t n() const { return n_; }
  const MomentSpec& spec() const { return spec_; }

  struct RowStats {
    double mean;   // reported scale (equalities conditioned on Z=z)
    double sd;     // same scale, floored / degenerate-guarded
    double xi;     // sqrt(n) * mean / sd
  };

  // Cached geometry of one candidate point: everything a bootstrap draw needs
  // to produce the recentered studentized moments in O(rows).
  struct PointCache {
    ParamPoint point;
    // equality rows, per z: region boundaries and contribution values in the
    // two (z, d) cells, raw-scale mean, and studentization factors.
    struct EqRow {
      std::array<std::size_t, 2> k_low;   // counts <= min(y0,y1) in cells (z,0),(z,1)
      std::array<std::size_t, 2> k_high;  // counts <= max(y0,y1)
      std::array<std::array<double, 3>, 2> g;  // region values per cell
      double raw_mean;                          // sum g / n
      double scaled_sd;                         // reported-scale sd (guarded)
      double scale;                             // n / n_z
      double xi;
    };
    std::array<EqRow, 2> eq;
    // inequality rows: value on the D=1 and D=0 sub-cells of (z, bin).
    struct IneqRow {
      double v1, v0;      // contribution values on d=1 / d=0 observations
      int z, j;
      double raw_mean;
      double sd;          // guarded
      double xi;
      bool active;        // GMS selection, filled by the caller
    };
    std::vector<IneqRow> ineq;
    double statistic = 0.0;
    bool eq_hardened = false;  // all |xi_eq| <= kappa_n
  };

  PointCache make_cache(const ParamPoint& pt) const {
    PointCache cache;
    cache.point = pt;
    const double tau = spec_.tau;
    const double y_low = std::min(pt.y0, pt.y1);
    const double y_high = std::max(pt.y0, pt.y1);
    double stat = 0.0;
    for (int z = 0; z < 2; ++z) {
      auto& row = cache.eq[z];
      double sum = 0.0, sum2 = 0.0;
      for (int d = 0; d < 2; ++d) {
        const int c = cell_of(z, d);
        const auto& ys = cell_y_[c];
        row.k_low[d] = static_cast<std::size_t>(
            std::upper_bound(ys.begin(), ys.end(), y_low) - ys.begin());
        row.k_high[d] = static_cast<std::size_t>(
            std::upper_bound(ys.begin(), ys.end(), y_high) - ys.begin());
        // indicator pair (B, C) = (1{Y<=y0}, 1{Y<=y1}) by region
        const bool y0_is_low = pt.y0 <= pt.y1;
        const std::array<std::pair<double, double>, 3> bc = {
            std::pair<double, double>{1.0, 1.0},
            y0_is_low ? std::pair<double, double>{0.0, 1.0} : std::pair<double, double>{1.0, 0.0},
            std::pair<double, double>{0.0, 0.0}};
        for (int r = 0; r < 3; ++r) {
          const double B = bc[r].first, C = bc[r].second;
          row.g[d][r] = d == 0 ? (1.0 - pt.p1) * (B - tau) - pt.p0 * (C - tau)
                               : (1.0 - pt.p0) * (C - tau) - pt.p1 * (B - tau);
        }
        const std::array<std::size_t, 3> cnt = {row.k_low[d], row.k_high[d] - row.k_low[d],
                                                ys.size() - row.k_high[d]};
        for (int r = 0; r < 3; ++r) {
          sum += row.g[d][r] * static_cast<double>(cnt[r]);
          sum2 += row.g[d][r] * row.g[d][r] * static_cast<double>(cnt[r]);
        }
      }
      const double nd = static_cast<double>(n_);
      row.raw_mean = sum / nd;
      const double raw_var = std::max(sum2 / nd - row.raw_mean * row.raw_mean, 0.0);
      row.scale = nd / static_cast<double>(nz_[z]);
      const double raw_sd = std::sqrt(raw_var);
      row.scaled_sd = raw_sd < detail::kSdDegenerate ? 1.0
                                                     : std::max(raw_sd * row.scale, detail::kSdFloor);
      row.xi = std::sqrt(nd) * (row.raw_mean * row.scale) / row.scaled_sd;
      stat += row.xi * row.xi;
    }
    cache.ineq.reserve(static_cast<std::size_t>(spec_.inequality_count()));
    for (int z = 0; z < 2; ++z) {
      for (int j = 0; j < spec_.n_bins; ++j) {
        const double n1 = static_cast<double>(bin_count_[bin_slot(z, j, 1)]);
        const double n0 = static_cast<double>(bin_count_[bin_slot(z, j, 0)]);
        const double nd = static_cast<double>(n_);
        for (int type = 0; type < 2; ++type) {
          PointCache::IneqRow row;
          row.z = z;
          row.j = j;
          if (type == 0) {
            row.v1 = 1.0 - pt.p0;
            row.v0 = -pt.p0;
          } else {
            row.v1 = -pt.p1;
            row.v0 = 1.0 - pt.p1;
          }
          const double sum = row.v1 * n1 + row.v0 * n0;
          const double sum2 = row.v1 * row.v1 * n1 + row.v0 * row.v0 * n0;
          row.raw_mean = sum / nd;
          const double var = std::max(sum2 / nd - row.raw_mean * row.raw_mean, 0.0);
          row.sd = detail::guard_sd(std::sqrt(var));
          row.xi = std::sqrt(nd) * row.raw_mean / row.sd;
          row.active = false;
          if (row.xi < 0.0) stat += row.xi * row.xi;
          cache.ineq.push_back(row);
        }
      }
    }
    cache.statistic = stat;
    return cache;
  }

  double statistic(const ParamPoint& pt) const { return make_cache(pt).statistic; }

  std::vector<RowStats> point_stats(const ParamPoint& pt) const {
    const PointCache cache = make_cache(pt);
    std::vector<RowStats> out;
    out.reserve(static_cast<std::size_t>(spec_.moment_count()));
    for (int z = 0; z < 2; ++z)
      out.push_back({cache.eq[z].raw_mean * cache.eq[z].scale, cache.eq[z].scaled_sd,
                     cache.eq[z].xi});
    for (const auto& r : cache.ineq) out.push_back({r.raw_mean, r.sd, r.xi});
    return out;
  }

  // Multiplier-draw index: per-cell prefix sums of the weights in sorted-Y
  // order, total weight, and per-(z, bin, d) weight sums.
  struct DrawData {
    std::array<std::vector<double>, 4> prefix;
    std::vector<double> bin_wsum;
    double total = 0.0;
  };

  DrawData make_draw(std::span<const double> w) const {
    if (w.size() != n_) throw std::invalid_argument("make_draw: weight vector size mismatch");
    DrawData d;
    d.bin_wsum.assign(bin_count_.size(), 0.0);
    for (int c = 0; c < 4; ++c) {
      const auto& order = cell_order_[c];
      auto& pre = d.prefix[c];
      pre.resize(order.size() + 1);
      pre[0] = 0.0;
      for (std::size_t k = 0; k < order.size(); ++k) pre[k + 1] = pre[k] + w[order[k]];
      d.total += pre.back();
      const int z = c >> 1, dd = c & 1;
      for (std::size_t k = 0; k < order.size(); ++k) {
        d.bin_wsum[bin_slot(z, spec_.bin_of(cell_y_[c][k]), dd)] += w[order[k]];
      }
    }
    return d;
  }

  // Recentered studentized bootstrap statistic at a cached point. Inequality
  // rows contribute only when marked active; pass kappa_n-selected flags in
  // the cache before calling.
  double bootstrap_statistic(const PointCache& cache, const DrawData& draw) const {
    const double rn = std::sqrt(static_cast<double>(n_));
    double stat = 0.0;
    for (int z = 0; z < 2; ++z) {
      const auto& row = cache.eq[z];
      double wsum = 0.0;
      for (int d = 0; d < 2; ++d) {
        const auto& pre = draw.prefix[cell_of(z, d)];
        const double w_low = pre[row.k_low[d]];
        const double w_mid = pre[row.k_high[d]] - pre[row.k_low[d]];
        const double w_hi = pre.back() - pre[row.k_high[d]];
        wsum += row.g[d][0] * w_low + row.g[d][1] * w_mid + row.g[d][2] * w_hi;
      }
      const double v = (wsum - row.raw_mean * draw.total) * row.scale / (rn * row.scaled_sd);
      stat += v * v;
    }
    for (const auto& row : cache.ineq) {
      if (!row.active) continue;
      const double wsum = row.v1 * draw.bin_wsum[bin_slot(row.z, row.j, 1)] +
                          row.v0 * draw.bin_wsum[bin_slot(row.z, row.j, 0)];
      const double v = (wsum - row.raw_mean * draw.total) / (rn * row.sd);
      if (v < 0.0) stat += v * v;
    }
    return stat;
  }

  // Full per-observation contribution matrix for inspection and tests; the
  // summary rows reuse the exact count-based statistics.
  MomentEvaluation evaluate(const Dataset& ds, const ParamPoint& pt) const {
    pt.validate();
    MomentEvaluation ev;
    ev.n = n_;
    ev.m = spec_.moment_count();
    ev.contributions.assign(ev.n * static_cast<std::size_t>(ev.m), 0.0);
    const double tau = spec_.tau;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& o = ds.obs[i];
      double* row = &ev.contributions[i * static_cast<std::size_t>(ev.m)];
      const double B = o.y <= pt.y0 ? 1.0 : 0.0;
      const double C = o.y <= pt.y1 ? 1.0 : 0.0;
      const double A = o.d == 0 ? B : C;
      row[o.z] = A - tau - pt.p1 * (B - tau) - pt.p0 * (C - tau);
      const int j = spec_.bin_of(o.y);
      row[spec_.inequality_row(o.z, j, 0)] = (o.d == 1 ? 1.0 : 0.0) - pt.p0;
      row[spec_.inequality_row(o.z, j, 1)] = (o.d == 0 ? 1.0 : 0.0) - pt.p1;
    }
    const auto stats = point_stats(pt);
    ev.means.resize(static_cast<std::size_t>(ev.m));
    ev.sds.resize(static_cast<std::size_t>(ev.m));
    ev.is_equality.assign(static_cast<std::size_t>(ev.m), false);
    for (int jrow = 0; jrow < ev.m; ++jrow) {
      ev.means[jrow] = stats[jrow].mean;
      ev.sds[jrow] = stats[jrow].sd;
      ev.is_equality[jrow] = jrow < spec_.equality_count();
    }
    return ev;
  }

 private:
  static int cell_of(int z, int d) { return z * 2 + d; }
  std::size_t bin_slot(int z, int j, int d) const {
    return static_cast<std::size_t>(((z * spec_.n_bins) + j) * 2 + d);
  }

  MomentSpec spec_;
  std::size_t n_;
  std::array<std::vector<std::size_t>, 4> cell_order_;
  std::array<std::vector<double>, 4> cell_y_;
  std::array<std::size_t, 2> nz_{};
  std::vector<std::size_t> bin_count_;
};

inline MomentEvaluation evaluate_moments(const Dataset& ds, const MomentSpec& spec,
                                         const ParamPoint& pt) {
  return MomentKernel(ds, spec).evaluate(ds, pt);
}

}  // namespace misivqr
