#include <catch2/catch_amalgamated.hpp>

#include "misivqr/dataset.hpp"
#include "misivqr/rng.hpp"

using namespace misivqr;

TEST_CASE("misclassify keeps clean labels when rates are zero") {
  for (double u : {0.01, 0.5, 0.99}) {
    REQUIRE(misclassify(0, 0.0, 0.3, u) == 0);
    REQUIRE(misclassify(1, 0.3, 0.0, u) == 1);
  }
  REQUIRE(misclassify(0, 0.4, 0.0, 0.39) == 1);
  REQUIRE(misclassify(0, 0.4, 0.0, 0.41) == 0);
}

TEST_CASE("misclassify flip fraction concentrates at p1") {
  SplitRng rng(2024, 0);
  const int n = 1000000;
  int flips = 0;
  for (int i = 0; i < n; ++i)
    if (misclassify(1, 0.0, 0.25, rng.next_double()) == 0) ++flips;
  REQUIRE(std::abs(static_cast<double>(flips) / n - 0.25) < 0.002);
}

TEST_CASE("sample_dataset is bit-identical per seed and distinct across seeds") {
  const StructuralModel m = StructuralModel::design(2);
  const Dataset a = sample_dataset(m, 500, 11);
  const Dataset b = sample_dataset(m, 500, 11);
  const Dataset c = sample_dataset(m, 500, 12);
  REQUIRE(a.size() == 500);
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal &= a.obs[i].y == b.obs[i].y && a.obs[i].d == b.obs[i].d && a.obs[i].z == b.obs[i].z;
    any_diff |= a.obs[i].y != c.obs[i].y;
  }
  REQUIRE(all_equal);
  REQUIRE(any_diff);
}

TEST_CASE("no misclassification means d equals the true treatment") {
  StructuralModel m = StructuralModel::design(1);
  m.p0 = m.p1 = 0.0;
  const Dataset ds = sample_dataset(m, 4000, 7);
  // gamma = 0.5: every z1 record is treated, every z0 record untreated
  for (const auto& o : ds.obs) REQUIRE(o.d == o.z);
}

TEST_CASE("observed treatment rate matches the misclassification mixing") {
  // design 2 at z1: pi = 0.75, so P(D=1|z1) = 0.25*0.25 + 0.75*0.75 = 0.625
  const StructuralModel m = StructuralModel::design(2);
  const Dataset ds = sample_dataset(m, 1000000, 5);
  long n1 = 0, d1 = 0;
  for (const auto& o : ds.obs)
    if (o.z == 1) {
      ++n1;
      d1 += o.d;
    }
  REQUIRE(std::abs(static_cast<double>(d1) / n1 - 0.625) < 0.005);
}

TEST_CASE("dataset csv round-trips byte-identically") {
  const Dataset ds = sample_dataset(StructuralModel::design(3), 200, 3);
  const std::string csv = dataset_to_csv(ds);
  REQUIRE(csv.rfind("y,d,z\n", 0) == 0);
  const Dataset back = dataset_from_csv_text(csv);
  REQUIRE(back.size() == ds.size());
  REQUIRE(dataset_to_csv(back) == csv);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    REQUIRE(back.obs[i].y == ds.obs[i].y);
    REQUIRE(back.obs[i].d == ds.obs[i].d);
    REQUIRE(back.obs[i].z == ds.obs[i].z);
  }
}

TEST_CASE("csv parsing rejects malformed input") {
  REQUIRE_THROWS(dataset_from_csv_text("a,b,c\n1,0,0\n"));
  REQUIRE_THROWS(dataset_from_csv_text("y,d,z\n0.5,2,0\n"));
  REQUIRE_THROWS(dataset_from_csv_text("y,d,z\n"));
}
