#pragma once

#include "misivqr/bounds.hpp"
#include "misivqr/dataset.hpp"
#include "misivqr/identify.hpp"
#include "misivqr/inference.hpp"
#include "misivqr/model.hpp"
#include "misivqr/moments.hpp"
#include "misivqr/montecarlo.hpp"
#include "misivqr/normal.hpp"
#include "misivqr/parallel.hpp"
#include "misivqr/perturbation.hpp"
#include "misivqr/population.hpp"
#include "misivqr/quadrature.hpp"
#include "misivqr/quantile_map.hpp"
#include "misivqr/rng.hpp"

namespace misivqr {
inline constexpr const char* kVersion = "0.1.0";
}
