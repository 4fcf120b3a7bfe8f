#pragma once

// Straightforward serial versions of the replication kernels. They consume
// random numbers in the same order as the optimized paths, so both must agree
// up to floating-point reassociation.

#include <span>
#include <vector>

#include "supgauss/simulate.hpp"

namespace supgauss::reference {

/// Evaluates every function at every draw, one replication after another.
SupSample empirical_sup_sample(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t n,
                               std::size_t R, const RngPolicy& rng, std::span<const double> means,
                               bool abs_max = false);

/// Plain triple loop for L xi.
SupSample gaussian_sup_sample(const CovarianceModel& cov, std::size_t R, const RngPolicy& rng, bool abs_max = false);

}  // namespace supgauss::reference
