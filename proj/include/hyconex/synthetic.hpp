#pragma once

#include <cstdint>

#include "hyconex/dataset.hpp"

namespace hcx {

/// Two interleaving half circles of radius 1: class 0 is the upper arc
/// (cos t, sin t), class 1 the lower arc (1 - cos t, 0.5 - sin t), t in [0, pi],
/// each point perturbed by N(0, noise^2).
RawDataset make_moons(std::size_t n, double noise, std::uint64_t seed);

/// `classes` isotropic unit-variance Gaussians in `dim` dimensions. Centres are
/// drawn in [-10, 10]^dim and rejected until pairwise distances are at least 6.
RawDataset make_blobs(std::size_t n, int classes, std::uint64_t seed, int dim = 2, double stddev = 1.0);

}  // namespace hcx
