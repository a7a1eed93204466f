#pragma once

// Feature/clutter separation for planar point patterns: K-th NN distance
// mixtures fitted by EM, automatic K via segmented regression on the entropy
// curve, entropy-based stopping for iterative re-application, and a
// Monte-Carlo benchmark harness.

#include "knnclutter/benchmark.hpp"
#include "knnclutter/errors.hpp"
#include "knnclutter/geometry.hpp"
#include "knnclutter/io.hpp"
#include "knnclutter/iterate.hpp"
#include "knnclutter/metrics.hpp"
#include "knnclutter/mixture.hpp"
#include "knnclutter/parallel.hpp"
#include "knnclutter/rng.hpp"
#include "knnclutter/selection.hpp"
#include "knnclutter/simulate.hpp"
