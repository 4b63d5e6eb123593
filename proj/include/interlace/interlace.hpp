#pragma once

// Everything: lattice, walks, capacity, sampler, connectivity, schemes, tree sums, harness.

#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"
#include "interlace/symmetry.hpp"
#include "interlace/stats.hpp"
#include "interlace/walk.hpp"
#include "interlace/capacity.hpp"
#include "interlace/sampler.hpp"
#include "interlace/sample_io.hpp"
#include "interlace/connectivity.hpp"
#include "interlace/scheme.hpp"
#include "interlace/tree_sum.hpp"
#include "interlace/harness/config.hpp"
#include "interlace/harness/exploration.hpp"
#include "interlace/harness/experiments.hpp"
