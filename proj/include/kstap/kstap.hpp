#pragma once

// Kronecker-structured STAP toolkit: low-rank Kronecker clutter covariance
// estimation, the Kronecker STAP filter family, an SIRV clutter simulator,
// and a Monte Carlo benchmark harness.

#include "kstap/cli.hpp"
#include "kstap/covariance.hpp"
#include "kstap/errors.hpp"
#include "kstap/experiments.hpp"
#include "kstap/filters.hpp"
#include "kstap/io.hpp"
#include "kstap/linalg.hpp"
#include "kstap/metrics.hpp"
#include "kstap/rng.hpp"
#include "kstap/sim.hpp"
#include "kstap/types.hpp"
