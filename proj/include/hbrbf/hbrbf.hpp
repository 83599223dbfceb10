#pragma once

// Umbrella header for the hierarchical-basis RBF interpolation and Kriging
// toolkit.

#include "hbrbf/types.hpp"
#include "hbrbf/rng.hpp"
#include "hbrbf/kernels.hpp"
#include "hbrbf/polyspace.hpp"
#include "hbrbf/geometry.hpp"
#include "hbrbf/hbasis.hpp"
#include "hbrbf/mrop.hpp"
#include "hbrbf/solver.hpp"
#include "hbrbf/kriging.hpp"
#include "hbrbf/testcases.hpp"
#include "hbrbf/io.hpp"
