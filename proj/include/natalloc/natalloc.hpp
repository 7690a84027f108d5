#pragma once

// Umbrella header: the full pricing library.

#include "natalloc/allocation.hpp"
#include "natalloc/calibrate.hpp"
#include "natalloc/distortion.hpp"
#include "natalloc/fixtures.hpp"
#include "natalloc/grid.hpp"
#include "natalloc/io.hpp"
#include "natalloc/level_view.hpp"
#include "natalloc/marginal.hpp"
#include "natalloc/numeric.hpp"
#include "natalloc/oracle.hpp"
#include "natalloc/outcome_table.hpp"
