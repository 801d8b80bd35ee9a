#pragma once

// Umbrella header.

#include "ssmc/group.hpp"
#include "ssmc/random.hpp"
#include "ssmc/synthetic.hpp"
#include "ssmc/solver.hpp"
#include "ssmc/clustering.hpp"
#include "ssmc/geometry.hpp"
#include "ssmc/io.hpp"
#include "ssmc/experiment.hpp"
