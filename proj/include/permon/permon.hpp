#pragma once

// Umbrella header for the persistent-monitoring trajectory library.

#include "permon/baseline.hpp"
#include "permon/coordinator.hpp"
#include "permon/draining.hpp"
#include "permon/model.hpp"
#include "permon/nlp.hpp"
#include "permon/scenario_io.hpp"
#include "permon/sim.hpp"
#include "permon/vec.hpp"
