#pragma once

// Umbrella header: open-loop steering of parameter-dependent families of
// linear systems by moment collocation and consensus flows.

#include "ensemble/analysis.hpp"
#include "ensemble/collocation.hpp"
#include "ensemble/csv.hpp"
#include "ensemble/errors.hpp"
#include "ensemble/flows.hpp"
#include "ensemble/gramian.hpp"
#include "ensemble/json_io.hpp"
#include "ensemble/matrix_exp.hpp"
#include "ensemble/runner.hpp"
#include "ensemble/system.hpp"
#include "ensemble/targets.hpp"
#include "ensemble/time_grid.hpp"
