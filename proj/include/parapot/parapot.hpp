#pragma once

// Umbrella header: parabolic potentials, Lorentz/Morrey norms, capacities,
// heat solves with measure data, and the fixed-point constructions.

#include "parapot/campaign.hpp"
#include "parapot/capacity.hpp"
#include "parapot/fixedpoint.hpp"
#include "parapot/geometry.hpp"
#include "parapot/heat.hpp"
#include "parapot/io.hpp"
#include "parapot/kernels.hpp"
#include "parapot/measure.hpp"
#include "parapot/norms.hpp"
#include "parapot/potentials.hpp"
#include "parapot/random.hpp"
#include "parapot/report.hpp"
