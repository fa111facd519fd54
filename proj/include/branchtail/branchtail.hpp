#pragma once

// umbrella header

#include "branchtail/asymptotics.hpp"
#include "branchtail/distributions.hpp"
#include "branchtail/estimate.hpp"
#include "branchtail/experiment.hpp"
#include "branchtail/io.hpp"
#include "branchtail/laplace.hpp"
#include "branchtail/pmf.hpp"
#include "branchtail/rng.hpp"
#include "branchtail/simulate.hpp"
