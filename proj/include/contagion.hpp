#pragma once

#include "contagion/error.hpp"
#include "contagion/rational.hpp"
#include "contagion/moments.hpp"
#include "contagion/kernel.hpp"
#include "contagion/loss_engine.hpp"
#include "contagion/quadrature.hpp"
#include "contagion/simulation.hpp"
#include "contagion/pricing.hpp"
#include "contagion/reference_models.hpp"
#include "contagion/io.hpp"
#include "contagion/selftest.hpp"
