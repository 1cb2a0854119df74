#pragma once

#include "mfcce/analytic_example.hpp"
#include "mfcce/config.hpp"
#include "mfcce/correlation.hpp"
#include "mfcce/equilibrium.hpp"
#include "mfcce/metrics.hpp"
#include "mfcce/model.hpp"
#include "mfcce/parallel.hpp"
#include "mfcce/rng.hpp"
#include "mfcce/runner.hpp"
#include "mfcce/sde_engine.hpp"
