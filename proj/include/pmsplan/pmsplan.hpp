#pragma once

#include "pmsplan/cli.hpp"
#include "pmsplan/errors.hpp"
#include "pmsplan/estimators.hpp"
#include "pmsplan/inference.hpp"
#include "pmsplan/io.hpp"
#include "pmsplan/loss.hpp"
#include "pmsplan/numeric.hpp"
#include "pmsplan/planner.hpp"
#include "pmsplan/priors.hpp"
#include "pmsplan/rng.hpp"
#include "pmsplan/supply_model.hpp"
#include "pmsplan/utility.hpp"
