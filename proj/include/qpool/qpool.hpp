#pragma once

#include "qpool/accuracy.hpp"
#include "qpool/cli.hpp"
#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/bootstrap.hpp"
#include "qpool/estimators/cohort.hpp"
#include "qpool/estimators/convolution.hpp"
#include "qpool/estimators/mmpa_formula.hpp"
#include "qpool/estimators/monte_carlo.hpp"
#include "qpool/estimators/risk_score.hpp"
#include "qpool/io.hpp"
#include "qpool/parallel.hpp"
#include "qpool/procedures.hpp"
#include "qpool/simulate.hpp"
