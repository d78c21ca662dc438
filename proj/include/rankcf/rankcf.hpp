#pragma once

#include "rankcf/cli_io.hpp"
#include "rankcf/control_function.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/dgp.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/estimators.hpp"
#include "rankcf/first_stage.hpp"
#include "rankcf/inference.hpp"
#include "rankcf/link.hpp"
#include "rankcf/mc_harness.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/parallel.hpp"
#include "rankcf/parametric_liml.hpp"
#include "rankcf/rng.hpp"
#include "rankcf/semiparametric_liml.hpp"
