#pragma once

#include "ise/analysis.hpp"
#include "ise/csv.hpp"
#include "ise/filter.hpp"
#include "ise/gains.hpp"
#include "ise/linalg.hpp"
#include "ise/model.hpp"
#include "ise/montecarlo.hpp"
#include "ise/rng.hpp"
#include "ise/structured_norm.hpp"
