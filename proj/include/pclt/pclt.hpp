#pragma once

#include "pclt/bands.hpp"
#include "pclt/core.hpp"
#include "pclt/csv.hpp"
#include "pclt/dgp.hpp"
#include "pclt/diagnostics.hpp"
#include "pclt/entropy.hpp"
#include "pclt/error.hpp"
#include "pclt/estimators.hpp"
#include "pclt/harness.hpp"
#include "pclt/parallel.hpp"
#include "pclt/random.hpp"
#include "pclt/remote.hpp"
#include "pclt/rule_spec.hpp"
#include "pclt/rules.hpp"
#include "pclt/special.hpp"
#include "pclt/trajectory.hpp"
