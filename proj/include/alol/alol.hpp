#pragma once

#include "alol/datagen.hpp"
#include "alol/dataset.hpp"
#include "alol/engine.hpp"
#include "alol/errors.hpp"
#include "alol/learners.hpp"
#include "alol/metrics.hpp"
#include "alol/policies.hpp"
#include "alol/pool.hpp"
#include "alol/probe.hpp"
#include "alol/rng.hpp"
