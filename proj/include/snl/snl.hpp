#pragma once

#include "snl/core_model.hpp"
#include "snl/error.hpp"
#include "snl/evaluation.hpp"
#include "snl/metagraph.hpp"
#include "snl/rng.hpp"
#include "snl/selection.hpp"
#include "snl/spectral_solver.hpp"
#include "snl/synthgen.hpp"
