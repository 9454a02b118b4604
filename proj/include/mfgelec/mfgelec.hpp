#pragma once

#include "mfgelec/best_response.hpp"
#include "mfgelec/clearing.hpp"
#include "mfgelec/config.hpp"
#include "mfgelec/diffusion.hpp"
#include "mfgelec/equilibrium.hpp"
#include "mfgelec/errors.hpp"
#include "mfgelec/grids.hpp"
#include "mfgelec/initial_measures.hpp"
#include "mfgelec/lp.hpp"
#include "mfgelec/measure.hpp"
#include "mfgelec/model.hpp"
#include "mfgelec/mps.hpp"
#include "mfgelec/parallel.hpp"
#include "mfgelec/problem.hpp"
#include "mfgelec/results.hpp"
#include "mfgelec/reward.hpp"
#include "mfgelec/simplicial.hpp"
#include "mfgelec/sparse.hpp"
#include "mfgelec/staged_lp.hpp"
#include "mfgelec/supply_curve.hpp"
