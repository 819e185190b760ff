#pragma once

#include "exact/exact_loss.hpp"
#include "exact/linalg.hpp"
#include "exact/mvn_orthant.hpp"
#include "exact/normal.hpp"
#include "exact/oracles.hpp"
#include "exact/parallel.hpp"
#include "exact/random.hpp"
#include "exact/run_config.hpp"
#include "exact/surrogate_losses.hpp"
#include "exact/tabular_data.hpp"
#include "exact/trainer.hpp"
#include "exact/toys.hpp"
