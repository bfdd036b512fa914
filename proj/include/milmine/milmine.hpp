// Umbrella header.
#pragma once

#include "milmine/checkpoint.hpp"
#include "milmine/common.hpp"
#include "milmine/core_math.hpp"
#include "milmine/data.hpp"
#include "milmine/grad_check.hpp"
#include "milmine/mining.hpp"
#include "milmine/model.hpp"
#include "milmine/rng.hpp"
#include "milmine/training.hpp"
