#pragma once

#include "zigzag/analysis.hpp"
#include "zigzag/core.hpp"
#include "zigzag/io.hpp"
#include "zigzag/models.hpp"
#include "zigzag/parallel.hpp"
#include "zigzag/poisson.hpp"
#include "zigzag/rng.hpp"
#include "zigzag/samplers.hpp"
#include "zigzag/stats.hpp"
