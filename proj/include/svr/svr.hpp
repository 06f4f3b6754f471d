// Umbrella header.
#pragma once

#include "svr/commands.hpp"
#include "svr/dataset.hpp"
#include "svr/errors.hpp"
#include "svr/gp_kernels.hpp"
#include "svr/io.hpp"
#include "svr/metrics.hpp"
#include "svr/random.hpp"
#include "svr/sampler.hpp"
#include "svr/simulate.hpp"
#include "svr/smoother.hpp"
#include "svr/spline.hpp"
#include "svr/statespace.hpp"
#include "svr/summary.hpp"
