#pragma once

// Umbrella header: the whole library.
#include "dtrf/checkpoint.hpp"
#include "dtrf/common.hpp"
#include "dtrf/config.hpp"
#include "dtrf/dataset.hpp"
#include "dtrf/image.hpp"
#include "dtrf/metrics.hpp"
#include "dtrf/occupancy.hpp"
#include "dtrf/optim.hpp"
#include "dtrf/parallel.hpp"
#include "dtrf/radiance_model.hpp"
#include "dtrf/regularize.hpp"
#include "dtrf/sh.hpp"
#include "dtrf/tensor_factors.hpp"
#include "dtrf/trainer.hpp"
#include "dtrf/volume_render.hpp"
