#pragma once

// Everything except the gradient / oracle checks and the synthetic data.

#include "landcover/analysis.hpp"
#include "landcover/dataset.hpp"
#include "landcover/geometry.hpp"
#include "landcover/inference.hpp"
#include "landcover/nn/train.hpp"
#include "landcover/raster.hpp"
#include "landcover/run_config.hpp"
