#pragma once

#include "spectre/common.hpp"
#include "spectre/projector.hpp"
#include "spectre/random.hpp"
#include "spectre/regularizers.hpp"
#include "spectre/run_config.hpp"
#include "spectre/solver.hpp"
#include "spectre/spectral_model.hpp"
#include "spectre/t3d_io.hpp"
#include "spectre/tensor3.hpp"
