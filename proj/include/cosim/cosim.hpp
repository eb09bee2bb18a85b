#pragma once

#include "cosim/checkpoint.hpp"
#include "cosim/common.hpp"
#include "cosim/data.hpp"
#include "cosim/encoder.hpp"
#include "cosim/eval.hpp"
#include "cosim/gradcheck.hpp"
#include "cosim/image.hpp"
#include "cosim/losses.hpp"
#include "cosim/metric.hpp"
#include "cosim/ops.hpp"
#include "cosim/optim.hpp"
#include "cosim/pipeline.hpp"
#include "cosim/rng.hpp"
#include "cosim/tensor.hpp"
