#pragma once

#include "tbiformer/attention.hpp"
#include "tbiformer/checkpoint.hpp"
#include "tbiformer/dct.hpp"
#include "tbiformer/encodings.hpp"
#include "tbiformer/error.hpp"
#include "tbiformer/grad_check.hpp"
#include "tbiformer/model.hpp"
#include "tbiformer/motion.hpp"
#include "tbiformer/ops.hpp"
#include "tbiformer/optim.hpp"
#include "tbiformer/scene_io.hpp"
#include "tbiformer/synth.hpp"
#include "tbiformer/tape.hpp"
#include "tbiformer/tbpm.hpp"
#include "tbiformer/tensor.hpp"
#include "tbiformer/train.hpp"
