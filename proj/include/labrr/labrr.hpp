#pragma once

#include "labrr/data.hpp"
#include "labrr/errors.hpp"
#include "labrr/eval.hpp"
#include "labrr/experiment.hpp"
#include "labrr/kernels.hpp"
#include "labrr/model_io.hpp"
#include "labrr/numerics.hpp"
#include "labrr/ridgeless.hpp"
#include "labrr/trainer.hpp"
