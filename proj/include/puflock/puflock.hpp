#pragma once

// Umbrella header: simulated-PUF model binding toolkit.

#include "puflock/binding.hpp"
#include "puflock/bytes.hpp"
#include "puflock/dataset.hpp"
#include "puflock/errors.hpp"
#include "puflock/evalharness.hpp"
#include "puflock/model.hpp"
#include "puflock/model_io.hpp"
#include "puflock/puf.hpp"
#include "puflock/rng.hpp"
#include "puflock/train.hpp"
