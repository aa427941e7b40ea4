#pragma once

// Umbrella header.

#include "tul/common.hpp"
#include "tul/rng.hpp"
#include "tul/dataset.hpp"
#include "tul/dataset_io.hpp"
#include "tul/embedding.hpp"
#include "tul/synthetic.hpp"
#include "tul/model.hpp"
#include "tul/trainer.hpp"
#include "tul/selection.hpp"
#include "tul/unlearning.hpp"
#include "tul/metrics.hpp"
#include "tul/harness.hpp"
#include "tul/harness_io.hpp"
