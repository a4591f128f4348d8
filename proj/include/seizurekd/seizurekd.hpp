// SPDX-License-Identifier: Apache-2.0
// Umbrella header.
#pragma once

#include "seizurekd/common.hpp"
#include "seizurekd/preprocess.hpp"
#include "seizurekd/biosignal_io.hpp"
#include "seizurekd/neuralnet.hpp"
#include "seizurekd/res1dcnn.hpp"
#include "seizurekd/metrics.hpp"
#include "seizurekd/distill.hpp"
#include "seizurekd/quant.hpp"
#include "seizurekd/serialize.hpp"
#include "seizurekd/bench.hpp"
#include "seizurekd/experiment.hpp"
