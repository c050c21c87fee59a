#pragma once

// Umbrella header for the bearing-fault detection library.

#include "gsabfd/baselines.hpp"
#include "gsabfd/common.hpp"
#include "gsabfd/config.hpp"
#include "gsabfd/diagnose.hpp"
#include "gsabfd/emd.hpp"
#include "gsabfd/features.hpp"
#include "gsabfd/graph.hpp"
#include "gsabfd/ingest.hpp"
#include "gsabfd/nn.hpp"
#include "gsabfd/pipeline.hpp"
#include "gsabfd/sage.hpp"
#include "gsabfd/wavelet.hpp"
