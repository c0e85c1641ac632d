#pragma once

// Umbrella header for the GVQA evaluation harness.

#include "gvqa/backend.hpp"
#include "gvqa/camera.hpp"
#include "gvqa/data_model.hpp"
#include "gvqa/declarative.hpp"
#include "gvqa/detection.hpp"
#include "gvqa/diagnostics.hpp"
#include "gvqa/graph.hpp"
#include "gvqa/metrics.hpp"
#include "gvqa/prompting.hpp"
#include "gvqa/report.hpp"
#include "gvqa/runner.hpp"
#include "gvqa/tag.hpp"
