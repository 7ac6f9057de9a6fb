#pragma once

// Joint optical flow estimation and two-layer separation for image pairs
// containing transparency or reflection.

#include "duoflow/alternation.hpp"
#include "duoflow/energy.hpp"
#include "duoflow/flow_solver.hpp"
#include "duoflow/image.hpp"
#include "duoflow/io.hpp"
#include "duoflow/layer_solver.hpp"
#include "duoflow/metrics.hpp"
#include "duoflow/pyramid.hpp"
#include "duoflow/synth.hpp"
