#pragma once

// Umbrella header.

#include "odin/atlas.hpp"
#include "odin/dataset.hpp"
#include "odin/design.hpp"
#include "odin/edge_index.hpp"
#include "odin/error.hpp"
#include "odin/evaluation.hpp"
#include "odin/fit_io.hpp"
#include "odin/influence.hpp"
#include "odin/mm.hpp"
#include "odin/model.hpp"
#include "odin/parallel.hpp"
#include "odin/random.hpp"
#include "odin/synthetic.hpp"
#include "odin/threshold.hpp"
