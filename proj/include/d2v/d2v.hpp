#pragma once

#include "d2v/analytics.hpp"
#include "d2v/baselines.hpp"
#include "d2v/data.hpp"
#include "d2v/matrix.hpp"
#include "d2v/model.hpp"
#include "d2v/nn.hpp"
#include "d2v/pipeline.hpp"
#include "d2v/synth.hpp"
#include "d2v/tasks.hpp"
#include "d2v/util.hpp"
