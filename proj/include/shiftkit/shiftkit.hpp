#pragma once

#include "shiftkit/error.hpp"
#include "shiftkit/random.hpp"
#include "shiftkit/core.hpp"
#include "shiftkit/models.hpp"
#include "shiftkit/quantify.hpp"
#include "shiftkit/calibrate.hpp"
#include "shiftkit/eval.hpp"
#include "shiftkit/cap.hpp"
#include "shiftkit/bridges.hpp"
#include "shiftkit/oracles.hpp"
#include "shiftkit/synthetic.hpp"
#include "shiftkit/experiment.hpp"
