#pragma once

#include "mogb/types.hpp"
#include "mogb/distance.hpp"
#include "mogb/io.hpp"
#include "mogb/cluster.hpp"
#include "mogb/encoder.hpp"
#include "mogb/boundary.hpp"
#include "mogb/eval.hpp"
#include "mogb/synthetic.hpp"
#include "mogb/experiment.hpp"
#include "mogb/presets.hpp"
