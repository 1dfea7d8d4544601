#pragma once

#include "dpos/common.hpp"
#include "dpos/report.hpp"
#include "dpos/region.hpp"
#include "dpos/dynamics.hpp"
#include "dpos/cones.hpp"
#include "dpos/checker.hpp"
#include "dpos/model_zoo.hpp"
#include "dpos/attractors.hpp"
