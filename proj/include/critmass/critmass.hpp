#pragma once

#include "critmass/dataset.hpp"
#include "critmass/errors.hpp"
#include "critmass/micro.hpp"
#include "critmass/nls.hpp"
#include "critmass/ols.hpp"
#include "critmass/ranking.hpp"
#include "critmass/report.hpp"
#include "critmass/rng.hpp"
#include "critmass/segmented.hpp"
#include "critmass/special.hpp"
#include "critmass/stats.hpp"
