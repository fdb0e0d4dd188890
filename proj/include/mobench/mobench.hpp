#pragma once

#include "mobench/error.hpp"
#include "mobench/dates.hpp"
#include "mobench/tensor.hpp"
#include "mobench/panel.hpp"
#include "mobench/calendar.hpp"
#include "mobench/seasonal.hpp"
#include "mobench/lstsq.hpp"
#include "mobench/forecast.hpp"
#include "mobench/arres.hpp"
#include "mobench/metrics.hpp"
#include "mobench/bench.hpp"
