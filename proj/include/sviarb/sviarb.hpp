#pragma once

#include "sviarb/black_scholes.hpp"
#include "sviarb/calibration.hpp"
#include "sviarb/domain.hpp"
#include "sviarb/error.hpp"
#include "sviarb/fukasawa.hpp"
#include "sviarb/io.hpp"
#include "sviarb/market_data.hpp"
#include "sviarb/numerics.hpp"
#include "sviarb/svi.hpp"
