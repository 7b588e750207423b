#pragma once

#include "chiralrate/balance.hpp"
#include "chiralrate/config.hpp"
#include "chiralrate/csv.hpp"
#include "chiralrate/errors.hpp"
#include "chiralrate/integrate.hpp"
#include "chiralrate/jump.hpp"
#include "chiralrate/model.hpp"
#include "chiralrate/presets.hpp"
#include "chiralrate/rates.hpp"
#include "chiralrate/thermo.hpp"
