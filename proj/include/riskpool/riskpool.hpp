#pragma once

#include "riskpool/asymptotics.hpp"
#include "riskpool/config.hpp"
#include "riskpool/distribution.hpp"
#include "riskpool/mc_engine.hpp"
#include "riskpool/normal.hpp"
#include "riskpool/preferences.hpp"
#include "riskpool/risk_measures.hpp"
#include "riskpool/rng.hpp"
#include "riskpool/verify.hpp"
