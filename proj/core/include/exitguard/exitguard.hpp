#pragma once

#include "exitguard/calib.hpp"
#include "exitguard/config.hpp"
#include "exitguard/error.hpp"
#include "exitguard/io.hpp"
#include "exitguard/losses.hpp"
#include "exitguard/metrics.hpp"
#include "exitguard/model.hpp"
#include "exitguard/optim.hpp"
#include "exitguard/policy.hpp"
#include "exitguard/prob.hpp"
#include "exitguard/reports.hpp"
#include "exitguard/risk_curve.hpp"
#include "exitguard/rng.hpp"
#include "exitguard/shift.hpp"
#include "exitguard/split.hpp"
#include "exitguard/synth.hpp"
#include "exitguard/train.hpp"
#include "exitguard/types.hpp"
