#pragma once

#include "errors.hpp"
#include "rng.hpp"
#include "sinusoid.hpp"
#include "signal_model.hpp"
#include "obm_io.hpp"
#include "baseline_di.hpp"
#include "likelihood.hpp"
#include "relax.hpp"
#include "admm.hpp"
#include "freq_init.hpp"
#include "mmrelax.hpp"
#include "bic.hpp"
#include "echo_recovery.hpp"
#include "config.hpp"
#include "pipeline.hpp"
