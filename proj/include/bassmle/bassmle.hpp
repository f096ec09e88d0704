#pragma once

#include "bassmle/core_model.hpp"
#include "bassmle/errors.hpp"
#include "bassmle/estimator.hpp"
#include "bassmle/experiments.hpp"
#include "bassmle/likelihood.hpp"
#include "bassmle/observed_path.hpp"
#include "bassmle/pricing.hpp"
#include "bassmle/random.hpp"
#include "bassmle/simulator.hpp"
