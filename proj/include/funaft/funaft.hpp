// Umbrella header.
#pragma once

#include "funaft/basis.hpp"
#include "funaft/bfgs.hpp"
#include "funaft/csv_out.hpp"
#include "funaft/dataset.hpp"
#include "funaft/design.hpp"
#include "funaft/errors.hpp"
#include "funaft/fitter.hpp"
#include "funaft/likelihood.hpp"
#include "funaft/metrics.hpp"
#include "funaft/model_io.hpp"
#include "funaft/predict.hpp"
#include "funaft/simulate.hpp"
#include "funaft/study.hpp"
