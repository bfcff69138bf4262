#pragma once

// dispec - dichotomy spectrum and almost reducibility for linear
// nonautonomous difference systems. Convenience umbrella header.

#include "dispec/common.hpp"
#include "dispec/errors.hpp"
#include "dispec/system.hpp"
#include "dispec/propagator.hpp"
#include "dispec/dichotomy.hpp"
#include "dispec/similarity.hpp"
#include "dispec/spectrum.hpp"
#include "dispec/blockdiag.hpp"
#include "dispec/contraction.hpp"
#include "dispec/report.hpp"
