#pragma once

#include "errors.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "matrixkit.hpp"
#include "netmodel.hpp"
#include "spectral.hpp"
#include "alignment.hpp"
#include "packing.hpp"
#include "mcharness.hpp"
#include "hyperbolic.hpp"

namespace grdpg {
inline constexpr const char* version = "0.1.0";
}
