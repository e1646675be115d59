#pragma once

#include "cg.hpp"
#include "config.hpp"
#include "deformation.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "image.hpp"
#include "spectral.hpp"
#include "synthetic.hpp"
#include "tracker.hpp"
#include "training.hpp"
#include "types.hpp"
