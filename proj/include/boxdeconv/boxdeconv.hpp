#pragma once

// Umbrella header: the whole box-deconvolution toolkit.

#include "boxdeconv/boxconv.hpp"
#include "boxdeconv/errors.hpp"
#include "boxdeconv/experiment.hpp"
#include "boxdeconv/imaging.hpp"
#include "boxdeconv/io.hpp"
#include "boxdeconv/lp.hpp"
#include "boxdeconv/recovery.hpp"
#include "boxdeconv/rng.hpp"
#include "boxdeconv/signal.hpp"
