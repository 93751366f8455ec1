#ifndef GAPKIT_GAPKIT_HPP
#define GAPKIT_GAPKIT_HPP

#include "gapkit/core.hpp"
#include "gapkit/spaces.hpp"
#include "gapkit/gap.hpp"
#include "gapkit/nets.hpp"
#include "gapkit/interp.hpp"
#include "gapkit/couplings.hpp"
#include "gapkit/znorm.hpp"
#include "gapkit/descriptor_io.hpp"
#include "gapkit/experiments.hpp"
#include "gapkit/run_config.hpp"

#endif  // GAPKIT_GAPKIT_HPP
