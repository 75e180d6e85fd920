#pragma once

#include "metasurf/core.hpp"
#include "metasurf/metareg.hpp"
#include "metasurf/pooling.hpp"
#include "metasurf/random.hpp"
#include "metasurf/response_surface.hpp"
#include "metasurf/simulation.hpp"
