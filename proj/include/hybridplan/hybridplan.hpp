#pragma once

#include "hybridplan/linalg.hpp"
#include "hybridplan/geometry.hpp"
#include "hybridplan/ma_core.hpp"
#include "hybridplan/composition.hpp"
#include "hybridplan/assumptions.hpp"
#include "hybridplan/workspace.hpp"
#include "hybridplan/product.hpp"
#include "hybridplan/planning.hpp"
#include "hybridplan/search.hpp"
#include "hybridplan/chain.hpp"
#include "hybridplan/integrator.hpp"
#include "hybridplan/hybrid_sim.hpp"
#include "hybridplan/io.hpp"
