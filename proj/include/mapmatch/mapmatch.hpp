#pragma once

// Umbrella header: the whole map-matching library.

#include "mapmatch/evaluation.hpp"
#include "mapmatch/geometry.hpp"
#include "mapmatch/jacobi.hpp"
#include "mapmatch/multi_track.hpp"
#include "mapmatch/rng.hpp"
#include "mapmatch/road_network.hpp"
#include "mapmatch/simulation.hpp"
#include "mapmatch/single_track.hpp"
#include "mapmatch/text.hpp"
