#pragma once

#include "mscbo/bilevel.hpp"
#include "mscbo/consensus.hpp"
#include "mscbo/dynamics.hpp"
#include "mscbo/ensemble.hpp"
#include "mscbo/harness.hpp"
#include "mscbo/multiscale_sim.hpp"
#include "mscbo/objectives.hpp"
#include "mscbo/rng.hpp"
#include "mscbo/trilevel.hpp"
