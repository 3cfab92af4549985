#pragma once

#include "foothold/common.hpp"
#include "foothold/criteria.hpp"
#include "foothold/io.hpp"
#include "foothold/locomotion.hpp"
#include "foothold/mpc.hpp"
#include "foothold/qp.hpp"
#include "foothold/regions.hpp"
#include "foothold/safenet.hpp"
#include "foothold/sim.hpp"
#include "foothold/terrain.hpp"
