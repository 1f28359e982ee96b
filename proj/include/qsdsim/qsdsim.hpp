#pragma once

#include "qsdsim/configuration.hpp"
#include "qsdsim/coupling.hpp"
#include "qsdsim/ensemble.hpp"
#include "qsdsim/errors.hpp"
#include "qsdsim/oracle.hpp"
#include "qsdsim/qsd.hpp"
#include "qsdsim/random.hpp"
#include "qsdsim/rates.hpp"
#include "qsdsim/simulator.hpp"
#include "qsdsim/stats.hpp"
#include "qsdsim/trait_space.hpp"
#include "qsdsim/trajectory.hpp"
#include "qsdsim/validation.hpp"
