#pragma once

#include "innoguard/attack.hpp"
#include "innoguard/channels.hpp"
#include "innoguard/errors.hpp"
#include "innoguard/kalman.hpp"
#include "innoguard/model.hpp"
#include "innoguard/parallel.hpp"
#include "innoguard/rng.hpp"
#include "innoguard/scenario.hpp"
#include "innoguard/sds.hpp"
#include "innoguard/statkit.hpp"
