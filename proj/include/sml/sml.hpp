#pragma once

#include "sml/distance.hpp"
#include "sml/errors.hpp"
#include "sml/flp.hpp"
#include "sml/gaussian_processes.hpp"
#include "sml/hermite.hpp"
#include "sml/io.hpp"
#include "sml/levy.hpp"
#include "sml/mc_engine.hpp"
#include "sml/numerics.hpp"
#include "sml/rng.hpp"
#include "sml/subordinated_clt.hpp"
#include "sml/wiener_poisson.hpp"
