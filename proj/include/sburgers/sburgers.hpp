#pragma once

// umbrella header

#include "sburgers/analysis.hpp"
#include "sburgers/brownian.hpp"
#include "sburgers/cole_hopf.hpp"
#include "sburgers/coefficients.hpp"
#include "sburgers/config.hpp"
#include "sburgers/fbsde.hpp"
#include "sburgers/fd_solver.hpp"
#include "sburgers/fields.hpp"
#include "sburgers/grid.hpp"
#include "sburgers/inviscid.hpp"
#include "sburgers/io.hpp"
#include "sburgers/noise_field.hpp"
#include "sburgers/problem.hpp"
#include "sburgers/scenario.hpp"
#include "sburgers/transformed_force.hpp"
