#pragma once

// Umbrella header for the hierarchical attention library.

#include "hattn/errors.hpp"
#include "hattn/matrix.hpp"
#include "hattn/matrix_io.hpp"
#include "hattn/params.hpp"
#include "hattn/random.hpp"
#include "hattn/hierarchy.hpp"
#include "hattn/blocks.hpp"
#include "hattn/apply.hpp"
#include "hattn/vjp.hpp"
#include "hattn/oracle.hpp"
