#pragma once

#include "ppdgd/analysis.hpp"
#include "ppdgd/casestudy.hpp"
#include "ppdgd/dynamics.hpp"
#include "ppdgd/errors.hpp"
#include "ppdgd/geometry.hpp"
#include "ppdgd/inner_solver.hpp"
#include "ppdgd/io.hpp"
#include "ppdgd/objectives.hpp"
#include "ppdgd/problem.hpp"
