#pragma once

#include "bilimor/core.hpp"
#include "bilimor/system.hpp"
#include "bilimor/lyapunov.hpp"
#include "bilimor/simulate.hpp"
#include "bilimor/gramians.hpp"
#include "bilimor/mor.hpp"
#include "bilimor/bounds.hpp"
#include "bilimor/stochastic.hpp"
#include "bilimor/benchgen.hpp"
#include "bilimor/io.hpp"
