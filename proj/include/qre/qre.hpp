#pragma once

#include "qre/tolerances.hpp"
#include "qre/linalg.hpp"
#include "qre/measurement.hpp"
#include "qre/scenarios.hpp"
#include "qre/randomness.hpp"
#include "qre/protocol.hpp"
#include "qre/assumptions.hpp"
#include "qre/security.hpp"
#include "qre/io.hpp"
#include "qre/cli.hpp"
