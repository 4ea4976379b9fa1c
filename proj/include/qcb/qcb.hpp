#pragma once

// Umbrella header for the controlled-dephasing bounds library.

#include "qcb/operator.hpp"
#include "qcb/spinalg.hpp"
#include "qcb/states.hpp"
#include "qcb/lindblad.hpp"
#include "qcb/bounds.hpp"
#include "qcb/grape.hpp"
#include "qcb/io.hpp"
#include "qcb/experiment.hpp"
