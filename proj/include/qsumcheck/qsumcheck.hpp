#pragma once

#include "qsumcheck/circuit.hpp"
#include "qsumcheck/decision.hpp"
#include "qsumcheck/errors.hpp"
#include "qsumcheck/experiments.hpp"
#include "qsumcheck/linalg.hpp"
#include "qsumcheck/params.hpp"
#include "qsumcheck/precision.hpp"
#include "qsumcheck/protocol.hpp"
#include "qsumcheck/rng.hpp"
#include "qsumcheck/sampling.hpp"
#include "qsumcheck/selftest.hpp"
#include "qsumcheck/transcript.hpp"
