#pragma once

#include "rehab/error.hpp"
#include "rehab/gmm.hpp"
#include "rehab/harness.hpp"
#include "rehab/metrics.hpp"
#include "rehab/motion.hpp"
#include "rehab/report.hpp"
#include "rehab/rng.hpp"
#include "rehab/sequence_io.hpp"
#include "rehab/skeleton.hpp"
#include "rehab/stgcn.hpp"
#include "rehab/synthetic.hpp"
