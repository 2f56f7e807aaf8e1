#pragma once

// Umbrella header: the whole laboratory in one include.

#include "backlab/arch.hpp"
#include "backlab/arch_json.hpp"
#include "backlab/config.hpp"
#include "backlab/csv.hpp"
#include "backlab/dataset.hpp"
#include "backlab/digest.hpp"
#include "backlab/errors.hpp"
#include "backlab/eval.hpp"
#include "backlab/gradcheck.hpp"
#include "backlab/mia.hpp"
#include "backlab/model.hpp"
#include "backlab/model_io.hpp"
#include "backlab/poison.hpp"
#include "backlab/reinjection.hpp"
#include "backlab/runner.hpp"
#include "backlab/scenario.hpp"
#include "backlab/schedule.hpp"
#include "backlab/svg.hpp"
#include "backlab/tensor.hpp"
#include "backlab/train.hpp"
#include "backlab/trainlog.hpp"
#include "backlab/trigger.hpp"
