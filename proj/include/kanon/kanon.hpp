#pragma once

#include "kanon/anonymizers.hpp"
#include "kanon/audit.hpp"
#include "kanon/backends.hpp"
#include "kanon/data_model.hpp"
#include "kanon/harness.hpp"
#include "kanon/information_loss.hpp"
#include "kanon/pipeline.hpp"
#include "kanon/profiles.hpp"
#include "kanon/prompt_engine.hpp"
#include "kanon/taxonomy.hpp"
