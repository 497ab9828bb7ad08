#pragma once

#include "pricesuggest/config.hpp"
#include "pricesuggest/dataset.hpp"
#include "pricesuggest/error.hpp"
#include "pricesuggest/features.hpp"
#include "pricesuggest/item.hpp"
#include "pricesuggest/metrics.hpp"
#include "pricesuggest/model.hpp"
#include "pricesuggest/numeric.hpp"
#include "pricesuggest/objectives.hpp"
#include "pricesuggest/trainer.hpp"
#include "pricesuggest/types.hpp"
