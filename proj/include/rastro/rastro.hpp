// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rastro/error.hpp"
#include "rastro/time.hpp"
#include "rastro/core.hpp"
#include "rastro/serialize.hpp"
#include "rastro/store.hpp"
#include "rastro/capture.hpp"
#include "rastro/metrics.hpp"
#include "rastro/stats.hpp"
#include "rastro/query.hpp"
#include "rastro/synthesis.hpp"
#include "rastro/reporting.hpp"
