#pragma once

#include "recbench/corpus.hpp"
#include "recbench/error.hpp"
#include "recbench/harness.hpp"
#include "recbench/metrics.hpp"
#include "recbench/recommenders.hpp"
#include "recbench/textproc.hpp"
#include "recbench/types.hpp"
