#pragma once

#include "tecfap/analysis.hpp"
#include "tecfap/backend.hpp"
#include "tecfap/corpus.hpp"
#include "tecfap/error.hpp"
#include "tecfap/http_backend.hpp"
#include "tecfap/metrics.hpp"
#include "tecfap/oracle_backend.hpp"
#include "tecfap/probegen.hpp"
#include "tecfap/reward.hpp"
#include "tecfap/rng.hpp"
#include "tecfap/run.hpp"
#include "tecfap/text.hpp"
