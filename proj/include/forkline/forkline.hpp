#pragma once

#include "forkline/core/deque.hpp"
#include "forkline/core/stack.hpp"
#include "forkline/core/stats.hpp"
#include "forkline/core/task.hpp"
#include "forkline/metrics/metrics.hpp"
#include "forkline/sched/pool.hpp"
#include "forkline/sched/topology.hpp"
#include "forkline/sched/victim.hpp"
