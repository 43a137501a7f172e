#pragma once

#include "scalewise/error.hpp"
#include "scalewise/scale.hpp"
#include "scalewise/memory_tree.hpp"
#include "scalewise/chat.hpp"
#include "scalewise/remote_backend.hpp"
#include "scalewise/prompts.hpp"
#include "scalewise/structured.hpp"
#include "scalewise/agents.hpp"
#include "scalewise/session.hpp"
#include "scalewise/report.hpp"
#include "scalewise/respondent.hpp"
#include "scalewise/orchestrator.hpp"
#include "scalewise/metrics.hpp"
#include "scalewise/benchmark.hpp"
#include "scalewise/persistence.hpp"
#include "scalewise/service.hpp"
