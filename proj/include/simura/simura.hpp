#pragma once

// Umbrella header: the whole library in one include.

#include "simura/errors.hpp"
#include "simura/text.hpp"
#include "simura/core.hpp"
#include "simura/llm.hpp"
#include "simura/llm_http.hpp"
#include "simura/prompts.hpp"
#include "simura/perception.hpp"
#include "simura/actions.hpp"
#include "simura/proposer.hpp"
#include "simura/simulator.hpp"
#include "simura/critic.hpp"
#include "simura/planner.hpp"
#include "simura/grounding.hpp"
#include "simura/environment.hpp"
#include "simura/driver.hpp"
#include "simura/harness.hpp"
#include "simura/flightqa.hpp"
#include "simura/config.hpp"
#include "simura/cli.hpp"
