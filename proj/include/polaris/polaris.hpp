#pragma once

// Umbrella header for the self-adaptation framework.

#include "polaris/adapters.hpp"
#include "polaris/bus.hpp"
#include "polaris/codec.hpp"
#include "polaris/config.hpp"
#include "polaris/domain.hpp"
#include "polaris/erlang.hpp"
#include "polaris/external_engine.hpp"
#include "polaris/fast_controller.hpp"
#include "polaris/harness.hpp"
#include "polaris/kernel.hpp"
#include "polaris/knowledge_base.hpp"
#include "polaris/meta_learner.hpp"
#include "polaris/reasoner.hpp"
#include "polaris/rng.hpp"
#include "polaris/simulator.hpp"
#include "polaris/trace.hpp"
#include "polaris/triage.hpp"
#include "polaris/verifier.hpp"
#include "polaris/world_model.hpp"
