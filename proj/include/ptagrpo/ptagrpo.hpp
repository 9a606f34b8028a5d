#pragma once

#include "vocab.hpp"
#include "rng.hpp"
#include "tagged.hpp"
#include "task.hpp"
#include "context.hpp"
#include "policy.hpp"
#include "optimizer.hpp"
#include "cold_start.hpp"
#include "rollout.hpp"
#include "reward.hpp"
#include "grpo.hpp"
#include "theory.hpp"
#include "eval.hpp"
#include "experiment.hpp"
