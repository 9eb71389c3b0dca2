#pragma once

#include "fewshot/class_index.hpp"
#include "fewshot/embedding_store.hpp"
#include "fewshot/episode_sampler.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/eval_harness.hpp"
#include "fewshot/inference.hpp"
#include "fewshot/matrix.hpp"
#include "fewshot/random.hpp"
#include "fewshot/run_config.hpp"
