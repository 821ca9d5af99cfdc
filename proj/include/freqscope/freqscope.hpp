#pragma once

#include "freqscope/config.hpp"
#include "freqscope/dataset.hpp"
#include "freqscope/defend.hpp"
#include "freqscope/error.hpp"
#include "freqscope/evaluate.hpp"
#include "freqscope/experiment.hpp"
#include "freqscope/features.hpp"
#include "freqscope/forest.hpp"
#include "freqscope/governor.hpp"
#include "freqscope/keystroke.hpp"
#include "freqscope/knn.hpp"
#include "freqscope/model_io.hpp"
#include "freqscope/profile.hpp"
#include "freqscope/random.hpp"
#include "freqscope/sampler.hpp"
#include "freqscope/source.hpp"
#include "freqscope/trace.hpp"
#include "freqscope/workload.hpp"
