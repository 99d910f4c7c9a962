#pragma once

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/evidence.hpp"
#include "dpca/features.hpp"
#include "dpca/infer.hpp"
#include "dpca/likelihood.hpp"
#include "dpca/model.hpp"
#include "dpca/random.hpp"
#include "dpca/retrieval.hpp"
#include "dpca/sampler.hpp"
