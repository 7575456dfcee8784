#pragma once

// Umbrella header for the whole library.

#include "vqahead/adam.hpp"
#include "vqahead/annotations.hpp"
#include "vqahead/answer_types.hpp"
#include "vqahead/checkpoint.hpp"
#include "vqahead/ensemble.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/evaluate.hpp"
#include "vqahead/feature_file.hpp"
#include "vqahead/head.hpp"
#include "vqahead/join.hpp"
#include "vqahead/levenshtein.hpp"
#include "vqahead/metrics.hpp"
#include "vqahead/normalize.hpp"
#include "vqahead/train.hpp"
#include "vqahead/vocabulary.hpp"
#include "vqahead/vqa_score.hpp"
